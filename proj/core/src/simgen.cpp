#include "rap/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace rap::sim {

void validate(const RegimeSpec& spec) {
    if (spec.p < 1) throw std::invalid_argument("RegimeSpec: p must be >= 1");
    if (!(spec.rho >= 0.0 && spec.rho <= 1.0)) {
        throw std::invalid_argument("RegimeSpec: rho must lie in [0, 1]");
    }
    if (spec.n_blocks < 1) throw std::invalid_argument("RegimeSpec: n_blocks must be >= 1");
    if (!(spec.block_corr >= 0.0 && spec.block_corr < 1.0)) {
        throw std::invalid_argument("RegimeSpec: block_corr must lie in [0, 1)");
    }
}

std::vector<Index> block_sizes(Index p, int n_blocks) {
    if (p < 1 || n_blocks < 1) throw std::invalid_argument("block_sizes: p and n_blocks must be >= 1");
    const Index blocks = std::min<Index>(p, n_blocks);
    std::vector<Index> sizes(static_cast<std::size_t>(blocks), p / blocks);
    for (Index b = 0; b < p % blocks; ++b) ++sizes[static_cast<std::size_t>(b)];
    return sizes;
}

Matrix make_covariance(Index p, int n_blocks, double block_corr) {
    if (!(block_corr >= 0.0 && block_corr < 1.0)) {
        throw std::invalid_argument("make_covariance: block_corr must lie in [0, 1), got " +
                                    std::to_string(block_corr));
    }
    Matrix sigma = Matrix::Zero(p, p);
    Index start = 0;
    for (Index size : block_sizes(p, n_blocks)) {
        sigma.block(start, start, size, size).setConstant(block_corr);
        start += size;
    }
    sigma.diagonal().setOnes();
    return sigma;
}

Regime sample_regime(const RegimeSpec& spec, Rng& rng, int regime_id) {
    validate(spec);
    const Index p = spec.p;
    const Family family(spec.family);

    Regime out;
    out.permutation.resize(static_cast<std::size_t>(p));
    std::iota(out.permutation.begin(), out.permutation.end(), Index{0});
    std::shuffle(out.permutation.begin(), out.permutation.end(), rng);

    std::vector<Index> coords(static_cast<std::size_t>(p));
    std::iota(coords.begin(), coords.end(), Index{0});
    std::shuffle(coords.begin(), coords.end(), rng);
    const auto n_active = static_cast<std::size_t>(std::lround(spec.rho * static_cast<double>(p)));
    std::vector<Index> support(coords.begin(), coords.begin() + static_cast<std::ptrdiff_t>(n_active));
    std::sort(support.begin(), support.end());

    std::normal_distribution<double> normal(0.0, 1.0);
    out.true_beta = Vector::Zero(p);
    for (Index j : support) {
        double v = normal(rng);
        while (v == 0.0) v = normal(rng);
        out.true_beta[j] = v;
    }

    const Matrix chol = Eigen::LLT<Matrix>(make_covariance(p, spec.n_blocks, spec.block_corr)).matrixL();
    out.samples.reserve(spec.duration);
    Vector z(p);
    for (std::size_t t = 0; t < spec.duration; ++t) {
        for (Index j = 0; j < p; ++j) z[j] = normal(rng);
        const Vector draw = chol * z;
        StreamSample s;
        s.x.resize(p);
        for (Index j = 0; j < p; ++j) s.x[out.permutation[static_cast<std::size_t>(j)]] = draw[j];
        const double eta = s.x.dot(out.true_beta);
        if (spec.family == FamilyKind::gaussian) {
            s.y = eta + normal(rng);
        } else {
            std::bernoulli_distribution coin(family.inverse_link(eta));
            s.y = coin(rng) ? 1.0 : 0.0;
        }
        s.true_beta = out.true_beta;
        s.true_support = support;
        s.regime_id = regime_id;
        out.samples.push_back(std::move(s));
    }
    return out;
}

Regime sample_regime(const RegimeSpec& spec) {
    Rng rng(spec.seed);
    return sample_regime(spec, rng);
}

std::vector<StreamSample> make_piecewise_stream(const std::vector<RegimeSpec>& specs, Rng& rng) {
    if (specs.empty()) throw std::invalid_argument("make_piecewise_stream: no regimes given");
    for (const auto& spec : specs) {
        if (spec.p != specs.front().p || spec.family != specs.front().family) {
            throw std::invalid_argument("make_piecewise_stream: regimes disagree on p or family");
        }
    }
    std::vector<StreamSample> stream;
    for (std::size_t k = 0; k < specs.size(); ++k) {
        auto regime = sample_regime(specs[k], rng, static_cast<int>(k));
        std::move(regime.samples.begin(), regime.samples.end(), std::back_inserter(stream));
    }
    return stream;
}

std::vector<RegimeSpec> table1_specs(FamilyKind family) {
    RegimeSpec dense;
    dense.p = 20;
    dense.rho = 0.8;
    dense.duration = 100;
    dense.family = family;
    RegimeSpec sparse = dense;
    sparse.rho = 0.2;
    return {dense, sparse, dense};
}

std::vector<std::size_t> changepoints(const std::vector<StreamSample>& stream) {
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i < stream.size(); ++i) {
        if (stream[i].regime_id != stream[i - 1].regime_id) out.push_back(i);
    }
    return out;
}

} // namespace rap::sim
