#include "rap/lasso_cd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rap::lasso {

double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

double lambda_max(const Eigen::Ref<const Vector>& score) {
    return score.size() == 0 ? 0.0 : score.cwiseAbs().maxCoeff();
}

double lambda_max(const WeightedMoments& m) {
    if (m.count() == 0) {
        throw std::invalid_argument("lambda_max: no observations in the stream");
    }
    return lambda_max(m.cross());
}

std::vector<Index> support(const Vector& beta) {
    std::vector<Index> out;
    for (Index j = 0; j < beta.size(); ++j) {
        if (beta[j] != 0.0) out.push_back(j);
    }
    return out;
}

double objective(const Matrix& gram, const Vector& cross, const Vector& beta, double lambda) {
    return 0.5 * beta.dot(gram * beta) - cross.dot(beta) + lambda * beta.lpNorm<1>();
}

double kkt_violation(const Matrix& gram, const Vector& cross, const Vector& beta, double lambda) {
    return kkt_violation(Vector(gram * beta - cross), beta, lambda);
}

double kkt_violation(const Vector& g, const Vector& beta, double lambda) {
    const double scale = std::max(1.0, lambda);
    double worst = 0.0;
    for (Index j = 0; j < beta.size(); ++j) {
        if (beta[j] != 0.0) {
            const double s = beta[j] > 0.0 ? 1.0 : -1.0;
            worst = std::max(worst, std::abs(g[j] + lambda * s) / scale);
        } else {
            worst = std::max(worst, std::abs(g[j]) - lambda);
        }
    }
    return worst;
}

namespace {

// One pass of coordinate updates over `coords`; `resid` tracks b - A beta.
double sweep(const Matrix& A, const std::vector<Index>& coords, double lambda, Vector& beta,
             Vector& resid) {
    double max_change = 0.0;
    for (Index j : coords) {
        const double ajj = A(j, j);
        if (!(ajj > 0.0)) continue;
        const double old = beta[j];
        const double updated = soft_threshold(resid[j] + ajj * old, lambda) / ajj;
        const double delta = updated - old;
        if (delta != 0.0) {
            resid.noalias() -= delta * A.col(j);
            beta[j] = updated;
            max_change = std::max(max_change, std::abs(delta));
        }
    }
    return max_change;
}

// Solves the stationarity system on the current support with fixed signs and
// keeps the result only if it is a consistent lasso solution.
void polish(const Matrix& A, const Vector& b, double lambda, Vector& beta) {
    const auto active = support(beta);
    if (active.empty()) return;
    const auto k = static_cast<Index>(active.size());
    Matrix block(k, k);
    Vector rhs(k);
    for (Index a = 0; a < k; ++a) {
        const double s = beta[active[a]] > 0.0 ? 1.0 : -1.0;
        rhs[a] = b[active[a]] - lambda * s;
        for (Index c = 0; c < k; ++c) block(a, c) = A(active[a], active[c]);
    }
    Eigen::LDLT<Matrix> ldlt(block);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-12) return;
    const Vector solved = ldlt.solve(rhs);

    Vector candidate = Vector::Zero(beta.size());
    for (Index a = 0; a < k; ++a) {
        const double s = beta[active[a]] > 0.0 ? 1.0 : -1.0;
        if (solved[a] * s <= 0.0) return;  // sign flip: CD has not settled the support
        candidate[active[a]] = solved[a];
    }
    const Vector g = b - A * candidate;
    const double slack = lambda * (1.0 + 1e-9) + 1e-12;
    for (Index j = 0; j < beta.size(); ++j) {
        if (candidate[j] == 0.0 && std::abs(g[j]) > slack) return;
    }
    if (objective(A, b, candidate, lambda) <= objective(A, b, beta, lambda) + 1e-12) {
        beta = candidate;
    }
}

} // namespace

LassoFit solve(const Matrix& gram, const Vector& cross, double lambda, const Vector& start,
               const CdOptions& options) {
    const Index p = gram.rows();
    if (gram.cols() != p || cross.size() != p || start.size() != p) {
        throw std::invalid_argument("lasso::solve: dimension mismatch");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("lasso::solve: lambda must be finite and >= 0, got " +
                                    std::to_string(lambda));
    }

    LassoFit out;
    out.lambda = lambda;
    out.beta = start;
    std::vector<Index> all(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) {
        all[static_cast<std::size_t>(j)] = j;
        if (!(gram(j, j) > 0.0)) out.beta[j] = 0.0;
    }

    Vector resid;
    int sweeps = 0;
    while (sweeps < options.max_sweeps) {
        resid = cross - gram * out.beta;
        const double change = sweep(gram, all, lambda, out.beta, resid);
        ++sweeps;
        if (change < options.tol) {
            out.converged = true;
            break;
        }
        const auto active = support(out.beta);
        while (sweeps < options.max_sweeps) {
            const double inner = sweep(gram, active, lambda, out.beta, resid);
            ++sweeps;
            if (inner < options.tol) break;
        }
    }
    if (out.converged && options.polish) polish(gram, cross, lambda, out.beta);

    out.iterations = sweeps;
    out.active_set = support(out.beta);
    return out;
}

LassoFit fit(const WeightedMoments& m, double lambda, const CdOptions& options) {
    return solve(m.gram(), m.cross(), lambda, Vector::Zero(m.dim()), options);
}

LassoFit fit(const WeightedMoments& m, double lambda, const LassoFit& warm,
             const CdOptions& options) {
    if (warm.beta.size() != m.dim()) return fit(m, lambda, options);
    return solve(m.gram(), m.cross(), lambda, warm.beta, options);
}

} // namespace rap::lasso
