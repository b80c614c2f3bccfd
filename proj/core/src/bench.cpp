#include "rap/bench.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

namespace rap::bench {

namespace {

struct FoldRange {
    Index begin;
    Index end;
};

std::vector<FoldRange> contiguous_folds(Index n, int k) {
    std::vector<FoldRange> folds;
    for (int f = 0; f < k; ++f) {
        folds.push_back({n * f / k, n * (f + 1) / k});
    }
    return folds;
}

std::vector<double> log_grid(double top, int size, double min_ratio) {
    std::vector<double> grid(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) {
        const double frac = size == 1 ? 0.0 : static_cast<double>(i) / (size - 1);
        grid[static_cast<std::size_t>(i)] = top * std::pow(min_ratio, frac);
    }
    return grid;
}

Matrix drop_rows(const Matrix& X, FoldRange held) {
    Matrix out(X.rows() - (held.end - held.begin), X.cols());
    out.topRows(held.begin) = X.topRows(held.begin);
    out.bottomRows(X.rows() - held.end) = X.bottomRows(X.rows() - held.end);
    return out;
}

Vector drop_rows(const Vector& y, FoldRange held) {
    Vector out(y.size() - (held.end - held.begin));
    out.head(held.begin) = y.head(held.begin);
    out.tail(y.size() - held.end) = y.tail(y.size() - held.end);
    return out;
}

} // namespace

LassoFit fit_uniform(const Matrix& X, const Vector& y, const Family& family, double lambda) {
    const auto n = static_cast<double>(X.rows());
    if (family.kind() == FamilyKind::gaussian) {
        auto out = lasso::solve(X.transpose() * X, X.transpose() * y, lambda * n,
                                Vector::Zero(X.cols()));
        out.lambda = lambda;
        return out;
    }
    auto out = glm::fit(X, y, Vector::Ones(X.rows()), family, lambda * n, Vector::Zero(X.cols()));
    out.lambda = lambda;
    return out;
}

CvResult kfold_cv_lambda(const Matrix& X, const Vector& y, const Family& family,
                         const CvOptions& options) {
    const Index n = X.rows();
    if (y.size() != n) throw std::invalid_argument("kfold_cv_lambda: X and y lengths differ");
    if (options.folds < 2 || n < options.folds) {
        throw std::invalid_argument("kfold_cv_lambda: need 2 <= folds <= rows (folds=" +
                                    std::to_string(options.folds) + ", rows=" +
                                    std::to_string(n) + ")");
    }
    if (options.grid_size < 1) throw std::invalid_argument("kfold_cv_lambda: grid_size must be >= 1");
    if (!(options.min_ratio > 0.0 && options.min_ratio <= 1.0)) {
        throw std::invalid_argument("kfold_cv_lambda: min_ratio must lie in (0, 1]");
    }

    CvResult out;
    const double spread = (y.array() - y.mean()).abs().maxCoeff();
    out.degenerate = !(spread > 0.0);

    const Vector ones = Vector::Ones(n);
    const double top = glm::lambda_max(X, y, ones, family) / static_cast<double>(n);
    out.grid = log_grid(top, options.grid_size, options.min_ratio);
    out.cv_loss.assign(out.grid.size(), 0.0);
    if (out.grid.size() == 1 || !(top > 0.0)) {
        out.lambda = out.grid.front();
        return out;
    }

    const auto folds = contiguous_folds(n, options.folds);
    const bool gaussian = family.kind() == FamilyKind::gaussian;
    const Matrix full_gram = gaussian ? Matrix(X.transpose() * X) : Matrix();
    const Vector full_cross = gaussian ? Vector(X.transpose() * y) : Vector();

    for (const auto& fold : folds) {
        const Index rows = fold.end - fold.begin;
        if (rows == 0) continue;
        const auto n_train = static_cast<double>(n - rows);
        const auto Xh = X.middleRows(fold.begin, rows);
        const auto yh = y.segment(fold.begin, rows);

        Matrix gram;
        Vector cross;
        Matrix Xt;
        Vector yt;
        if (gaussian) {
            gram = full_gram - Xh.transpose() * Xh;
            cross = full_cross - Xh.transpose() * yh;
        } else {
            Xt = drop_rows(X, fold);
            yt = drop_rows(y, fold);
        }

        Vector beta = Vector::Zero(X.cols());
        for (std::size_t i = 0; i < out.grid.size(); ++i) {
            const double raw = out.grid[i] * n_train;
            if (gaussian) {
                beta = lasso::solve(gram, cross, raw, beta).beta;
            } else {
                beta = glm::fit(Xt, yt, Vector::Ones(Xt.rows()), family, raw, beta).beta;
            }
            const Vector eta = Xh * beta;
            double loss = 0.0;
            for (Index r = 0; r < rows; ++r) loss += family.nll_eta(yh[r], eta[r]);
            out.cv_loss[i] += loss;
        }
    }
    for (double& l : out.cv_loss) l /= static_cast<double>(n);

    out.best_index = static_cast<std::size_t>(
        std::min_element(out.cv_loss.begin(), out.cv_loss.end()) - out.cv_loss.begin());
    out.lambda = out.grid[out.best_index];
    return out;
}

double StepwiseLambda::at(std::size_t t) const {
    if (starts.empty()) throw std::logic_error("StepwiseLambda::at: no segments");
    const auto it = std::upper_bound(starts.begin(), starts.end(), t);
    const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - starts.begin() - 1));
    return lambdas[k];
}

StepwiseLambda stepwise_cv_lambda(const Matrix& X, const Vector& y, const Family& family,
                                  const std::vector<std::size_t>& changepoints,
                                  const CvOptions& options) {
    StepwiseLambda out;
    out.starts.push_back(0);
    for (std::size_t c : changepoints) {
        if (c <= out.starts.back() || c >= static_cast<std::size_t>(X.rows())) {
            throw std::invalid_argument("stepwise_cv_lambda: changepoints must be increasing and inside the data");
        }
        out.starts.push_back(c);
    }
    for (std::size_t k = 0; k < out.starts.size(); ++k) {
        const auto begin = static_cast<Index>(out.starts[k]);
        const Index end = k + 1 < out.starts.size() ? static_cast<Index>(out.starts[k + 1]) : X.rows();
        if (end - begin < options.folds) {
            throw std::invalid_argument("stepwise_cv_lambda: segment " + std::to_string(k) + " has " +
                                        std::to_string(end - begin) + " rows, fewer than " +
                                        std::to_string(options.folds) + " folds");
        }
        out.lambdas.push_back(
            kfold_cv_lambda(X.middleRows(begin, end - begin), y.segment(begin, end - begin), family,
                            options)
                .lambda);
    }
    return out;
}

double f_score(std::vector<Index> estimated, std::vector<Index> truth) {
    std::sort(estimated.begin(), estimated.end());
    std::sort(truth.begin(), truth.end());
    estimated.erase(std::unique(estimated.begin(), estimated.end()), estimated.end());
    truth.erase(std::unique(truth.begin(), truth.end()), truth.end());
    if (estimated.empty() && truth.empty()) return 1.0;
    std::vector<Index> common;
    std::set_intersection(estimated.begin(), estimated.end(), truth.begin(), truth.end(),
                          std::back_inserter(common));
    const double tp = static_cast<double>(common.size());
    const double precision = estimated.empty() ? 0.0 : tp / static_cast<double>(estimated.size());
    const double recall = truth.empty() ? 0.0 : tp / static_cast<double>(truth.size());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

double delta_l1(const Vector& beta_cv, const Vector& beta_rap) {
    if (beta_cv.size() != beta_rap.size()) throw std::invalid_argument("delta_l1: dimension mismatch");
    return beta_cv.lpNorm<1>() - beta_rap.lpNorm<1>();
}

Moments mean_se(const std::vector<double>& values) {
    Moments out;
    out.n = values.size();
    if (values.empty()) return out;
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(out.n);
    if (out.n >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.se = std::sqrt(ss / static_cast<double>(out.n - 1) / static_cast<double>(out.n));
    }
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

ExperimentConfig preset_config(std::string_view name) {
    ExperimentConfig c;
    const auto dash = name.find('-');
    if (dash == std::string_view::npos) {
        throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
    }
    const auto kind = name.substr(0, dash);
    const auto fam = name.substr(dash + 1);
    if (fam != "gaussian" && fam != "binomial") {
        throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
    }
    c.family = parse_family(fam).kind();
    if (kind == "stationary") {
        c.preset = Preset::stationary;
        c.dims = {10, 50, 100};
        c.n = 300;
        c.forgetting = 1.0;
        c.normalize_penalty = true;
        c.epsilon = 0.001;
    } else if (kind == "nonstationary") {
        c.preset = Preset::nonstationary;
        c.dims = {20};
        c.forgetting = 0.95;
    } else {
        throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
    }
    return c;
}

namespace {

std::uint64_t replication_seed(std::uint64_t base, Index p, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                      static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(index)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

// Streams the samples through one learner. `schedule` (if set) fixes the
// penalty before every step.
ArmRun run_arm(std::string_view name, const std::vector<sim::StreamSample>& stream,
               const Family& family, RapOptions options, const StepwiseLambda* schedule) {
    ArmRun arm;
    arm.arm = std::string(name);
    RapLearner learner(stream.front().x.size(), family, options);
    double loss = 0.0;
    double f = 0.0;
    std::size_t counted = 0;
    arm.trace.reserve(stream.size());
    for (std::size_t t = 0; t < stream.size(); ++t) {
        const auto& s = stream[t];
        if (schedule) learner.set_lambda(schedule->at(t));
        TraceRecord rec = learner.step(s.x, s.y);
        rec.regime_id = s.regime_id;
        rec.f_score = f_score(learner.fit().active_set, s.true_support);
        if (t >= 1) {
            loss += rec.lookahead_loss;
            f += *rec.f_score;
            ++counted;
        }
        arm.trace.push_back(rec);
    }
    arm.mean_loss = counted ? loss / static_cast<double>(counted) : 0.0;
    arm.mean_f = counted ? f / static_cast<double>(counted) : 0.0;
    return arm;
}

} // namespace

Replication run_replication(const ExperimentConfig& config, Index p, std::size_t index) {
    Replication rep;
    rep.index = index;
    rep.p = p;
    rep.seed = replication_seed(config.seed, p, index);
    sim::Rng rng(rep.seed);
    const Family family(config.family);

    std::vector<sim::StreamSample> stream;
    if (config.preset == Preset::nonstationary) {
        stream = sim::make_piecewise_stream(sim::table1_specs(config.family), rng);
    } else {
        sim::RegimeSpec spec;
        spec.p = p;
        spec.rho = config.rho;
        spec.duration = config.n;
        spec.family = config.family;
        stream = sim::sample_regime(spec, rng).samples;
    }
    std::uniform_real_distribution<double> unif(config.lambda0_low, config.lambda0_high);
    const double lambda0 = unif(rng);

    Matrix X(static_cast<Index>(stream.size()), stream.front().x.size());
    Vector y(X.rows());
    for (Index i = 0; i < X.rows(); ++i) {
        X.row(i) = stream[static_cast<std::size_t>(i)].x.transpose();
        y[i] = stream[static_cast<std::size_t>(i)].y;
    }

    RapOptions base;
    base.forgetting = config.forgetting;
    base.epsilon = config.epsilon;
    base.lambda0 = lambda0;
    base.warmup = config.warmup.value_or(static_cast<std::size_t>(p));
    base.normalize_penalty = config.normalize_penalty;

    RapOptions approx = base;
    approx.mode = GradientMode::approximate;

    const CvResult cv = kfold_cv_lambda(X, y, family, config.cv);
    StepwiseLambda fixed;
    fixed.starts = {0};
    fixed.lambdas = {cv.lambda};
    RapOptions still = base;
    still.epsilon = 0.0;
    still.lambda0 = cv.lambda;
    still.normalize_penalty = true;

    rep.arms.push_back(run_arm(kArmRap, stream, family, base, nullptr));
    rep.arms.push_back(run_arm(kArmRapApprox, stream, family, approx, nullptr));
    rep.arms.push_back(run_arm(kArmFixedCv, stream, family, still, &fixed));
    if (config.preset == Preset::nonstationary) {
        const StepwiseLambda steps =
            stepwise_cv_lambda(X, y, family, sim::changepoints(stream), config.cv);
        rep.arms.push_back(run_arm(kArmStepwise, stream, family, still, &steps));
    } else {
        const LassoFit cv_fit = fit_uniform(X, y, family, cv.lambda);
        RapLearner learner(p, family, base);
        for (const auto& s : stream) learner.step(s.x, s.y);
        rep.lambda_cv = cv.lambda;
        rep.lambda_rap = learner.lambda();
        rep.l1_cv = cv_fit.beta.lpNorm<1>();
        rep.l1_rap = learner.fit().beta.lpNorm<1>();
        rep.delta = delta_l1(cv_fit.beta, learner.fit().beta);
    }
    if (!config.keep_traces) {
        for (auto& arm : rep.arms) arm.trace.clear();
    }
    return rep;
}

Summary summarize(const ExperimentConfig& config, const std::vector<Replication>& reps) {
    Summary out;
    std::vector<std::string> arm_names;
    for (const auto& rep : reps) {
        if (!rep.ok) {
            ++out.failed;
            continue;
        }
        ++out.completed;
        for (const auto& arm : rep.arms) {
            if (std::find(arm_names.begin(), arm_names.end(), arm.arm) == arm_names.end()) {
                arm_names.push_back(arm.arm);
            }
        }
    }
    for (const auto& name : arm_names) {
        std::vector<double> losses;
        std::vector<double> fs;
        for (const auto& rep : reps) {
            if (!rep.ok) continue;
            for (const auto& arm : rep.arms) {
                if (arm.arm == name) {
                    losses.push_back(arm.mean_loss);
                    fs.push_back(arm.mean_f);
                }
            }
        }
        out.arms.push_back({name, mean_se(losses), mean_se(fs)});
    }
    if (config.preset == Preset::stationary) {
        for (Index p : config.dims) {
            std::vector<double> deltas;
            std::vector<double> abs_deltas;
            std::vector<double> l1_cv;
            for (const auto& rep : reps) {
                if (!rep.ok || rep.p != p) continue;
                deltas.push_back(rep.delta);
                abs_deltas.push_back(std::abs(rep.delta));
                l1_cv.push_back(rep.l1_cv);
            }
            out.deltas.push_back({p, mean_se(deltas), median(abs_deltas), median(l1_cv)});
        }
    }
    return out;
}

BenchResult run_replications(const ExperimentConfig& config, std::size_t n_reps) {
    if (config.dims.empty()) throw std::invalid_argument("run_replications: no dimensions configured");
    struct Job {
        Index p;
        std::size_t index;
    };
    std::vector<Job> jobs;
    for (Index p : config.dims) {
        for (std::size_t i = 0; i < n_reps; ++i) jobs.push_back({p, i});
    }

    BenchResult result;
    result.config = config;
    result.replications.resize(jobs.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            try {
                result.replications[j] = run_replication(config, jobs[j].p, jobs[j].index);
            } catch (const std::exception& e) {
                Replication failed;
                failed.index = jobs[j].index;
                failed.p = jobs[j].p;
                failed.ok = false;
                failed.error = e.what();
                result.replications[j] = std::move(failed);
            }
        }
    };
    unsigned threads = config.threads ? config.threads : std::thread::hardware_concurrency();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    }
    result.summary = summarize(config, result.replications);
    return result;
}

double contraction_step_bound(const RapLearner& learner, const Eigen::Ref<const Vector>& x_new) {
    const Matrix H = learner.moments().gram() / learner.penalty_scale();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(H, Eigen::EigenvaluesOnly);
    const double lo = std::max(0.0, eig.eigenvalues().minCoeff());
    const double norm2 = x_new.squaredNorm();
    if (!(norm2 > 0.0)) return std::numeric_limits<double>::infinity();
    return lo * lo / (static_cast<double>(learner.dim()) * norm2);
}

namespace {

bool same_piece(const LassoFit& a, const LassoFit& b) {
    if (a.active_set != b.active_set) return false;
    for (Index j : a.active_set) {
        if ((a.beta[j] > 0.0) != (b.beta[j] > 0.0)) return false;
    }
    return true;
}

} // namespace

ContractionReport contraction_probe(const RapLearner& learner, const Eigen::Ref<const Vector>& x_new,
                                    double y_new, double epsilon, std::size_t n_pairs,
                                    sim::Rng& rng, std::size_t n_orbits, std::size_t orbit_length) {
    ContractionReport report;
    const double top = learner.lambda_max();
    std::uniform_real_distribution<double> unif(0.0, top);
    std::uniform_real_distribution<double> nudge(-0.05 * top, 0.05 * top);

    for (std::size_t k = 0; k < n_pairs; ++k) {
        const double a = unif(rng);
        const double b = std::clamp(a + nudge(rng), 0.0, top);
        if (a == b) continue;
        ++report.pairs_sampled;
        const LassoFit fa = learner.refit(a);
        const LassoFit fb = learner.refit(b);
        if (!same_piece(fa, fb)) continue;
        if (fa.active_set.empty()) {
            ++report.empty_set_pairs;
            continue;
        }
        ++report.same_set_pairs;
        const double ratio = std::abs(learner.map(a, x_new, y_new, epsilon) -
                                      learner.map(b, x_new, y_new, epsilon)) /
                             std::abs(a - b);
        report.max_ratio = std::max(report.max_ratio, ratio);
        if (ratio < 1.0) ++report.contracting_pairs;
    }

    const double tol = 1e-12 * std::max(1.0, top);
    for (std::size_t o = 0; o < n_orbits; ++o) {
        ++report.orbits;
        std::vector<double> orbit{unif(rng)};
        bool bounded = true;
        for (std::size_t k = 0; k < orbit_length; ++k) {
            const double next = learner.map(orbit.back(), x_new, y_new, epsilon);
            if (!(next >= 0.0 && next <= top)) bounded = false;
            orbit.push_back(next);
        }
        if (bounded) ++report.bounded_orbits;
        const std::size_t n = orbit.size();
        if (n < 4) continue;
        const double last = orbit[n - 1] - orbit[n - 2];
        if (std::abs(last) <= tol) {
            ++report.fixed_points;
        } else if (std::abs(orbit[n - 1] - orbit[n - 3]) <= 1e3 * tol) {
            ++report.two_cycles;
        } else {
            // Alternating differences whose size keeps growing.
            const double prev = orbit[n - 2] - orbit[n - 3];
            if (last * prev < 0.0 && std::abs(last) > std::abs(prev) * (1.0 + 1e-9)) {
                ++report.expanding_cycles;
            }
        }
    }
    return report;
}

} // namespace rap::bench
