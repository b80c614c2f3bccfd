#pragma once

#include "rap/glm.hpp"
#include "rap/lasso_cd.hpp"
#include "rap/streaming_stats.hpp"
#include "rap/types.hpp"

#include <cstddef>
#include <optional>
#include <string_view>

namespace rap {

enum class GradientMode { exact, approximate };

/// Accepts "exact", "approx" or "approximate".
GradientMode parse_mode(std::string_view name);
std::string_view mode_name(GradientMode mode);

struct RapState {
    double lambda = 0.0;
    double epsilon = 0.025;
    GradientMode mode = GradientMode::exact;
    double jitter = 1e-6;  // ridge, relative to mean(diag) of the active block
};

/**
 * Derivative of the lasso solution with respect to the penalty, supported on
 * the active set. Exact mode solves -(H_AA + delta I)^{-1} sign(beta_A);
 * approximate mode uses -diag(H)^{-1} sign(beta). `curvature` is the Hessian
 * of the smooth part of the objective (the weighted Gram for gaussian data).
 * Returns zeros when the active set is empty.
 */
Vector dbeta_dlambda(const Matrix& curvature, const LassoFit& fit, GradientMode mode,
                     double jitter = 1e-6);
Vector dbeta_dlambda(const WeightedMoments& m, const LassoFit& fit, GradientMode mode,
                     double jitter = 1e-6);

/// Chain rule: grad_beta nll(x_new, y_new, beta) . dbeta.
double dcost_dlambda(const Family& family, const Eigen::Ref<const Vector>& x_new, double y_new,
                     const LassoFit& fit, const Vector& dbeta);

struct FallbackDirection {
    std::optional<Index> index;  // empty when the score is identically zero
    Vector direction;
};

/// Surrogate derivative for an empty active set: a single entry
/// -sign(score_j) / H_jj at the most correlated predictor j (smallest index
/// wins ties). This is where the first LARS step would enter.
FallbackDirection fallback_direction(const Vector& score, const Matrix& curvature);
FallbackDirection fallback_direction(const WeightedMoments& m);

/// lambda <- clamp(lambda - epsilon * grad, 0, lam_max).
RapState update_lambda(RapState state, double grad, double lam_max);

/// Per-step output of the adaptive filter.
struct TraceRecord {
    std::size_t t = 0;            // 1-based index of the observation just consumed
    double lambda = 0.0;          // penalty after the update, used by the refit
    double lookahead_loss = 0.0;  // loss of the observation under the previous fit
    std::size_t active_size = 0;  // support size of the refit
    std::optional<double> f_score;
    int regime_id = 0;
    bool used_fallback = false;
    bool refit_failed = false;
};

struct RapOptions {
    double forgetting = 0.95;
    double epsilon = 0.025;
    double lambda0 = 0.1;
    GradientMode mode = GradientMode::exact;
    double jitter = 1e-6;
    // Measure lambda per unit of total observation weight, i.e. penalize
    // (1/omega) sum_i w_i loss_i + lambda |beta|_1. The default keeps lambda on
    // the raw weighted-sum scale, where lambda_max = max_j |cross_j|.
    bool normalize_penalty = false;
    // Observations absorbed before lambda starts adapting.
    std::size_t warmup = 0;
    double buffer_min_weight = 1e-4;
    lasso::CdOptions cd{};
    glm::IrlsOptions irls{};
};

/**
 * Streaming l1-penalized regression whose penalty is learned online by
 * stochastic gradient descent on the look-ahead loss.
 *
 * Each step: score the new observation under the current fit, differentiate
 * that loss with respect to lambda through the solution path, take a clamped
 * gradient step on lambda, absorb the observation, refit with a warm start.
 */
class RapLearner {
public:
    RapLearner(Index p, Family family, RapOptions options);

    /// One filter step. With epsilon == 0 the penalty is left untouched
    /// (G is the identity), which gives a fixed-penalty streaming lasso.
    TraceRecord step(const Eigen::Ref<const Vector>& x, double y);

    /// Overrides the penalty used by the next refit (fixed or scheduled arms).
    void set_lambda(double lambda);

    Index dim() const { return moments_.dim(); }
    std::size_t count() const { return moments_.count(); }
    const Family& family() const { return family_; }
    const RapState& state() const { return state_; }
    double lambda() const { return state_.lambda; }
    const LassoFit& fit() const { return fit_; }
    const WeightedMoments& moments() const { return moments_; }
    const RapOptions& options() const { return options_; }

    /// omega (gaussian) or retained weight (binomial) when normalizing, else 1.
    double penalty_scale() const;
    /// Upper clamp for lambda on the current data, in lambda units.
    double lambda_max() const;

    /// Refit at `lambda` on the current data without changing the learner.
    LassoFit refit(double lambda) const;

    /// d C(x, y) / d lambda at `lambda` on the current data. Sets
    /// `used_fallback` when the active set at that lambda is empty.
    double lookahead_gradient(double lambda, const Eigen::Ref<const Vector>& x, double y,
                              bool* used_fallback = nullptr) const;

    /// The update map G(lambda) for a fixed held-out pair and step size.
    double map(double lambda, const Eigen::Ref<const Vector>& x, double y, double epsilon) const;

private:
    double gradient_for(const LassoFit& fit, const Eigen::Ref<const Vector>& x, double y,
                        bool* used_fallback) const;
    Matrix curvature(const Vector& beta) const;
    Vector score_at_zero() const;
    LassoFit solve_at(double lambda, const Vector& start) const;

    Family family_;
    RapOptions options_;
    RapState state_;
    WeightedMoments moments_;
    std::optional<ObsBuffer> buffer_;
    LassoFit fit_;
};

} // namespace rap
