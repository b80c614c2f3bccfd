#pragma once

#include "rap/lasso_cd.hpp"
#include "rap/types.hpp"

#include <cstddef>
#include <deque>
#include <string_view>

namespace rap {

enum class FamilyKind { gaussian, binomial };

/**
 * Exponential family with canonical link and unit dispersion.
 *
 *   gaussian: identity link, V(mu) = 1,          b(theta) = theta^2 / 2
 *   binomial: logit link,    V(mu) = mu (1 - mu), b(theta) = log(1 + e^theta)
 */
class Family {
public:
    explicit Family(FamilyKind kind) : kind_(kind) {}
    static Family gaussian() { return Family(FamilyKind::gaussian); }
    static Family binomial() { return Family(FamilyKind::binomial); }

    FamilyKind kind() const { return kind_; }
    std::string_view name() const;

    double link(double mu) const;
    double inverse_link(double eta) const;
    double variance(double mu) const;
    double dmu_deta(double eta) const;
    double cumulant(double theta) const;

    /// IRLS weight (dmu/deta)^2 / V(mu) at linear predictor eta.
    double working_weight(double eta) const;

    /// Throws DataError unless y is a valid response (binomial needs 0 or 1).
    void validate_response(double y) const;

    /// Per-observation term of the fitting objective, b(theta) - y theta.
    double objective_term(double y, double eta) const;

    /// Look-ahead loss of one observation: (y - x^T beta)^2 for gaussian,
    /// -y x^T beta + log(1 + e^{x^T beta}) for binomial.
    double nll(const Eigen::Ref<const Vector>& x, double y, const Eigen::Ref<const Vector>& beta) const;
    double nll_eta(double y, double eta) const;

    /// Gradient of nll with respect to beta.
    Vector nll_grad_beta(const Eigen::Ref<const Vector>& x, double y,
                         const Eigen::Ref<const Vector>& beta) const;

    bool operator==(const Family&) const = default;

private:
    FamilyKind kind_;
};

/// Parses "gaussian" or "binomial"; throws std::invalid_argument otherwise.
Family parse_family(std::string_view name);

/// log(1 + e^z) without overflow or cancellation.
double softplus(double z);

/**
 * Recent observations with geometric age weights r^age, dropping the oldest
 * entries once their weight falls below `min_weight`. Logistic likelihoods
 * have no finite sufficient statistics, so GLM refits run over this window.
 */
class ObsBuffer {
public:
    ObsBuffer(Index p, double r, double min_weight = 1e-4);

    void push(const Eigen::Ref<const Vector>& x, double y);

    Index dim() const { return p_; }
    double forgetting() const { return r_; }
    std::size_t size() const { return ys_.size(); }
    bool empty() const { return ys_.empty(); }
    /// Maximum retained length, ceil(log(min_weight) / log r); unbounded for r = 1.
    std::size_t capacity() const { return capacity_; }

    /// Rows ordered oldest to newest.
    Matrix design() const;
    Vector responses() const;
    Vector weights() const;

private:
    Index p_;
    double r_;
    std::size_t capacity_;
    std::deque<Vector> xs_;
    std::deque<double> ys_;
};

namespace glm {

struct IrlsOptions {
    double tol = 1e-6;       // max absolute coefficient change between outer rounds
    int max_outer = 50;
    double beta_cap = 1e6;
    lasso::CdOptions inner{};
};

/// Weighted objective sum_i w_i [b(theta_i) - y_i theta_i] + lambda |beta|_1.
double objective(const Matrix& X, const Vector& y, const Vector& w, const Family& family,
                 const Vector& beta, double lambda);

/// Score sum_i w_i (y_i - mu_i) (dmu/deta)/V x_i, the negative gradient of the
/// smooth part of the objective.
Vector score(const Matrix& X, const Vector& y, const Vector& w, const Family& family,
             const Vector& beta);

/// Fisher information X^T diag(w_i (dmu/deta)^2 / V_i) X at beta. For the
/// gaussian family this is the weighted Gram matrix.
Matrix curvature(const Matrix& X, const Vector& w, const Family& family, const Vector& beta);

/// max_j |score_j(0)|: the smallest penalty with an all-zero solution.
double lambda_max(const Matrix& X, const Vector& y, const Vector& w, const Family& family);

double kkt_violation(const Matrix& X, const Vector& y, const Vector& w, const Family& family,
                     const Vector& beta, double lambda);

/**
 * l1-penalized GLM by proximal Newton (IRLS): each round solves the weighted
 * lasso built from the local quadratic expansion by coordinate descent, then
 * backtracks until the objective decreases.
 */
LassoFit fit(const Matrix& X, const Vector& y, const Vector& w, const Family& family,
             double lambda, const Vector& start, const IrlsOptions& options = {});

/// Rebuilds streaming moments from the buffer (same weights as a live
/// WeightedMoments stream of the retained observations).
WeightedMoments replay_moments(const ObsBuffer& buffer);

LassoFit fit_penalized(const ObsBuffer& buffer, const Family& family, double lambda,
                       const IrlsOptions& options = {});
LassoFit fit_penalized(const ObsBuffer& buffer, const Family& family, double lambda,
                       const LassoFit& warm, const IrlsOptions& options = {});

} // namespace glm
} // namespace rap
