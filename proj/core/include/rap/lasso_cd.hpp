#pragma once

#include "rap/streaming_stats.hpp"
#include "rap/types.hpp"

#include <vector>

namespace rap {

/// Solution of a weighted lasso problem at a single penalty value.
struct LassoFit {
    Vector beta;
    double lambda = 0.0;
    std::vector<Index> active_set;  // ascending indices of nonzero beta
    int iterations = 0;             // coordinate sweeps (or IRLS rounds for GLMs)
    bool converged = false;
    bool capped = false;            // a coefficient hit the magnitude cap (GLM only)
};

namespace lasso {

struct CdOptions {
    double tol = 1e-8;     // max absolute coordinate change per sweep
    int max_sweeps = 1000;
    // Re-solve the active block directly once CD has identified the signs,
    // which takes the fit to machine precision along the piecewise-linear path.
    bool polish = true;
};

double soft_threshold(double z, double gamma);

/// Smallest penalty whose solution is identically zero: max_j |cross_j|.
double lambda_max(const WeightedMoments& m);
double lambda_max(const Eigen::Ref<const Vector>& score);

/**
 * Minimizes 0.5 * b^T A b - b^T beta + lambda * |beta|_1 by cyclic coordinate
 * descent, where A is a PSD Gram matrix and b the matching cross-moment.
 * Up to an additive constant this equals
 * 0.5 * sum_i w_i (y_i - x_i^T beta)^2 + lambda * |beta|_1.
 *
 * Coordinates with A_jj == 0 are held at zero.
 */
LassoFit solve(const Matrix& gram, const Vector& cross, double lambda, const Vector& start,
               const CdOptions& options = {});

LassoFit fit(const WeightedMoments& m, double lambda, const CdOptions& options = {});
LassoFit fit(const WeightedMoments& m, double lambda, const LassoFit& warm,
             const CdOptions& options = {});

double objective(const Matrix& gram, const Vector& cross, const Vector& beta, double lambda);

/// Largest violation of the lasso optimality conditions at beta: on the
/// support |(A beta - b)_j + lambda sign(beta_j)| / max(1, lambda), off it
/// max(0, |(A beta - b)_j| - lambda).
double kkt_violation(const Matrix& gram, const Vector& cross, const Vector& beta, double lambda);
/// Same check given the gradient of the smooth part of the objective at beta.
double kkt_violation(const Vector& smooth_gradient, const Vector& beta, double lambda);

std::vector<Index> support(const Vector& beta);

} // namespace lasso
} // namespace rap
