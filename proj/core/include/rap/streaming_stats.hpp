#pragma once

#include "rap/types.hpp"

#include <cstddef>

namespace rap {

/**
 * Exponentially weighted sufficient statistics of a stream of (x, y)
 * pairs under a fixed forgetting factor r.
 *
 * Observation i (1-based) carries weight r^(t-i) after t updates. The Gram
 * matrix and cross-moment are kept unnormalized:
 *
 *     gram  = sum_i r^(t-i) x_i x_i^T
 *     cross = sum_i r^(t-i) y_i x_i
 *     omega = sum_i r^(t-i)
 *
 * so that dividing by omega() recovers the per-observation scale. The
 * weighted mean is maintained only for diagnostics; fitting uses the
 * uncentered Gram.
 */
class WeightedMoments {
public:
    WeightedMoments(Index p, double r);

    /// Folds one observation into the statistics. Throws DataError on
    /// non-finite input and std::invalid_argument on a dimension mismatch.
    void update(const Eigen::Ref<const Vector>& x, double y);

    /// Weight r^(t-i) of past observation i, with 1 <= i <= count().
    double effective_weight(std::size_t i) const;

    Index dim() const { return p_; }
    double forgetting() const { return r_; }
    double omega() const { return omega_; }
    std::size_t count() const { return t_; }
    const Vector& mean() const { return mean_; }
    const Matrix& gram() const { return gram_; }
    const Vector& cross() const { return cross_; }

private:
    Index p_;
    double r_;
    double omega_ = 0.0;
    std::size_t t_ = 0;
    Vector mean_;
    Matrix gram_;
    Vector cross_;
};

} // namespace rap
