#include "rap/streaming_stats.hpp"

#include <cmath>
#include <string>

namespace rap {

WeightedMoments::WeightedMoments(Index p, double r) : p_(p), r_(r) {
    if (p < 1) {
        throw std::invalid_argument("WeightedMoments: dimension must be >= 1, got " +
                                    std::to_string(p));
    }
    if (!(r > 0.0 && r <= 1.0)) {
        throw std::invalid_argument("WeightedMoments: forgetting factor must lie in (0, 1], got " +
                                    std::to_string(r));
    }
    mean_ = Vector::Zero(p);
    gram_ = Matrix::Zero(p, p);
    cross_ = Vector::Zero(p);
}

void WeightedMoments::update(const Eigen::Ref<const Vector>& x, double y) {
    if (x.size() != p_) {
        throw std::invalid_argument("WeightedMoments::update: expected " + std::to_string(p_) +
                                    " predictors, got " + std::to_string(x.size()));
    }
    if (!x.allFinite() || !std::isfinite(y)) {
        throw DataError("WeightedMoments::update: non-finite observation");
    }
    omega_ = r_ * omega_ + 1.0;
    const double step = 1.0 / omega_;
    mean_ = (1.0 - step) * mean_ + step * x;
    // Only the lower triangle is accumulated; mirror afterwards so the
    // matrix stays exactly symmetric.
    gram_ *= r_;
    gram_.selfadjointView<Eigen::Lower>().rankUpdate(x);
    gram_.triangularView<Eigen::StrictlyUpper>() = gram_.transpose();
    cross_ = r_ * cross_ + y * x;
    ++t_;
}

double WeightedMoments::effective_weight(std::size_t i) const {
    if (i < 1 || i > t_) {
        throw std::out_of_range("WeightedMoments::effective_weight: index " + std::to_string(i) +
                                " outside [1, " + std::to_string(t_) + "]");
    }
    return std::pow(r_, static_cast<double>(t_ - i));
}

} // namespace rap
