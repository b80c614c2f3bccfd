#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace rap {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Raised for malformed or non-finite observations, as opposed to bad
/// configuration (which raises std::invalid_argument).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Eigen::Ref<const Vector>& v) {
    return v.allFinite();
}

} // namespace rap
