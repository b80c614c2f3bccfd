#pragma once

#include "rap/streaming_stats.hpp"
#include "rap/types.hpp"

#include <random>
#include <vector>

namespace rap::fixtures {

struct Sample {
    Matrix X;
    Vector y;
};

// Correlated gaussian design with a sparse linear signal.
inline Sample random_problem(std::mt19937_64& rng, Index n, Index p, double noise = 1.0,
                             double signal_fraction = 0.5) {
    std::normal_distribution<double> z;
    Matrix L = Matrix::Identity(p, p);
    for (Index i = 1; i < p; ++i) L(i, i - 1) = 0.5;
    Sample s{Matrix(n, p), Vector(n)};
    for (Index i = 0; i < n; ++i) {
        Vector g(p);
        for (Index j = 0; j < p; ++j) g[j] = z(rng);
        s.X.row(i) = (L * g).transpose();
    }
    Vector beta = Vector::Zero(p);
    for (Index j = 0; j < p; ++j) {
        if (j < static_cast<Index>(signal_fraction * static_cast<double>(p) + 0.5)) beta[j] = 2.0 * z(rng);
    }
    for (Index i = 0; i < n; ++i) s.y[i] = s.X.row(i).dot(beta) + noise * z(rng);
    return s;
}

inline WeightedMoments stream(const Sample& s, double r) {
    WeightedMoments m(s.X.cols(), r);
    for (Index i = 0; i < s.X.rows(); ++i) m.update(s.X.row(i).transpose(), s.y[i]);
    return m;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max(1e-12, std::max(std::abs(a), std::abs(b)));
}

} // namespace rap::fixtures
