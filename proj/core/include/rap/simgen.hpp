#pragma once

#include "rap/glm.hpp"
#include "rap/types.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace rap::sim {

using Rng = std::mt19937_64;

/// One piecewise-stationary regime of a synthetic stream.
struct RegimeSpec {
    Index p = 10;
    double rho = 0.5;         // fraction of nonzero coefficients
    int n_blocks = 5;
    double block_corr = 0.8;  // within-block correlation
    std::size_t duration = 100;
    FamilyKind family = FamilyKind::gaussian;
    std::uint64_t seed = 0;   // used only by the single-regime convenience overload
};

struct StreamSample {
    Vector x;
    double y = 0.0;
    Vector true_beta;
    std::vector<Index> true_support;
    int regime_id = 0;
};

struct Regime {
    Vector true_beta;
    std::vector<Index> permutation;  // coordinate label of each covariance row
    std::vector<StreamSample> samples;
};

void validate(const RegimeSpec& spec);

/// Sizes of the diagonal blocks: equal when n_blocks divides p, otherwise
/// the first p % n_blocks blocks get one extra coordinate. At most p blocks.
std::vector<Index> block_sizes(Index p, int n_blocks);

/// Block-diagonal correlation matrix: ones on the diagonal, `block_corr`
/// within blocks, zero across blocks.
Matrix make_covariance(Index p, int n_blocks, double block_corr);

/// Draws coefficients (round(rho p) standard normal entries at random
/// positions), a random coordinate-to-block permutation, then `duration`
/// samples x ~ N(0, Sigma) with gaussian (unit noise) or Bernoulli responses.
Regime sample_regime(const RegimeSpec& spec, Rng& rng, int regime_id = 0);
Regime sample_regime(const RegimeSpec& spec);

/// Concatenates independently drawn regimes; regime_id counts from 0.
std::vector<StreamSample> make_piecewise_stream(const std::vector<RegimeSpec>& specs, Rng& rng);

/// Dense / sparse / dense regimes of 100 observations each with p = 20.
std::vector<RegimeSpec> table1_specs(FamilyKind family);

/// Indices where regime_id changes (first index of each new regime).
std::vector<std::size_t> changepoints(const std::vector<StreamSample>& stream);

} // namespace rap::sim
