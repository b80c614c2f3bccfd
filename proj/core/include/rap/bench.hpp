#pragma once

#include "rap/glm.hpp"
#include "rap/rap.hpp"
#include "rap/simgen.hpp"
#include "rap/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rap::bench {

// ---------------------------------------------------------------------------
// Offline penalty selection

struct CvOptions {
    int folds = 10;
    int grid_size = 50;
    double min_ratio = 1e-3;  // smallest grid value as a fraction of lambda_max
};

/// Penalties are per observation: the training objective is
/// (1/n) sum_i loss_i + lambda |beta|_1 with uniform weights.
struct CvResult {
    double lambda = 0.0;
    std::size_t best_index = 0;
    std::vector<double> grid;     // descending
    std::vector<double> cv_loss;  // mean held-out nll per grid value
    bool degenerate = false;      // response has no variation
};

/// K-fold cross-validation over a log-spaced grid from lambda_max down to
/// min_ratio * lambda_max. Folds are contiguous chronological blocks.
CvResult kfold_cv_lambda(const Matrix& X, const Vector& y, const Family& family,
                         const CvOptions& options = {});

/// Per-observation penalized fit with uniform weights on all rows.
LassoFit fit_uniform(const Matrix& X, const Vector& y, const Family& family, double lambda);

struct StepwiseLambda {
    std::vector<std::size_t> starts;  // first row of each segment
    std::vector<double> lambdas;

    /// Penalty in force at 0-based row t.
    double at(std::size_t t) const;
};

/// Cross-validates each segment separately. `changepoints` are the first
/// rows of segments 2..k; every segment needs at least `folds` rows.
StepwiseLambda stepwise_cv_lambda(const Matrix& X, const Vector& y, const Family& family,
                                  const std::vector<std::size_t>& changepoints,
                                  const CvOptions& options = {});

// ---------------------------------------------------------------------------
// Metrics

/// Harmonic mean of precision and recall of an estimated support. Both empty
/// scores 1; a zero precision + recall scores 0.
double f_score(std::vector<Index> estimated, std::vector<Index> truth);

/// |beta_cv|_1 - |beta_rap|_1.
double delta_l1(const Vector& beta_cv, const Vector& beta_rap);

struct Moments {
    double mean = 0.0;
    std::optional<double> se;  // empty with fewer than two values
    std::size_t n = 0;
};
Moments mean_se(const std::vector<double>& values);
double median(std::vector<double> values);

// ---------------------------------------------------------------------------
// Replication harness

enum class Preset { stationary, nonstationary };

struct ExperimentConfig {
    Preset preset = Preset::nonstationary;
    FamilyKind family = FamilyKind::gaussian;
    std::vector<Index> dims{20};  // stationary runs one block of replications per entry
    std::size_t n = 300;          // stationary stream length
    double rho = 0.2;             // stationary sparsity
    double forgetting = 0.95;
    double epsilon = 0.025;
    double lambda0_low = 0.0;     // lambda0 ~ U[low, high]
    double lambda0_high = 1.0;
    std::optional<std::size_t> warmup;  // unset: p observations
    bool normalize_penalty = false;      // RAP arms only
    CvOptions cv{};
    std::uint64_t seed = 1;
    bool keep_traces = true;
    unsigned threads = 0;         // 0: hardware concurrency
};

/// Names: stationary-gaussian, stationary-binomial, nonstationary-gaussian,
/// nonstationary-binomial. Throws std::invalid_argument on anything else.
ExperimentConfig preset_config(std::string_view name);

inline constexpr std::string_view kArmRap = "RAP";
inline constexpr std::string_view kArmRapApprox = "RAP-approx";
inline constexpr std::string_view kArmFixedCv = "fixed-CV";
inline constexpr std::string_view kArmStepwise = "stepwise";

struct ArmRun {
    std::string arm;
    double mean_loss = 0.0;  // over steps t >= 2
    double mean_f = 0.0;
    std::vector<TraceRecord> trace;
};

struct Replication {
    std::size_t index = 0;
    Index p = 0;
    std::uint64_t seed = 0;
    bool ok = true;
    std::string error;
    std::vector<ArmRun> arms;
    // Stationary preset only.
    double lambda_cv = 0.0;
    double lambda_rap = 0.0;
    double l1_cv = 0.0;
    double l1_rap = 0.0;
    double delta = 0.0;
};

struct ArmSummary {
    std::string arm;
    Moments loss;
    Moments f;
};

struct DeltaSummary {
    Index p = 0;
    Moments delta;
    double median_abs_delta = 0.0;
    double median_l1_cv = 0.0;
};

struct Summary {
    std::vector<ArmSummary> arms;
    std::vector<DeltaSummary> deltas;  // stationary preset only
    std::size_t completed = 0;
    std::size_t failed = 0;
};

struct BenchResult {
    ExperimentConfig config;
    Summary summary;
    std::vector<Replication> replications;
};

/// Runs one replication (all arms on one seeded stream).
Replication run_replication(const ExperimentConfig& config, Index p, std::size_t index);

/// Runs n_reps replications per dimension concurrently and aggregates them in
/// index order, so the result does not depend on scheduling.
BenchResult run_replications(const ExperimentConfig& config, std::size_t n_reps);

Summary summarize(const ExperimentConfig& config, const std::vector<Replication>& reps);

// ---------------------------------------------------------------------------
// Contraction of the lambda update map

struct ContractionReport {
    std::size_t pairs_sampled = 0;
    std::size_t same_set_pairs = 0;    // identical nonempty active set and signs
    std::size_t contracting_pairs = 0; // |G(a) - G(b)| < |a - b|
    std::size_t empty_set_pairs = 0;
    double max_ratio = 0.0;            // over same-set pairs
    std::size_t orbits = 0;
    std::size_t bounded_orbits = 0;    // every iterate in [0, lambda_max]
    std::size_t fixed_points = 0;
    std::size_t two_cycles = 0;
    std::size_t expanding_cycles = 0;  // 2-cycles whose amplitude grows
};

/// Step size below which G contracts on every active-set piece of a gaussian
/// problem: lambda_min(H)^2 / (p |x|^2) with H the normalized Gram.
double contraction_step_bound(const RapLearner& learner, const Eigen::Ref<const Vector>& x_new);

ContractionReport contraction_probe(const RapLearner& learner, const Eigen::Ref<const Vector>& x_new,
                                    double y_new, double epsilon, std::size_t n_pairs,
                                    sim::Rng& rng, std::size_t n_orbits = 1,
                                    std::size_t orbit_length = 1000);

} // namespace rap::bench
