#pragma once

#include "csv.hpp"

#include "rap/glm.hpp"
#include "rap/rap.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rap::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LearnerFlags {
    std::string family = "gaussian";
    double r = 0.95;
    double epsilon = 0.025;
    double lambda0 = 0.1;
    std::string mode = "exact";
    std::size_t warmup = 0;
    bool normalized = false;

    RapOptions options() const;
};

struct SimulateOptions {
    Index p = 20;
    std::vector<double> rho{0.5};  // one regime per entry
    std::size_t duration = 100;
    int blocks = 5;
    double corr = 0.8;
    std::string family = "gaussian";
    std::uint64_t seed = 1;
    std::string preset;  // "" or "table1"
    bool truth = false;
};

/// CSV: t,regime,y,x1..xp[,b1..bp].
void simulate(const SimulateOptions& opts, std::ostream& out);

/// Runs RAP over a table with columns y, x1..xp and optionally t, regime and
/// b1..bp (true coefficients, enables the f_score column). Writes one trace
/// row per input row and a '#' footer with the mean look-ahead loss
/// (and mean F-score) over steps t >= 2.
void run_stream(const Table& table, const LearnerFlags& flags, std::ostream& out);

struct BenchOptions {
    std::string preset = "nonstationary";
    std::optional<std::string> family;
    std::size_t reps = 100;
    std::uint64_t seed = 1;
    std::optional<double> epsilon;
    std::optional<double> r;
    unsigned threads = 0;
    std::string out_dir;
};

/// Writes summary.csv and traces.csv (plus deltas.csv and delta_reps.csv for
/// the stationary preset) into out_dir.
void bench(const BenchOptions& opts, std::ostream& log);

struct NetworkOptions {
    LearnerFlags learner;
    std::size_t stride = 10;
    bool and_rule = false;
    unsigned threads = 0;
};

struct Edge {
    std::size_t t;
    Index i;  // 1-based node indices, i < j
    Index j;
    double weight;
};

struct NetworkResult {
    std::vector<std::string> nodes;
    std::vector<std::size_t> checkpoints;
    std::vector<Edge> edges;
    Matrix lambdas;  // rows: steps, cols: nodes
    std::vector<std::string> constant_columns;
};

/// Node-wise RAP regressions (each node on all the others). A column named
/// "t" is ignored. Edges are read off the fits every `stride` steps.
NetworkResult network(const Table& table, const NetworkOptions& opts);
void write_edges(const NetworkResult& result, std::ostream& out);
void write_lambdas(const NetworkResult& result, std::ostream& out);

/// Full command line (without argv[0]). Returns the process exit code.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace rap::cli
