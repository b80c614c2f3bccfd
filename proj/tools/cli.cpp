#include "cli.hpp"

#include "rap/bench.hpp"
#include "rap/simgen.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace rap::cli {

RapOptions LearnerFlags::options() const {
    if (!(r > 0.0 && r <= 1.0)) throw UsageError("--r must lie in (0, 1]");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw UsageError("--epsilon must be >= 0");
    if (!(lambda0 >= 0.0) || !std::isfinite(lambda0)) throw UsageError("--lambda0 must be >= 0");
    RapOptions o;
    o.forgetting = r;
    o.epsilon = epsilon;
    o.lambda0 = lambda0;
    o.mode = parse_mode(mode);
    o.warmup = warmup;
    o.normalize_penalty = normalized;
    return o;
}

namespace {

Family family_from(const std::string& name) {
    try {
        return parse_family(name);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

std::string join_row(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += cells[i];
    }
    line += '\n';
    return line;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    return out;
}

// Runs `body` writing either to `fallback` ("-") or to a file.
template <class F>
void with_output(const std::string& path, std::ostream& fallback, F&& body) {
    if (path == "-") {
        body(fallback);
        return;
    }
    auto out = open_output(path);
    body(out);
    out.flush();
    if (!out) throw DataError("write failed for '" + path + "'");
}

Table load_input(const std::string& path, std::istream* stdin_stream) {
    if (path == "-") return read_table(stdin_stream ? *stdin_stream : std::cin);
    return read_table_file(path);
}

} // namespace

// ---------------------------------------------------------------------------
// simulate

void simulate(const SimulateOptions& opts, std::ostream& out) {
    const Family family = family_from(opts.family);
    std::vector<sim::RegimeSpec> specs;
    if (opts.preset == "table1") {
        specs = sim::table1_specs(family.kind());
    } else if (!opts.preset.empty()) {
        throw UsageError("unknown simulate preset '" + opts.preset + "' (expected table1)");
    } else {
        if (opts.rho.empty()) throw UsageError("--rho needs at least one value");
        for (double rho : opts.rho) {
            sim::RegimeSpec s;
            s.p = opts.p;
            s.rho = rho;
            s.n_blocks = opts.blocks;
            s.block_corr = opts.corr;
            s.duration = opts.duration;
            s.family = family.kind();
            try {
                sim::validate(s);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            specs.push_back(s);
        }
    }
    sim::Rng rng(opts.seed);
    const auto stream = sim::make_piecewise_stream(specs, rng);
    const Index p = specs.front().p;

    std::vector<std::string> head{"t", "regime", "y"};
    for (Index j = 1; j <= p; ++j) head.push_back("x" + std::to_string(j));
    if (opts.truth) {
        for (Index j = 1; j <= p; ++j) head.push_back("b" + std::to_string(j));
    }
    out << join_row(head);
    std::vector<std::string> cells;
    for (std::size_t t = 0; t < stream.size(); ++t) {
        const auto& s = stream[t];
        cells.assign({std::to_string(t + 1), std::to_string(s.regime_id), format_double(s.y)});
        for (Index j = 0; j < p; ++j) cells.push_back(format_double(s.x[j]));
        if (opts.truth) {
            for (Index j = 0; j < p; ++j) cells.push_back(format_double(s.true_beta[j]));
        }
        out << join_row(cells);
    }
}

// ---------------------------------------------------------------------------
// run

namespace {

struct StreamColumns {
    int y = -1;
    std::vector<int> x;
    std::vector<int> b;
};

StreamColumns stream_schema(const Table& table) {
    StreamColumns cols;
    cols.y = table.column("y");
    if (cols.y < 0) throw DataError("schema: missing column 'y'");
    for (int j = 1;; ++j) {
        const int c = table.column("x" + std::to_string(j));
        if (c < 0) break;
        cols.x.push_back(c);
    }
    if (cols.x.empty()) throw DataError("schema: missing column 'x1'");
    for (int j = 1;; ++j) {
        const int c = table.column("b" + std::to_string(j));
        if (c < 0) break;
        cols.b.push_back(c);
    }
    if (!cols.b.empty() && cols.b.size() != cols.x.size()) {
        const auto missing = "b" + std::to_string(cols.b.size() + 1);
        throw DataError("schema: truth columns incomplete, missing column '" + missing + "'");
    }
    const std::size_t known = 1 + cols.x.size() + cols.b.size() + (table.column("t") >= 0) +
                              (table.column("regime") >= 0);
    if (known != table.header.size()) {
        for (const auto& name : table.header) {
            const bool listed = name == "t" || name == "regime" || name == "y";
            bool coef = false;
            for (int c : cols.x) coef = coef || table.header[static_cast<std::size_t>(c)] == name;
            for (int c : cols.b) coef = coef || table.header[static_cast<std::size_t>(c)] == name;
            if (!listed && !coef) throw DataError("schema: unexpected column '" + name + "'");
        }
    }
    return cols;
}

} // namespace

void run_stream(const Table& table, const LearnerFlags& flags, std::ostream& out) {
    const StreamColumns cols = stream_schema(table);
    const Family family = family_from(flags.family);
    const Index p = static_cast<Index>(cols.x.size());
    RapLearner learner(p, family, flags.options());
    const bool truth = !cols.b.empty();

    out << (truth ? "t,lambda,lookahead_loss,active_size,f_score\n"
                  : "t,lambda,lookahead_loss,active_size\n");
    Vector x(p);
    double loss_sum = 0.0;
    double f_sum = 0.0;
    std::size_t scored = 0;
    for (std::size_t row = 0; row < table.rows.size(); ++row) {
        const auto& values = table.rows[row];
        for (Index j = 0; j < p; ++j) x[j] = values[static_cast<std::size_t>(cols.x[static_cast<std::size_t>(j)])];
        const double y = values[static_cast<std::size_t>(cols.y)];
        TraceRecord rec;
        try {
            rec = learner.step(x, y);
        } catch (const DataError& e) {
            throw DataError("row " + std::to_string(row + 1) + ": " + e.what());
        }
        std::vector<std::string> cells{std::to_string(rec.t), format_double(rec.lambda),
                                       format_double(rec.lookahead_loss), std::to_string(rec.active_size)};
        if (truth) {
            std::vector<Index> support;
            for (Index j = 0; j < p; ++j) {
                if (values[static_cast<std::size_t>(cols.b[static_cast<std::size_t>(j)])] != 0.0) {
                    support.push_back(j);
                }
            }
            const double f = bench::f_score(learner.fit().active_set, support);
            cells.push_back(format_double(f));
            if (row > 0) f_sum += f;
        }
        if (row > 0) {
            loss_sum += rec.lookahead_loss;
            ++scored;
        }
        out << join_row(cells);
    }
    out << "# steps=" << table.rows.size() << '\n';
    if (scored > 0) {
        out << "# mean_lookahead_loss=" << format_double(loss_sum / static_cast<double>(scored)) << '\n';
        if (truth) out << "# mean_f_score=" << format_double(f_sum / static_cast<double>(scored)) << '\n';
    }
}

// ---------------------------------------------------------------------------
// bench

void bench(const BenchOptions& opts, std::ostream& log) {
    std::string name = opts.preset;
    if (name.find('-') == std::string::npos) name += "-" + opts.family.value_or("gaussian");
    else if (opts.family && name.substr(name.find('-') + 1) != *opts.family) {
        throw UsageError("--family conflicts with --preset " + opts.preset);
    }
    bench::ExperimentConfig config;
    try {
        config = bench::preset_config(name);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (opts.reps < 1) throw UsageError("--reps must be >= 1");
    if (opts.out_dir.empty()) throw UsageError("--out is required");
    config.seed = opts.seed;
    config.threads = opts.threads;
    if (opts.epsilon) config.epsilon = *opts.epsilon;
    if (opts.r) config.forgetting = *opts.r;

    const auto result = bench::run_replications(config, opts.reps);
    const std::filesystem::path dir(opts.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create '" + dir.string() + "': " + ec.message());

    const auto se = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string{}; };
    {
        auto out = open_output(dir / "summary.csv");
        out << "arm,mean_loss,se_loss,mean_f,se_f\n";
        for (const auto& a : result.summary.arms) {
            out << join_row({a.arm, format_double(a.loss.mean), se(a.loss.se), format_double(a.f.mean), se(a.f.se)});
        }
        out << "# preset=" << name << " reps=" << opts.reps << " completed=" << result.summary.completed
            << " failed=" << result.summary.failed << '\n';
    }
    {
        auto out = open_output(dir / "traces.csv");
        out << "rep,p,arm,t,regime,lambda,lookahead_loss,active_size,f_score\n";
        for (const auto& rep : result.replications) {
            if (!rep.ok) continue;
            for (const auto& arm : rep.arms) {
                for (const auto& rec : arm.trace) {
                    out << join_row({std::to_string(rep.index), std::to_string(rep.p), arm.arm,
                                     std::to_string(rec.t), std::to_string(rec.regime_id),
                                     format_double(rec.lambda), format_double(rec.lookahead_loss),
                                     std::to_string(rec.active_size),
                                     rec.f_score ? format_double(*rec.f_score) : std::string{}});
                }
            }
        }
    }
    if (config.preset == bench::Preset::stationary) {
        auto out = open_output(dir / "deltas.csv");
        out << "p,mean_delta,se_delta,median_abs_delta,median_l1_cv\n";
        for (const auto& d : result.summary.deltas) {
            out << join_row({std::to_string(d.p), format_double(d.delta.mean), se(d.delta.se),
                             format_double(d.median_abs_delta), format_double(d.median_l1_cv)});
        }
        auto reps = open_output(dir / "delta_reps.csv");
        reps << "rep,p,lambda_cv,lambda_rap,l1_cv,l1_rap,delta\n";
        for (const auto& rep : result.replications) {
            if (!rep.ok) continue;
            reps << join_row({std::to_string(rep.index), std::to_string(rep.p), format_double(rep.lambda_cv),
                              format_double(rep.lambda_rap), format_double(rep.l1_cv),
                              format_double(rep.l1_rap), format_double(rep.delta)});
        }
    }
    for (const auto& rep : result.replications) {
        if (!rep.ok) log << "replication " << rep.index << " (p=" << rep.p << ") failed: " << rep.error << '\n';
    }
}

// ---------------------------------------------------------------------------
// network

NetworkResult network(const Table& table, const NetworkOptions& opts) {
    std::vector<std::size_t> node_cols;
    NetworkResult result;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (table.header[c] == "t") continue;
        node_cols.push_back(c);
        result.nodes.push_back(table.header[c]);
    }
    const auto p = static_cast<Index>(node_cols.size());
    if (p < 3) throw DataError("network mode needs at least 3 node columns, got " + std::to_string(p));
    if (opts.stride < 1) throw UsageError("--stride must be >= 1");
    const Family family = family_from(opts.learner.family);
    if (family.kind() != FamilyKind::gaussian) throw UsageError("network mode supports --family gaussian only");
    const RapOptions options = opts.learner.options();

    const std::size_t n = table.rows.size();
    Matrix data(static_cast<Index>(n), p);
    for (std::size_t t = 0; t < n; ++t) {
        for (Index k = 0; k < p; ++k) data(static_cast<Index>(t), k) = table.rows[t][node_cols[static_cast<std::size_t>(k)]];
    }
    for (Index k = 0; k < p; ++k) {
        if (n > 0 && (data.col(k).array() == data(0, k)).all()) {
            result.constant_columns.push_back(result.nodes[static_cast<std::size_t>(k)]);
        }
    }
    for (std::size_t t = opts.stride; t <= n; t += opts.stride) result.checkpoints.push_back(t);

    // coef[c](k, j): coefficient of node j in the regression of node k.
    std::vector<Matrix> coef(result.checkpoints.size(), Matrix::Zero(p, p));
    result.lambdas = Matrix::Zero(static_cast<Index>(n), p);

    auto regress = [&](Index k) {
        RapLearner learner(p - 1, family, options);
        Vector x(p - 1);
        std::size_t next = 0;
        for (std::size_t t = 0; t < n; ++t) {
            const auto row = data.row(static_cast<Index>(t));
            for (Index j = 0, q = 0; j < p; ++j) {
                if (j != k) x[q++] = row[j];
            }
            const TraceRecord rec = learner.step(x, row[k]);
            result.lambdas(static_cast<Index>(t), k) = rec.lambda;
            if (next < result.checkpoints.size() && result.checkpoints[next] == t + 1) {
                const Vector& beta = learner.fit().beta;
                for (Index j = 0, q = 0; j < p; ++j) {
                    if (j != k) coef[next](k, j) = beta[q++];
                }
                ++next;
            }
        }
    };

    unsigned workers = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(p));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(p));
    {
        std::atomic<Index> next_node{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (Index k = next_node++; k < p; k = next_node++) {
                    try {
                        regress(k);
                    } catch (...) {
                        errors[static_cast<std::size_t>(k)] = std::current_exception();
                    }
                }
            });
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    for (std::size_t c = 0; c < result.checkpoints.size(); ++c) {
        const Matrix& B = coef[c];
        for (Index i = 0; i < p; ++i) {
            for (Index j = i + 1; j < p; ++j) {
                const bool ij = B(i, j) != 0.0;
                const bool ji = B(j, i) != 0.0;
                if (opts.and_rule ? !(ij && ji) : !(ij || ji)) continue;
                const double w = (B(i, j) + B(j, i)) / static_cast<double>(ij + ji);
                result.edges.push_back({result.checkpoints[c], i + 1, j + 1, w});
            }
        }
    }
    return result;
}

void write_edges(const NetworkResult& result, std::ostream& out) {
    out << "t,i,j,weight\n";
    for (const auto& e : result.edges) {
        out << join_row({std::to_string(e.t), std::to_string(e.i), std::to_string(e.j), format_double(e.weight)});
    }
}

void write_lambdas(const NetworkResult& result, std::ostream& out) {
    std::vector<std::string> head{"t"};
    for (std::size_t k = 1; k <= result.nodes.size(); ++k) head.push_back("lambda" + std::to_string(k));
    out << join_row(head);
    for (Index t = 0; t < result.lambdas.rows(); ++t) {
        std::vector<std::string> cells{std::to_string(t + 1)};
        for (Index k = 0; k < result.lambdas.cols(); ++k) cells.push_back(format_double(result.lambdas(t, k)));
        out << join_row(cells);
    }
}

// ---------------------------------------------------------------------------
// command line

namespace {

void add_learner_flags(CLI::App* cmd, LearnerFlags& f) {
    cmd->add_option("--family", f.family, "gaussian or binomial")->capture_default_str();
    cmd->add_option("--r", f.r, "forgetting factor in (0, 1]")->capture_default_str();
    cmd->add_option("--epsilon", f.epsilon, "step size for lambda")->capture_default_str();
    cmd->add_option("--lambda0", f.lambda0, "initial lambda")->capture_default_str();
    cmd->add_option("--mode", f.mode, "exact or approx")->capture_default_str();
    cmd->add_option("--warmup", f.warmup, "observations absorbed before lambda adapts")->capture_default_str();
    cmd->add_flag("--normalized", f.normalized, "lambda per unit of observation weight");
}

} // namespace

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Streaming lasso with an adaptively learned penalty", "rap"};
    app.require_subcommand(1);

    SimulateOptions sim_opts;
    std::string sim_out = "-";
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic stream as CSV");
    sim_cmd->add_option("--p", sim_opts.p, "number of predictors")->capture_default_str();
    sim_cmd->add_option("--rho", sim_opts.rho, "active fraction; several values make several regimes")
        ->capture_default_str();
    sim_cmd->add_option("--duration", sim_opts.duration, "observations per regime")->capture_default_str();
    sim_cmd->add_option("--blocks", sim_opts.blocks, "covariance blocks")->capture_default_str();
    sim_cmd->add_option("--corr", sim_opts.corr, "within-block correlation")->capture_default_str();
    sim_cmd->add_option("--family", sim_opts.family)->capture_default_str();
    sim_cmd->add_option("--seed", sim_opts.seed)->capture_default_str();
    sim_cmd->add_option("--preset", sim_opts.preset, "table1: dense/sparse/dense, p=20");
    sim_cmd->add_flag("--truth", sim_opts.truth, "append true coefficients b1..bp");
    sim_cmd->add_option("-o,--out", sim_out, "output path or -")->capture_default_str();

    LearnerFlags run_flags;
    std::string run_in;
    std::string run_out = "-";
    auto* run_cmd = app.add_subcommand("run", "Run RAP over a CSV stream");
    run_cmd->add_option("input", run_in, "input CSV or -")->required();
    run_cmd->add_option("-o,--out", run_out, "trace path or -")->capture_default_str();
    add_learner_flags(run_cmd, run_flags);

    BenchOptions bench_opts;
    std::string bench_family;
    double bench_eps = 0.0;
    double bench_r = 0.0;
    auto* bench_cmd = app.add_subcommand("bench", "Run a replicated benchmark preset");
    bench_cmd->add_option("--preset", bench_opts.preset, "stationary or nonstationary[-family]")
        ->capture_default_str();
    auto* fam_opt = bench_cmd->add_option("--family", bench_family);
    bench_cmd->add_option("--reps", bench_opts.reps)->capture_default_str();
    bench_cmd->add_option("--seed", bench_opts.seed)->capture_default_str();
    auto* eps_opt = bench_cmd->add_option("--epsilon", bench_eps, "override the preset step size");
    auto* r_opt = bench_cmd->add_option("--r", bench_r, "override the preset forgetting factor");
    bench_cmd->add_option("--threads", bench_opts.threads, "0: all cores")->capture_default_str();
    bench_cmd->add_option("-o,--out", bench_opts.out_dir, "output directory")->required();

    NetworkOptions net_opts;
    std::string net_in;
    std::string net_out = "-";
    std::string net_lambda_out;
    auto* net_cmd = app.add_subcommand("network", "Time-varying neighborhood selection");
    net_cmd->add_option("input", net_in, "CSV of node columns or -")->required();
    net_cmd->add_option("-o,--out", net_out, "edge list path or -")->capture_default_str();
    net_cmd->add_option("--lambda-out", net_lambda_out, "per-node lambda traces (default: <out>.lambda.csv)");
    net_cmd->add_option("--stride", net_opts.stride, "checkpoint stride")->capture_default_str();
    net_cmd->add_flag("--and-rule", net_opts.and_rule, "require both directed fits to select an edge");
    net_cmd->add_option("--threads", net_opts.threads, "0: all cores")->capture_default_str();
    add_learner_flags(net_cmd, net_opts.learner);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (sim_cmd->parsed()) {
            with_output(sim_out, out, [&](std::ostream& o) { simulate(sim_opts, o); });
        } else if (run_cmd->parsed()) {
            (void)run_flags.options();
            (void)family_from(run_flags.family);
            const Table table = load_input(run_in, nullptr);
            with_output(run_out, out, [&](std::ostream& o) { run_stream(table, run_flags, o); });
        } else if (bench_cmd->parsed()) {
            if (fam_opt->count()) bench_opts.family = bench_family;
            if (eps_opt->count()) bench_opts.epsilon = bench_eps;
            if (r_opt->count()) bench_opts.r = bench_r;
            bench(bench_opts, err);
        } else if (net_cmd->parsed()) {
            (void)net_opts.learner.options();
            const Table table = load_input(net_in, nullptr);
            const NetworkResult result = network(table, net_opts);
            for (const auto& c : result.constant_columns) err << "warning: column '" << c << "' is constant\n";
            with_output(net_out, out, [&](std::ostream& o) { write_edges(result, o); });
            std::string lambda_path = net_lambda_out;
            if (lambda_path.empty() && net_out != "-") lambda_path = net_out + ".lambda.csv";
            if (!lambda_path.empty()) {
                with_output(lambda_path, out, [&](std::ostream& o) { write_lambdas(result, o); });
            }
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}

} // namespace rap::cli
