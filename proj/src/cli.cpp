#include "pgpois/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "pgpois/bench.hpp"
#include "pgpois/diagnostics.hpp"
#include "pgpois/errors.hpp"
#include "pgpois/io.hpp"
#include "pgpois/samplers.hpp"

namespace pgpois {

namespace {

namespace fs = std::filesystem;

// Flags that may override a config file; unset ones leave the file's value alone.
struct RunOverrides {
    std::string data;
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> iterations;
    std::optional<int> burnin;
    std::optional<double> d;
    std::string prior;
    std::optional<double> prior_variance;
    std::optional<double> tau;
    std::optional<long> p_n;
    std::optional<double> level;
    std::string sampler;
    std::string response;
    bool keep_burnin = false;
    bool cpo = false;
    bool no_intercept = false;
};

void add_run_flags(CLI::App* app, RunOverrides& o) {
    app->add_option("--data", o.data, "Input CSV");
    app->add_option("--config", o.config, "JSON run configuration");
    app->add_option("--out", o.out, "Output directory");
    app->add_option("--seed", o.seed, "RNG seed");
    app->add_option("--iterations", o.iterations, "Total iterations, burn-in included");
    app->add_option("--burnin", o.burnin, "Burn-in iterations");
    app->add_option("--d", o.d, "Distance bound for the NB approximation");
    app->add_option("--prior", o.prior, "gaussian or horseshoe")->check(CLI::IsMember({"gaussian", "horseshoe"}));
    app->add_option("--prior-variance", o.prior_variance, "Gaussian prior variance");
    app->add_option("--tau", o.tau, "Horseshoe global scale");
    app->add_option("--p-n", o.p_n, "Expected number of non-zero coefficients (horseshoe)");
    app->add_option("--level", o.level, "Credible level");
    app->add_option("--sampler", o.sampler, "mh or is")->check(CLI::IsMember({"mh", "is"}));
    app->add_option("--response", o.response, "Response column name");
    app->add_flag("--keep-burnin", o.keep_burnin, "Also write the full trace");
    app->add_flag("--cpo", o.cpo, "Write conditional predictive ordinates");
    app->add_flag("--no-intercept", o.no_intercept, "Do not prepend an intercept column");
}

RunConfig resolve_config(const RunOverrides& o) {
    RunConfig c;
    if (!o.config.empty()) {
        c = load_run_config(o.config);
        // Data paths in a config file are relative to the file.
        if (!c.data_path.empty() && fs::path(c.data_path).is_relative())
            c.data_path = (fs::path(o.config).parent_path() / c.data_path).string();
    }
    if (!o.data.empty()) c.data_path = o.data;
    if (!o.out.empty()) c.out_dir = o.out;
    if (o.seed) c.seed = *o.seed;
    if (o.iterations) c.iterations = *o.iterations;
    if (o.burnin) c.burnin = *o.burnin;
    if (o.d) c.d = *o.d;
    if (!o.prior.empty()) {
        c.prior.kind = o.prior == "gaussian" ? PriorConfig::Kind::gaussian : PriorConfig::Kind::horseshoe;
    }
    if (o.prior_variance) c.prior.variance = *o.prior_variance;
    if (o.tau) c.prior.tau = *o.tau;
    if (o.p_n) c.prior.p_n = *o.p_n;
    if (o.level) c.level = *o.level;
    if (!o.sampler.empty()) c.sampler = o.sampler == "mh" ? SamplerKind::mh : SamplerKind::is;
    if (!o.response.empty()) {
        std::erase_if(c.columns, [](const ColumnSpec& s) { return s.kind == ColumnKind::response; });
        c.columns.insert(c.columns.begin(), {o.response, ColumnKind::response, false, std::nullopt});
    }
    if (o.keep_burnin) c.keep_burnin = true;
    if (o.cpo) c.cpo = true;
    if (o.no_intercept) c.intercept = false;
    c.validate();
    return c;
}

void print_summary(std::ostream& out, const PosteriorSummary& s) {
    char line[256];
    std::snprintf(line, sizeof line, "%-16s %12s %12s %12s %12s %10s\n", "coefficient", "mean", "sd", "lower",
                  "upper", "ess");
    out << line;
    for (const auto& c : s.coefficients) {
        std::snprintf(line, sizeof line, "%-16s %12.5g %12.5g %12.5g %12.5g %10.1f%s\n", c.name.c_str(), c.mean, c.sd,
                      c.lower, c.upper, c.ess, c.excludes_zero ? " *" : "");
        out << line;
    }
    if (s.acceptance_rate) out << "acceptance rate: " << *s.acceptance_rate << '\n';
    if (s.weight_ess) out << "weight ESS: " << *s.weight_ess << " of " << s.draws << '\n';
    out << "elapsed seconds: " << s.elapsed_seconds << '\n';
}

void report_cpo(std::ostream& out, std::ostream& err, const CpoResult& c) {
    out << "LPML: " << format_double(lpml_from_log(c.log_cpo)) << '\n';
    if (!c.unstable.empty())
        err << "warning: " << c.unstable.size() << " CPO estimates are dominated by a single draw\n";
    if (c.few_draws) err << "warning: fewer than 100 draws; CPO estimates are noisy\n";
}

// Outputs are kept for inspection; a run where no iteration succeeded is still a failure.
void check_failures(std::size_t failures, const RunConfig& config, std::ostream& err) {
    if (failures == 0) return;
    if (failures >= static_cast<std::size_t>(config.iterations))
        throw NumericError("every iteration hit a numeric failure; the chain never left its starting value");
    err << "warning: " << failures << " of " << config.iterations << " iterations hit a numeric failure\n";
}

int cmd_fit(const RunOverrides& o, std::ostream& out, std::ostream& err) {
    const RunConfig config = resolve_config(o);
    if (config.data_path.empty()) throw ArgumentError("fit: no data file given (--data or config 'data')");
    const Dataset data = load_dataset(config.data_path, config.columns, config.intercept);
    const PriorSpec prior = make_prior(config, data);
    const MHConfig mh = config.mh_config();
    const auto& names = data.column_names();

    if (config.sampler == SamplerKind::mh) {
        const ChainOutput chain = mh_run(data, prior, mh);
        const PosteriorSummary summary = summarize(chain, config.level, names);
        std::optional<CpoResult> cpo_result;
        if (config.cpo) cpo_result = cpo(chain.draws, data);
        write_outputs(chain, summary, config, names, config.out_dir, cpo_result ? &*cpo_result : nullptr);
        print_summary(out, summary);
        if (cpo_result) report_cpo(out, err, *cpo_result);
        check_failures(chain.numeric_failures, config, err);
    } else {
        if (config.cpo) throw ArgumentError("fit: --cpo needs equally weighted draws; use --sampler mh");
        const ISOutput is = is_run(data, prior, mh);
        const PosteriorSummary summary = summarize(is, config.level, names);
        write_outputs(is, summary, config, names, config.out_dir);
        print_summary(out, summary);
        check_failures(is.numeric_failures, config, err);
    }
    out << "wrote " << (fs::path(config.out_dir) / "summary.json").string() << '\n';
    return 0;
}

struct DiagnoseOptions {
    std::string draws;
    std::string data;
    std::string out;
    std::optional<double> level;
    bool cpo = false;
};

int cmd_diagnose(const DiagnoseOptions& o, std::ostream& out, std::ostream& err) {
    const fs::path draws_path = o.draws;
    const DrawsFile draws = read_draws(draws_path);

    // Chain metadata (acceptance, timing, config) lives next to the draws.
    RunConfig config;
    std::optional<double> acceptance;
    double elapsed = 0.0;
    std::size_t failures = 0;
    const fs::path summary_path = draws_path.parent_path() / "summary.json";
    if (fs::exists(summary_path)) {
        std::ifstream in(summary_path, std::ios::binary);
        nlohmann::ordered_json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(summary_path.string() + ": " + e.what());
        }
        if (j.contains("config")) config = run_config_from_json_text(j["config"].dump());
        if (j.contains("acceptance_rate") && !j["acceptance_rate"].is_null())
            acceptance = j["acceptance_rate"].get<double>();
        elapsed = j.value("elapsed_seconds", 0.0);
        failures = j.value("numeric_failures", std::size_t{0});
    } else {
        config.sampler = draws.log_weights ? SamplerKind::is : SamplerKind::mh;
    }
    if (o.level) config.level = *o.level;
    if (!(config.level > 0.0 && config.level < 1.0)) throw ArgumentError("level must lie in (0, 1)");

    PosteriorSummary summary = summarize_draws(draws.draws, draws.log_weights, config.level, draws.names);
    summary.acceptance_rate = acceptance;
    summary.elapsed_seconds = elapsed;
    Eigen::VectorXd ess(summary.coefficients.size());
    for (std::size_t j = 0; j < summary.coefficients.size(); ++j) ess[j] = summary.coefficients[j].ess;
    summary.time_per_independent_sample =
        elapsed > 0.0 && ess.size() > 0 && ess.minCoeff() > 0.0 ? time_per_independent_sample(elapsed, ess) : 0.0;

    const std::string text = summary_to_json_text(summary, config, failures);
    if (o.out.empty()) {
        out << text;
    } else {
        fs::create_directories(o.out);
        std::ofstream os(fs::path(o.out) / "summary.json", std::ios::binary);
        if (!os) throw IoError("cannot write '" + (fs::path(o.out) / "summary.json").string() + "'");
        os << text;
        print_summary(out, summary);
    }

    if (o.cpo) {
        if (draws.log_weights) throw ArgumentError("diagnose: --cpo needs equally weighted draws");
        const std::string data_path = o.data.empty() ? config.data_path : o.data;
        if (data_path.empty()) throw ArgumentError("diagnose: --cpo needs --data");
        const Dataset data = load_dataset(data_path, config.columns, config.intercept);
        if (data.column_names() != draws.names) throw DataError("diagnose: dataset columns do not match the draws");
        const CpoResult result = cpo(draws.draws, data);
        if (!o.out.empty()) {
            std::ofstream os(fs::path(o.out) / "cpo.csv", std::ios::binary);
            os << provenance_comment(config) << "\nobservation,cpo,log_cpo,unstable\n";
            for (Eigen::Index i = 0; i < result.cpo.size(); ++i) {
                const bool unstable =
                    std::find(result.unstable.begin(), result.unstable.end(), i) != result.unstable.end();
                os << i << ',' << format_double(result.cpo[i]) << ',' << format_double(result.log_cpo[i]) << ','
                   << (unstable ? 1 : 0) << '\n';
            }
        }
        report_cpo(out, err, result);
    }
    return 0;
}

struct SimulateOptions {
    long n = 100;
    long p = 5;
    long continuous = -1;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
    SimDesign design;
    design.n = o.n;
    design.p = o.p;
    design.continuous = o.continuous;
    design.seed = o.seed;
    design.validate();
    Rng rng(derive_seed(o.seed, {static_cast<std::uint64_t>(o.n), static_cast<std::uint64_t>(o.p), 0}));
    const SimulatedData sim = simulate_dataset(design, rng);

    std::ostringstream text;
    text << "# pgpois simulate seed=" << o.seed << " n=" << o.n << " p=" << o.p << " beta=";
    for (Eigen::Index j = 0; j < sim.beta.size(); ++j) text << (j ? ";" : "") << format_double(sim.beta[j]);
    text << '\n';
    write_dataset_csv(text, sim.data, "y");
    if (o.out.empty()) {
        out << text.str();
    } else {
        std::ofstream os(o.out, std::ios::binary);
        if (!os) throw IoError("cannot write '" + o.out + "'");
        os << text.str();
    }
    return 0;
}

struct BenchmarkOptions {
    std::string grid = "n=50;p=5";
    int reps = 5;
    std::vector<std::string> methods;
    std::uint64_t seed = 0;
    std::string out = "results.csv";
    int iterations = 10000;
    int burnin = 5000;
    double d = 0.1;
    std::string prior = "gaussian";
    int threads = 1;
};

int cmd_benchmark(const BenchmarkOptions& o, std::ostream& out) {
    BenchConfig config;
    parse_grid(o.grid, config);
    config.replications = o.reps;
    if (!o.methods.empty()) config.methods = o.methods;
    config.seed = o.seed;
    config.iterations = o.iterations;
    config.burnin = o.burnin;
    config.tuning.d = o.d;
    config.prior = o.prior == "horseshoe" ? BenchPrior::horseshoe : BenchPrior::gaussian;
    config.threads = o.threads;
    config.validate();

    const auto rows = run_benchmark(config);
    const auto medians = benchmark_medians(rows);
    {
        std::ofstream os(o.out, std::ios::binary);
        if (!os) throw IoError("cannot write '" + o.out + "'");
        write_bench_csv(os, rows);
    }
    fs::path medians_path = o.out;
    medians_path.replace_filename(medians_path.stem().string() + "_medians.csv");
    {
        std::ofstream os(medians_path, std::ios::binary);
        if (!os) throw IoError("cannot write '" + medians_path.string() + "'");
        write_bench_medians(os, medians);
    }
    write_bench_medians(out, medians);
    out << "wrote " << o.out << " and " << medians_path.string() << '\n';
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) { return run_cli(argc, argv, std::cout, std::cerr); }

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Posterior sampling for Bayesian Poisson log-linear regression", "pgpois"};
    app.require_subcommand(1);

    RunOverrides fit_opts;
    auto* fit = app.add_subcommand("fit", "Run the MH or importance sampler and write draws and a summary");
    add_run_flags(fit, fit_opts);

    DiagnoseOptions diag_opts;
    auto* diagnose = app.add_subcommand("diagnose", "Recompute the summary (and CPO) from a draws file");
    diagnose->add_option("draws", diag_opts.draws, "draws.csv written by fit")->required();
    diagnose->add_option("--data", diag_opts.data, "Dataset, for --cpo");
    diagnose->add_option("--out", diag_opts.out, "Output directory; the summary goes to stdout when absent");
    diagnose->add_option("--level", diag_opts.level, "Credible level");
    diagnose->add_flag("--cpo", diag_opts.cpo, "Compute conditional predictive ordinates");

    SimulateOptions sim_opts;
    auto* simulate = app.add_subcommand("simulate", "Write a synthetic dataset");
    simulate->add_option("--n", sim_opts.n, "Observations");
    simulate->add_option("--p", sim_opts.p, "Coefficients, intercept included");
    simulate->add_option("--continuous", sim_opts.continuous, "Continuous covariates (default ceil((p-1)/2))");
    simulate->add_option("--seed", sim_opts.seed, "RNG seed");
    simulate->add_option("--out", sim_opts.out, "Output CSV; stdout when absent");

    BenchmarkOptions bench_opts;
    auto* benchmark = app.add_subcommand("benchmark", "Run the simulation benchmark grid");
    benchmark->add_option("--grid", bench_opts.grid, "Grid as n=50,100;p=5,10");
    benchmark->add_option("--reps", bench_opts.reps, "Replications per cell");
    benchmark->add_option("--methods", bench_opts.methods, "pg_mh, adaptive_is, rw_mh, rw_mh_untuned")
        ->delimiter(',');
    benchmark->add_option("--seed", bench_opts.seed, "RNG seed");
    benchmark->add_option("--out", bench_opts.out, "Results CSV");
    benchmark->add_option("--iterations", bench_opts.iterations, "Iterations per chain");
    benchmark->add_option("--burnin", bench_opts.burnin, "Burn-in per chain");
    benchmark->add_option("--d", bench_opts.d, "Distance bound");
    benchmark->add_option("--prior", bench_opts.prior, "gaussian or horseshoe")
        ->check(CLI::IsMember({"gaussian", "horseshoe"}));
    benchmark->add_option("--threads", bench_opts.threads, "Worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (fit->parsed()) return cmd_fit(fit_opts, out, err);
        if (diagnose->parsed()) return cmd_diagnose(diag_opts, out, err);
        if (simulate->parsed()) return cmd_simulate(sim_opts, out);
        if (benchmark->parsed()) return cmd_benchmark(bench_opts, out);
    } catch (const ArgumentError& e) {
        err << "argument error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return 3;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "i/o error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 4;
    }
    return 2;
}

}  // namespace pgpois
