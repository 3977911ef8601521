#include "pgpois/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include "pgpois/diagnostics.hpp"
#include "pgpois/errors.hpp"

namespace pgpois {

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

long SimDesign::continuous_columns() const {
    if (continuous >= 0) return std::min(continuous, p - 1);
    return p / 2;  // ceil((p - 1) / 2)
}

void SimDesign::validate() const {
    if (n < 1 || p < 1) throw ArgumentError("simulation design needs n, p >= 1");
    if (!(lambda_lo > 0.0) || !(lambda_lo < lambda_hi)) throw ArgumentError("lambda bounds need 0 < lo < hi");
    if (replications < 1) throw ArgumentError("replications must be positive");
}

Eigen::VectorXd simulate_counts(const DesignMatrix<double>& X, const Eigen::VectorXd& beta, Rng& rng) {
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd y(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double lambda = std::exp(eta[i]);
        y[i] = lambda > 0.0 ? static_cast<double>(sample_poisson(lambda, rng)) : 0.0;
    }
    return y;
}

SimulatedData simulate_dataset(const SimDesign& design, Rng& rng) {
    design.validate();
    const long n = design.n;
    const long p = design.p;
    const long n_cont = design.continuous_columns();

    DesignMatrix<double> X(n, p);
    std::vector<std::string> names{"(Intercept)"};
    X.col(0).setOnes();
    for (long j = 1; j < p; ++j) {
        const bool continuous = j <= n_cont;
        names.push_back(continuous ? "x" + std::to_string(j) : "c" + std::to_string(j) + "=1");
        for (int attempt = 0;; ++attempt) {
            for (long i = 0; i < n; ++i)
                X(i, j) = continuous ? sample_normal(rng) : (sample_uniform(rng) < 0.5 ? 0.0 : 1.0);
            const double lo = X.col(j).minCoeff();
            const double hi = X.col(j).maxCoeff();
            if (lo < hi || n < 2 || attempt >= 100) break;
        }
        if (continuous && n > 1) {
            const double mean = X.col(j).mean();
            X.col(j).array() -= mean;
            const double sd = std::sqrt(X.col(j).squaredNorm() / static_cast<double>(n - 1));
            if (sd > 0.0) X.col(j) /= sd;
        }
    }

    const double log_lo = std::log(design.lambda_lo);
    const double log_hi = std::log(design.lambda_hi);
    Eigen::VectorXd beta(p);
    for (int redraw = 0;; ++redraw) {
        if (redraw >= 100) throw NumericError("simulate_dataset: lambda bounds unreachable after 100 redraws");
        for (long j = 0; j < p; ++j) beta[j] = 0.5 * sample_normal(rng);
        // Slopes are shrunk by s <= 1 until the linear predictor spread fits the log-bounds,
        // then the intercept is placed inside its feasible interval.
        const Eigen::VectorXd slope_eta = X.rightCols(p - 1) * beta.tail(p - 1);
        const double spread = p > 1 ? slope_eta.maxCoeff() - slope_eta.minCoeff() : 0.0;
        const double width = (log_hi - log_lo) * (1.0 - 1e-9);
        const double s = spread > width ? width / spread : 1.0;
        if (s < 0.05) continue;
        beta.tail(p - 1) *= s;
        const double shifted_min = p > 1 ? s * slope_eta.minCoeff() : 0.0;
        const double shifted_max = p > 1 ? s * slope_eta.maxCoeff() : 0.0;
        const double icpt_lo = log_lo - shifted_min;
        const double icpt_hi = log_hi - shifted_max;
        const double centre = 0.5 * (icpt_lo + icpt_hi);
        beta[0] = std::clamp(centre + s * beta[0], icpt_lo, icpt_hi);
        const Eigen::VectorXd lambda = (X * beta).array().exp();
        if (lambda.minCoeff() >= design.lambda_lo && lambda.maxCoeff() <= design.lambda_hi) break;
    }

    Eigen::VectorXd y = simulate_counts(X, beta, rng);
    return {Dataset(std::move(y), std::move(X), std::move(names)), beta};
}

ChainOutput random_walk_mh(const Dataset& data, const PriorSpec& prior, const MHConfig& config, double step_scale) {
    if (!(step_scale > 0.0) || !std::isfinite(step_scale)) throw ArgumentError("random_walk_mh: step_scale must be positive");
    const Eigen::Index p = data.p();
    config.validate(p);
    const bool horseshoe = std::holds_alternative<HorseshoePrior>(prior);
    const double tau = horseshoe ? std::get<HorseshoePrior>(prior).tau : 0.0;
    if (horseshoe && !(tau > 0.0)) throw ArgumentError("horseshoe prior needs tau > 0");
    if (!horseshoe && std::get<GaussianPrior>(prior).dim() != p) throw ArgumentError("prior dimension mismatch");

    Rng rng(config.seed);
    const int kept = config.iterations - config.burnin;
    const double sd = step_scale / std::sqrt(static_cast<double>(p));
    ChainOutput out;
    out.draws.resize(kept, p);
    out.accepted.reserve(config.iterations);
    if (config.keep_burnin) out.trace = Eigen::MatrixXd(config.iterations, p);

    HorseshoeState hs;
    GaussianPrior effective = horseshoe ? GaussianPrior::flat(p) : std::get<GaussianPrior>(prior);
    if (horseshoe) {
        hs = HorseshoeState::initial(p);
        effective = horseshoe_effective_prior(hs, tau);
        out.prior_trace = Eigen::MatrixXd(kept, p);
    }

    Eigen::VectorXd beta = config.init_beta ? *config.init_beta : default_initial_beta(data, prior, config.tuning);
    double log_post = log_posterior_unnorm(beta, data, effective);
    std::size_t n_accepted = 0;

    const auto start = std::chrono::steady_clock::now();
    for (int t = 0; t < config.iterations; ++t) {
        const Eigen::VectorXd star = beta + sd * sample_normal_vector(p, rng);
        const double log_u = std::log(sample_uniform(rng));
        const double lp_star = log_posterior_unnorm(star, data, effective);
        const double log_alpha = lp_star - log_post;
        const bool accepted = std::isfinite(lp_star) && log_u < log_alpha;
        if (accepted) {
            beta = star;
            log_post = lp_star;
            ++n_accepted;
        }
        out.accepted.push_back(accepted);
        if (horseshoe) {
            hs = horseshoe_update(beta, hs, tau, rng);
            effective = horseshoe_effective_prior(hs, tau);
            log_post = log_posterior_unnorm(beta, data, effective);
        }
        if (config.keep_burnin) out.trace->row(t) = beta.transpose();
        if (t >= config.burnin) {
            out.draws.row(t - config.burnin) = beta.transpose();
            if (horseshoe) out.prior_trace->row(t - config.burnin) = hs.eta2.transpose();
        }
    }
    out.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.acceptance_rate = static_cast<double>(n_accepted) / static_cast<double>(config.iterations);
    return out;
}

void BenchConfig::validate() const {
    if (ns.empty() || ps.empty()) throw ArgumentError("benchmark grid is empty");
    for (long n : ns)
        if (n < 1) throw ArgumentError("benchmark grid: n must be positive");
    for (long p : ps)
        if (p < 1) throw ArgumentError("benchmark grid: p must be positive");
    if (replications < 1) throw ArgumentError("benchmark: replications must be positive");
    if (iterations < 1 || burnin < 0 || burnin >= iterations)
        throw ArgumentError("benchmark: need 0 <= burnin < iterations");
    for (const auto& m : methods)
        if (m != "pg_mh" && m != "adaptive_is" && m != "rw_mh" && m != "rw_mh_untuned")
            throw ArgumentError("benchmark: unknown method '" + m + "'");
    if (methods.empty()) throw ArgumentError("benchmark: no methods");
    tuning.validate();
    if (threads < 1) throw ArgumentError("benchmark: threads must be positive");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

}  // namespace

void parse_grid(const std::string& grid, BenchConfig& config) {
    std::vector<long> ns, ps;
    std::stringstream parts(grid);
    std::string part;
    while (std::getline(parts, part, ';')) {
        part = trim(part);
        if (part.empty()) continue;
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw ArgumentError("grid entry '" + part + "' lacks '='");
        const std::string key = trim(part.substr(0, eq));
        std::vector<long>* target = key == "n" ? &ns : key == "p" ? &ps : nullptr;
        if (!target) throw ArgumentError("grid key must be n or p, got '" + key + "'");
        std::stringstream values(part.substr(eq + 1));
        std::string v;
        while (std::getline(values, v, ',')) {
            v = trim(v);
            try {
                std::size_t used = 0;
                const long value = std::stol(v, &used);
                if (used != v.size()) throw std::invalid_argument(v);
                target->push_back(value);
            } catch (const std::exception&) {
                throw ArgumentError("grid value '" + v + "' is not an integer");
            }
        }
    }
    if (!ns.empty()) config.ns = ns;
    if (!ps.empty()) config.ps = ps;
}

namespace {

BenchRow run_one(const BenchConfig& config, long n, long p, int rep, const std::string& method) {
    BenchRow row;
    row.method = method;
    row.n = n;
    row.p = p;
    row.replicate = rep;
    try {
        SimDesign design;
        design.n = n;
        design.p = p;
        Rng data_rng(derive_seed(config.seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(p),
                                               static_cast<std::uint64_t>(rep)}));
        const SimulatedData sim = simulate_dataset(design, data_rng);

        PriorSpec prior = config.prior == BenchPrior::gaussian
                              ? PriorSpec(GaussianPrior::isotropic(p, 0.0, config.prior_variance))
                              : PriorSpec(HorseshoePrior{tau_optimal(n, std::min(p, n - 1))});
        MHConfig mh;
        mh.iterations = config.iterations;
        mh.burnin = config.burnin;
        mh.tuning = config.tuning;
        mh.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(p),
                                            static_cast<std::uint64_t>(rep), fnv1a(method)});

        if (method == "adaptive_is") {
            const ISOutput out = is_run(sim.data, prior, mh);
            row.elapsed_seconds = out.elapsed_seconds;
            row.weight_ess = out.ess_weights;
            row.min_ess = out.ess_weights;
        } else {
            const ChainOutput out =
                method == "pg_mh" ? mh_run(sim.data, prior, mh)
                                  : random_walk_mh(sim.data, prior, mh,
                                                   method == "rw_mh" ? config.rw_tuned_scale : config.rw_untuned_scale);
            row.elapsed_seconds = out.elapsed_seconds;
            row.acceptance_rate = out.acceptance_rate;
            double min_ess = static_cast<double>(out.draws.rows());
            for (Eigen::Index j = 0; j < out.draws.cols(); ++j)
                min_ess = std::min(min_ess, effective_draws(out.draws.col(j)));
            row.min_ess = min_ess;
        }
        row.time_per_independent_sample =
            time_per_independent_sample(std::max(row.elapsed_seconds, 1e-12), Eigen::VectorXd::Constant(1, row.min_ess));
        row.ok = std::isfinite(row.time_per_independent_sample) && row.min_ess > 0.0;
        if (!row.ok) row.error = "non-finite metrics";
    } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
    }
    return row;
}

}  // namespace

std::vector<BenchRow> run_benchmark(const BenchConfig& config) {
    config.validate();
    struct Task {
        long n, p;
        int rep;
        std::string method;
    };
    std::vector<Task> tasks;
    for (long n : config.ns)
        for (long p : config.ps)
            for (int rep = 0; rep < config.replications; ++rep)
                for (const auto& m : config.methods) tasks.push_back({n, p, rep, m});

    std::vector<BenchRow> rows(tasks.size());
    const auto worker = [&](std::size_t first, std::size_t stride) {
        for (std::size_t k = first; k < tasks.size(); k += stride)
            rows[k] = run_one(config, tasks[k].n, tasks[k].p, tasks[k].rep, tasks[k].method);
    };
    const auto threads = static_cast<std::size_t>(config.threads);
    if (threads == 1) {
        worker(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t, threads);
    }
    return rows;
}

std::vector<BenchMedian> benchmark_medians(const std::vector<BenchRow>& rows) {
    std::map<std::tuple<std::string, long, long>, std::pair<std::vector<double>, std::vector<double>>> groups;
    std::vector<std::tuple<std::string, long, long>> order;
    for (const auto& r : rows) {
        const auto key = std::make_tuple(r.method, r.n, r.p);
        if (!groups.count(key)) order.push_back(key);
        auto& g = groups[key];
        if (r.ok) {
            g.first.push_back(r.time_per_independent_sample);
            g.second.push_back(r.min_ess);
        }
    }
    std::vector<BenchMedian> out;
    for (const auto& key : order) {
        const auto& g = groups[key];
        BenchMedian m;
        std::tie(m.method, m.n, m.p) = key;
        m.successes = static_cast<int>(g.first.size());
        if (!g.first.empty()) {
            m.median_time_per_independent_sample = quantile(g.first, 0.5);
            m.median_min_ess = quantile(g.second, 0.5);
        } else {
            m.median_time_per_independent_sample = std::nan("");
            m.median_min_ess = std::nan("");
        }
        out.push_back(m);
    }
    return out;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows, bool with_timing) {
    os << "method,n,p,replicate,ok";
    if (with_timing) os << ",elapsed_seconds";
    os << ",min_ess";
    if (with_timing) os << ",time_per_independent_sample";
    os << ",acceptance_rate,weight_ess,error\n";
    for (const auto& r : rows) {
        os << r.method << ',' << r.n << ',' << r.p << ',' << r.replicate << ',' << (r.ok ? 1 : 0);
        if (with_timing) os << ',' << fmt_double(r.elapsed_seconds);
        os << ',' << fmt_double(r.min_ess);
        if (with_timing) os << ',' << fmt_double(r.time_per_independent_sample);
        os << ',' << (r.method == "adaptive_is" ? "" : fmt_double(r.acceptance_rate)) << ','
           << (r.method == "adaptive_is" ? fmt_double(r.weight_ess) : "") << ",\"";
        for (char c : r.error) os << (c == '"' ? std::string("\"\"") : std::string(1, c));
        os << "\"\n";
    }
}

void write_bench_medians(std::ostream& os, const std::vector<BenchMedian>& medians) {
    os << "method,n,p,successes,median_time_per_independent_sample,median_min_ess\n";
    for (const auto& m : medians)
        os << m.method << ',' << m.n << ',' << m.p << ',' << m.successes << ','
           << fmt_double(m.median_time_per_independent_sample) << ',' << fmt_double(m.median_min_ess) << '\n';
}

}  // namespace pgpois
