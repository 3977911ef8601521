#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pgpois/model.hpp"
#include "pgpois/random.hpp"
#include "pgpois/samplers.hpp"

namespace pgpois {

/// Synthetic design. Column 0 of X is an intercept; of the remaining p - 1 columns the first
/// `continuous` are standardized normals (default ceil((p-1)/2)) and the rest binary dummies.
struct SimDesign {
    long n = 100;
    long p = 5;
    int replications = 50;
    std::uint64_t seed = 0;
    long continuous = -1;
    double lambda_lo = 1.0;
    double lambda_hi = 200.0;

    long continuous_columns() const;
    void validate() const;
};

struct SimulatedData {
    Dataset data;
    Eigen::VectorXd beta;
};

/// y_i ~ Poisson(exp(x_i'beta)); zero-mean cases (lambda underflow) give y_i = 0.
Eigen::VectorXd simulate_counts(const DesignMatrix<double>& X, const Eigen::VectorXd& beta, Rng& rng);

/// Draws a design and coefficients with every lambda_i inside [lambda_lo, lambda_hi], then counts.
SimulatedData simulate_dataset(const SimDesign& design, Rng& rng);

/// Spherical Gaussian random walk with per-coordinate sd step_scale / sqrt(p), against the exact posterior.
ChainOutput random_walk_mh(const Dataset& data, const PriorSpec& prior, const MHConfig& config, double step_scale);

enum class BenchPrior { gaussian, horseshoe };

struct BenchConfig {
    std::vector<long> ns{50};
    std::vector<long> ps{5};
    int replications = 5;
    std::vector<std::string> methods{"pg_mh", "adaptive_is", "rw_mh", "rw_mh_untuned"};
    std::uint64_t seed = 0;
    int iterations = 10000;
    int burnin = 5000;
    TuningPolicy tuning{};
    BenchPrior prior = BenchPrior::gaussian;
    double prior_variance = 2.0;
    double rw_tuned_scale = 2.38;
    double rw_untuned_scale = 1.0;
    int threads = 1;

    void validate() const;
};

struct BenchRow {
    std::string method;
    long n = 0;
    long p = 0;
    int replicate = 0;
    bool ok = false;
    std::string error;
    double elapsed_seconds = 0.0;
    double min_ess = 0.0;
    double time_per_independent_sample = 0.0;
    double acceptance_rate = 0.0;  // MH methods
    double weight_ess = 0.0;       // adaptive_is
};

struct BenchMedian {
    std::string method;
    long n = 0;
    long p = 0;
    int successes = 0;
    double median_time_per_independent_sample = 0.0;
    double median_min_ess = 0.0;
};

/// Parses "n=50,100;p=5,10" into the grid fields of `config`.
void parse_grid(const std::string& grid, BenchConfig& config);

std::vector<BenchRow> run_benchmark(const BenchConfig& config);
std::vector<BenchMedian> benchmark_medians(const std::vector<BenchRow>& rows);

/// CSV table; timing columns (elapsed, time per independent sample) are omitted when `with_timing` is false.
void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows, bool with_timing = true);
void write_bench_medians(std::ostream& os, const std::vector<BenchMedian>& medians);

}  // namespace pgpois
