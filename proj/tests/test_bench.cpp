#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include "oracles.hpp"
#include "pgpois/bench.hpp"
#include "pgpois/diagnostics.hpp"

using namespace pgpois;
using doctest::Approx;

namespace {

MHConfig config(std::uint64_t seed, int iterations, int burnin) {
    MHConfig c;
    c.seed = seed;
    c.iterations = iterations;
    c.burnin = burnin;
    return c;
}

Dataset one_obs() {
    Eigen::VectorXd y(1);
    y << 1;
    DesignMatrix<double> X(1, 1);
    X << 1;
    return Dataset(y, X);
}

// Drops the columns that depend on wall-clock time.
std::string untimed(const std::vector<BenchRow>& rows) {
    std::ostringstream os;
    write_bench_csv(os, rows, false);
    return os.str();
}

}  // namespace

TEST_CASE("simulated rates stay inside the bounds") {
    Rng rng(2024);
    for (int k = 0; k < 1000; ++k) {
        SimDesign d;
        d.n = 5 + static_cast<long>(sample_uniform(rng) * 200);
        d.p = 1 + static_cast<long>(sample_uniform(rng) * 20);
        const auto sim = simulate_dataset(d, rng);
        const Eigen::ArrayXd lambda = (sim.data.X() * sim.beta).array().exp();
        CHECK(lambda.minCoeff() >= 1.0);
        CHECK(lambda.maxCoeff() <= 200.0);
        CHECK(sim.data.y().minCoeff() >= 0.0);
    }
}

TEST_CASE("simulated design shape and standardization") {
    Rng rng(3);
    SimDesign d;
    d.n = 100;
    d.p = 6;
    const auto sim = simulate_dataset(d, rng);
    const auto& X = sim.data.X();
    CHECK(X.rows() == 100);
    CHECK(X.cols() == 6);
    CHECK((X.col(0).array() == 1.0).all());
    CHECK(d.continuous_columns() == 3);
    for (int j = 1; j <= 3; ++j) {
        CHECK(std::abs(X.col(j).mean()) < 1e-12);
        const double var = (X.col(j).array() - X.col(j).mean()).square().sum() / 99.0;
        CHECK(var == Approx(1.0).epsilon(1e-12));
    }
    for (int j = 4; j < 6; ++j) CHECK(((X.col(j).array() == 0.0) || (X.col(j).array() == 1.0)).all());
    CHECK(sim.data.column_names().size() == 6);
}

TEST_CASE("simulation is reproducible from the seed") {
    SimDesign d;
    d.n = 30;
    d.p = 4;
    Rng a(77), b(77);
    const auto s1 = simulate_dataset(d, a);
    const auto s2 = simulate_dataset(d, b);
    CHECK(s1.beta == s2.beta);
    CHECK(s1.data.y() == s2.data.y());
    CHECK(s1.data.X() == s2.data.X());
}

TEST_CASE("zero coefficients give unit rates") {
    Rng rng(4);
    DesignMatrix<double> X(20000, 3);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (int j = 0; j < 3; ++j) X(i, j) = sample_normal(rng);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    CHECK(((X * zero).array().exp() == 1.0).all());
    const auto y = simulate_counts(X, zero, rng);
    CHECK(std::abs(y.mean() - 1.0) < 0.03);
}

TEST_CASE("invalid simulation designs") {
    Rng rng(1);
    SimDesign d;
    d.n = 0;
    CHECK_THROWS_AS(simulate_dataset(d, rng), ArgumentError);
    d.n = 10;
    d.lambda_lo = 5.0;
    d.lambda_hi = 2.0;
    CHECK_THROWS_AS(simulate_dataset(d, rng), ArgumentError);
}

TEST_CASE("random walk step limits") {
    Rng rng(12);
    SimDesign d;
    d.n = 50;
    d.p = 3;
    const auto sim = simulate_dataset(d, rng);
    const PriorSpec prior = GaussianPrior::isotropic(3, 0.0, 2.0);
    const auto tiny = random_walk_mh(sim.data, prior, config(5, 3000, 1000), 1e-4);
    const auto good = random_walk_mh(sim.data, prior, config(5, 3000, 1000), 2.38);
    const auto huge = random_walk_mh(sim.data, prior, config(5, 3000, 1000), 1e3);
    CHECK(tiny.acceptance_rate > 0.95);
    CHECK(huge.acceptance_rate < 0.01);
    const auto ess_min = [](const ChainOutput& c) {
        double m = 1e300;
        for (Eigen::Index j = 0; j < c.draws.cols(); ++j) m = std::min(m, ess_chain(c.draws.col(j)).value);
        return m;
    };
    CHECK(ess_min(tiny) < 0.05 * 2000.0);
    CHECK(ess_min(tiny) < ess_min(good));
    CHECK_THROWS_AS(random_walk_mh(sim.data, prior, config(5, 100, 10), 0.0), ArgumentError);
}

TEST_CASE("random walk on the single-observation toy") {
    const auto truth = oracle::moments_1d({{1.0}, {{1.0}}, 1.0});
    const auto chain = random_walk_mh(one_obs(), GaussianPrior::isotropic(1, 0.0, 1.0), config(6, 20000, 5000), 2.38);
    const auto s = summarize(chain, 0.95);
    const double se = s.coefficients[0].sd / std::sqrt(s.coefficients[0].ess);
    CHECK(std::abs(s.coefficients[0].mean - truth.mean[0]) < 3.0 * se);
}

TEST_CASE("grid parsing") {
    BenchConfig c;
    parse_grid("n=25,50;p=5,10,20", c);
    CHECK(c.ns == std::vector<long>{25, 50});
    CHECK(c.ps == std::vector<long>{5, 10, 20});
    parse_grid(" n = 100 ; p = 3 ", c);
    CHECK(c.ns == std::vector<long>{100});
    CHECK(c.ps == std::vector<long>{3});
    CHECK_THROWS_AS(parse_grid("n=10;q=3", c), ArgumentError);
    CHECK_THROWS_AS(parse_grid("n=ten", c), ArgumentError);
    CHECK_THROWS_AS(parse_grid("n10", c), ArgumentError);
}

TEST_CASE("benchmark table bookkeeping and determinism") {
    BenchConfig c;
    c.ns = {20, 30};
    c.ps = {2};
    c.replications = 2;
    c.iterations = 600;
    c.burnin = 200;
    c.seed = 99;
    const auto rows = run_benchmark(c);
    CHECK(rows.size() == 2 * 1 * 2 * c.methods.size());
    std::set<std::tuple<std::string, long, int>> seen;
    for (const auto& r : rows) {
        seen.emplace(r.method, r.n, r.replicate);
        REQUIRE(r.ok);
        CHECK(r.elapsed_seconds > 0.0);
        CHECK(std::isfinite(r.min_ess));
        CHECK(r.min_ess > 0.0);
        CHECK(r.time_per_independent_sample > 0.0);
        if (r.method == "adaptive_is") {
            CHECK(r.weight_ess >= 1.0);
            CHECK(r.weight_ess <= 400.0);
        } else {
            CHECK(r.acceptance_rate >= 0.0);
            CHECK(r.acceptance_rate <= 1.0);
        }
    }
    CHECK(seen.size() == rows.size());
    CHECK(untimed(run_benchmark(c)) == untimed(rows));

    c.threads = 3;
    CHECK(untimed(run_benchmark(c)) == untimed(rows));

    const auto med = benchmark_medians(rows);
    CHECK(med.size() == 2 * c.methods.size());
    for (const auto& m : med) {
        CHECK(m.successes == 2);
        CHECK(m.median_time_per_independent_sample > 0.0);
    }
}

TEST_CASE("benchmark configuration errors") {
    BenchConfig c;
    c.methods = {"pg_mh", "hmc"};
    CHECK_THROWS_AS(run_benchmark(c), ArgumentError);
    c.methods = {"pg_mh"};
    c.burnin = c.iterations;
    CHECK_THROWS_AS(run_benchmark(c), ArgumentError);
}
