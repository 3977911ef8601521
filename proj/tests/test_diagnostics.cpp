#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "pgpois/diagnostics.hpp"
#include "pgpois/model.hpp"
#include "pgpois/random.hpp"
#include "pgpois/samplers.hpp"

using namespace pgpois;
using doctest::Approx;

namespace {

Eigen::VectorXd iid_normals(int t, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::VectorXd v(t);
    for (int i = 0; i < t; ++i) v[i] = sample_normal(rng);
    return v;
}

Eigen::VectorXd ar1(int t, double phi, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::VectorXd v(t);
    v[0] = sample_normal(rng) / std::sqrt(1.0 - phi * phi);
    for (int i = 1; i < t; ++i) v[i] = phi * v[i - 1] + sample_normal(rng);
    return v;
}

// The toy from data/toy1d.csv, written out so the oracle sees plain numbers.
const std::vector<double> toy_y{2, 3, 2, 0, 4, 1, 1, 2, 0, 2};
const std::vector<double> toy_x{0.389866, -0.004756, 0.853901, -1.639804, 1.026147,
                                0.247185, -0.272122, 0.788345, -1.846755, 0.457993};

Dataset toy_dataset() {
    Eigen::VectorXd y(10);
    DesignMatrix<double> X(10, 1);
    for (int i = 0; i < 10; ++i) {
        y[i] = toy_y[i];
        X(i, 0) = toy_x[i];
    }
    return Dataset(y, X);
}

oracle::Problem toy_problem() {
    oracle::Problem pr;
    pr.y = toy_y;
    for (double v : toy_x) pr.x.push_back({v});
    pr.prior_var = 1.0;
    return pr;
}

double poisson_pmf(double y, double lambda) {
    return std::exp(y * std::log(lambda) - lambda - std::lgamma(y + 1.0));
}

}  // namespace

TEST_CASE("ESS of independent draws") {
    const auto v = iid_normals(10000, 31);
    const auto e = ess_chain(v);
    CHECK_FALSE(e.degenerate);
    CHECK(std::abs(e.value - 10000.0) <= 1000.0);
}

TEST_CASE("ESS of an AR(1) series") {
    const double phi = 0.9;
    const double expected = 10000.0 * (1.0 - phi) / (1.0 + phi);
    const auto e = ess_chain(ar1(10000, phi, 32));
    CHECK(std::abs(e.value - expected) <= 0.25 * expected);
}

TEST_CASE("ESS edge cases") {
    const auto c = ess_chain(Eigen::VectorXd::Constant(50, 4.2));
    CHECK(c.degenerate);
    CHECK(c.value == 50.0);
    CHECK_THROWS_AS(ess_chain(Eigen::VectorXd::Zero(5)), ArgumentError);
    // Alternating series is anti-correlated; ESS is still clamped to T.
    Eigen::VectorXd alt(100);
    for (int i = 0; i < 100; ++i) alt[i] = (i % 2) ? 1.0 : -1.0;
    const auto a = ess_chain(alt);
    CHECK(a.value > 0.0);
    CHECK(a.value <= 100.0);
}

TEST_CASE("a series that never moves counts as one draw") {
    CHECK(effective_draws(Eigen::VectorXd::Constant(500, -0.3)) == 1.0);
    const auto v = iid_normals(500, 12);
    CHECK(effective_draws(v) == ess_chain(v).value);
}

TEST_CASE("ESS is invariant under affine maps") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto v = ar1(2000, 0.7, seed);
        const Eigen::VectorXd w = (3.0 * v.array() + 7.0).matrix();
        CHECK(std::abs(ess_chain(v).value - ess_chain(w).value) <= 1e-10 * ess_chain(v).value);
    }
}

TEST_CASE("time per independent sample") {
    CHECK(time_per_independent_sample(10.0, Eigen::VectorXd::Constant(4, 1000.0)) == Approx(0.01));
    Eigen::VectorXd e = Eigen::VectorXd::Constant(4, 1000.0);
    e[2] = 100.0;
    CHECK(time_per_independent_sample(10.0, e) == Approx(0.1));
    CHECK(time_per_independent_sample(10.0, e, EssAggregation::median) == Approx(0.01));
    CHECK_THROWS_AS(time_per_independent_sample(0.0, e), ArgumentError);
    e[1] = 0.0;
    CHECK_THROWS_AS(time_per_independent_sample(1.0, e), ArgumentError);
}

TEST_CASE("time per independent sample does not increase with ESS") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd e(3);
        for (int j = 0; j < 3; ++j) e[j] = 1.0 + 1000.0 * sample_uniform(rng);
        const double base = time_per_independent_sample(2.0, e);
        for (int j = 0; j < 3; ++j) {
            Eigen::VectorXd up = e;
            up[j] += 50.0 * sample_uniform(rng);
            CHECK(time_per_independent_sample(2.0, up) <= base);
        }
    }
}

TEST_CASE("CPO of a constant chain is the likelihood") {
    const auto data = toy_dataset();
    const Eigen::MatrixXd draws = Eigen::MatrixXd::Constant(20, 1, 0.4);
    const auto r = cpo(draws, data);
    for (int i = 0; i < 10; ++i) CHECK(r.cpo[i] == Approx(poisson_pmf(toy_y[i], std::exp(0.4 * toy_x[i]))).epsilon(1e-13));
    CHECK(r.few_draws);
}

TEST_CASE("CPO follows a permutation of observations") {
    const auto data = toy_dataset();
    const Eigen::MatrixXd draws = iid_normals(300, 8) * 0.3 + Eigen::VectorXd::Constant(300, 1.0);
    const auto base = cpo(draws, data);
    std::vector<int> perm(10);
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    std::swap(perm[0], perm[4]);
    Eigen::VectorXd y(10);
    DesignMatrix<double> X(10, 1);
    for (int i = 0; i < 10; ++i) {
        y[i] = toy_y[perm[i]];
        X(i, 0) = toy_x[perm[i]];
    }
    const auto shuffled = cpo(draws, Dataset(y, X));
    for (int i = 0; i < 10; ++i) CHECK(shuffled.cpo[i] == Approx(base.cpo[perm[i]]).epsilon(1e-14));
}

TEST_CASE("LPML") {
    CHECK(lpml(Eigen::VectorXd::Ones(6)) == 0.0);
    Eigen::VectorXd c(2);
    c << std::exp(-1.0), std::exp(-2.0);
    CHECK(lpml(c) == Approx(-3.0).epsilon(1e-15));
    c[1] = 0.0;
    CHECK_THROWS_AS(lpml(c), ArgumentError);
}

TEST_CASE("LPML from CPO agrees with the log-space sum") {
    const auto data = toy_dataset();
    const Eigen::MatrixXd draws = iid_normals(2000, 9) * 0.35 + Eigen::VectorXd::Constant(2000, 1.05);
    const auto r = cpo(draws, data);
    // Streaming log-space harmonic mean written independently.
    double direct = 0.0;
    for (int i = 0; i < 10; ++i) {
        std::vector<double> neg(draws.rows());
        for (Eigen::Index t = 0; t < draws.rows(); ++t) {
            const double eta = draws(t, 0) * toy_x[i];
            neg[t] = -(toy_y[i] * eta - std::exp(eta) - std::lgamma(toy_y[i] + 1.0));
        }
        const double top = *std::max_element(neg.begin(), neg.end());
        double s = 0.0;
        for (double v : neg) s += std::exp(v - top);
        direct += -(top + std::log(s / static_cast<double>(neg.size())));
    }
    CHECK(std::abs(lpml(r.cpo) - direct) <= 1e-10 * std::abs(direct));
    CHECK(std::abs(lpml_from_log(r.log_cpo) - direct) <= 1e-10 * std::abs(direct));
}

TEST_CASE("CPO matches leave-one-out quadrature on the toy") {
    const auto data = toy_dataset();
    MHConfig cfg;
    cfg.seed = 77;
    cfg.iterations = 10000;
    cfg.burnin = 5000;
    const auto chain = mh_run(data, GaussianPrior::isotropic(1, 0.0, 1.0), cfg);
    const auto r = cpo(chain.draws, data);
    const auto pr = toy_problem();
    for (int i = 0; i < 10; ++i) {
        const double truth = oracle::loo_cpo_1d(pr, i);
        CHECK(std::abs(r.cpo[i] - truth) <= 0.05 * truth);
    }
}

TEST_CASE("quantiles") {
    CHECK(quantile({1.0, 2.0}, 0.5) == 1.5);
    CHECK(quantile({3.0, 1.0, 2.0}, 0.0) == 1.0);
    CHECK(quantile({3.0, 1.0, 2.0}, 1.0) == 3.0);
    CHECK(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.25) == 2.0);
    const std::vector<double> v{0.3, -1.2, 4.0, 2.2, 0.0, 1.1, 9.5};
    const std::vector<double> ones(v.size(), 0.2);
    for (double p : {0.0, 0.025, 0.1, 0.5, 0.77, 0.975, 1.0}) CHECK(weighted_quantile(v, ones, p) == Approx(quantile(v, p)).epsilon(1e-14));
    // Mass moved onto the largest value pulls the median up.
    std::vector<double> heavy = ones;
    heavy[6] = 5.0;
    CHECK(weighted_quantile(v, heavy, 0.5) > quantile(v, 0.5));
    CHECK_THROWS_AS(quantile({}, 0.5), ArgumentError);
    CHECK_THROWS_AS(quantile({1.0}, 1.5), ArgumentError);
}

TEST_CASE("summary of a two-point chain") {
    Eigen::MatrixXd d(2, 1);
    d << 0.0, 1.0;
    const auto s = summarize_draws(d, std::nullopt, 0.5, {"b"});
    CHECK(s.coefficients[0].name == "b");
    CHECK(s.coefficients[0].mean == 0.5);
    CHECK(s.coefficients[0].sd == Approx(std::sqrt(0.5)));
    CHECK(s.coefficients[0].lower == 0.25);
    CHECK(s.coefficients[0].upper == 0.75);
    CHECK(s.coefficients[0].lower <= s.coefficients[0].upper);
}

TEST_CASE("summary of standard normal draws") {
    const Eigen::MatrixXd d = iid_normals(100000, 40);
    const auto s = summarize_draws(d, std::nullopt, 0.95);
    CHECK(std::abs(s.coefficients[0].lower + 1.96) < 0.03);
    CHECK(std::abs(s.coefficients[0].upper - 1.96) < 0.03);
    CHECK_FALSE(s.coefficients[0].excludes_zero);
    CHECK(s.coefficients[0].ess > 0.0);
    CHECK(s.coefficients[0].ess <= 100000.0);
}

TEST_CASE("summary of identical draws") {
    const Eigen::MatrixXd d = Eigen::MatrixXd::Constant(40, 2, 1.5);
    const auto s = summarize_draws(d, std::nullopt, 0.9);
    for (const auto& c : s.coefficients) {
        CHECK(c.mean == 1.5);
        CHECK(c.sd == 0.0);
        CHECK(c.lower == 1.5);
        CHECK(c.upper == 1.5);
        CHECK(c.excludes_zero);
        CHECK(c.ess == 1.0);
    }
}

TEST_CASE("uniform weights reproduce the unweighted summary exactly") {
    Eigen::MatrixXd d(500, 3);
    const auto a = iid_normals(1500, 41);
    for (int t = 0; t < 500; ++t)
        for (int j = 0; j < 3; ++j) d(t, j) = a[3 * t + j] * (j + 1) + j;
    const auto plain = summarize_draws(d, std::nullopt, 0.9);
    const auto weighted = summarize_draws(d, Eigen::VectorXd::Constant(500, -2.5), 0.9);
    for (int j = 0; j < 3; ++j) {
        CHECK(weighted.coefficients[j].mean == plain.coefficients[j].mean);
        CHECK(weighted.coefficients[j].sd == plain.coefficients[j].sd);
        CHECK(weighted.coefficients[j].lower == plain.coefficients[j].lower);
        CHECK(weighted.coefficients[j].upper == plain.coefficients[j].upper);
    }
}

TEST_CASE("weighted summary shifts toward heavy draws") {
    Eigen::MatrixXd d(4, 1);
    d << 0.0, 1.0, 2.0, 3.0;
    Eigen::VectorXd lw(4);
    lw << 0.0, 0.0, 0.0, std::log(7.0);
    const auto s = summarize_draws(d, lw, 0.5);
    CHECK(s.coefficients[0].mean == Approx(24.0 / 10.0));
    CHECK(s.weight_ess.has_value());
    CHECK(*s.weight_ess == Approx(100.0 / 52.0));
}
