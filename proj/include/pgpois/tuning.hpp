#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>

#include "pgpois/model.hpp"

namespace pgpois {

/// Per-observation negative-binomial tuning: r_i is the smallest value whose Poisson/NB
/// CDF-ratio distance is at most d, clamped to [r_min, r_max].
struct TuningPolicy {
    double d = 0.1;
    double r_min = 1e-2;
    double r_max = 1e6;
    bool use_closed_form = true;

    void validate() const;
};

/// Counters for how solve_r reached its answers.
struct TuningStats {
    std::size_t solves = 0;
    std::size_t closed_form = 0;
    std::size_t bisection = 0;
    std::size_t at_floor = 0;
    std::size_t capped = 0;
    std::size_t cache_hits = 0;

    /// Fraction of solves where the closed form was tried and rejected.
    double fallback_rate() const;
    TuningStats& operator+=(const TuningStats& other);
};

/// Analytic CDF-ratio distance e^lambda (1 + lambda/r)^(-r) - 1, evaluated in log space.
/// Returns +inf when the exponent exceeds 700.
double nb_poisson_distance(double lambda, double r);

struct EmpiricalDistance {
    double value = 0.0;
    std::int64_t argmax = 0;  // y at which the supremum is attained
};

/// Brute-force sup_y |Pr(V <= y) / Pr(Y <= y) - 1| for V ~ NB(r, lambda/(r+lambda)),
/// Y ~ Poisson(lambda), summing pmfs until both CDFs exceed 1 - epsilon.
EmpiricalDistance empirical_cdf_ratio_distance(double lambda, double r, double epsilon = 1e-12);

enum class LambertBranch { principal, minus_one };

/// Lambert W by Halley iteration from a branch-appropriate starting point.
double lambert_w(double x, LambertBranch branch = LambertBranch::principal);

/// Closed-form root of nb_poisson_distance(lambda, r) = d through the given W branch.
/// Returns NaN or a non-positive value when that branch has no admissible root.
double closed_form_r(double lambda, double d, LambertBranch branch);

double solve_r(double lambda, const TuningPolicy& policy, TuningStats* stats = nullptr);

/// r_i = solve_r(exp(x_i'beta)); ties in lambda (to 12 significant digits) are solved once.
Eigen::VectorXd compute_r_vector(const Eigen::Ref<const Eigen::VectorXd>& beta, const Dataset& data,
                                 const TuningPolicy& policy, TuningStats* stats = nullptr);

}  // namespace pgpois
