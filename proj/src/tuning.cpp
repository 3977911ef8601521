#include "pgpois/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <utility>

#include "pgpois/errors.hpp"

namespace pgpois {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// x - log1p(x), accurate for small x.
double x_minus_log1p(double x) {
    if (std::abs(x) < 1e-2) {
        // x^2/2 - x^3/3 + x^4/4 - ...
        double term = x * x;
        double sum = 0.0;
        for (int k = 2; k < 30; ++k) {
            sum += (k % 2 == 0 ? 1.0 : -1.0) * term / k;
            term *= x;
        }
        return sum;
    }
    return x - std::log1p(x);
}

double log_add_exp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Key with 12 significant digits of lambda.
std::pair<int, long long> rounded_key(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) return {std::numeric_limits<int>::min(), 0};
    const int exponent = static_cast<int>(std::floor(std::log10(lambda)));
    const long long mantissa = std::llround(lambda * std::pow(10.0, 11 - exponent));
    return {exponent, mantissa};
}

}  // namespace

void TuningPolicy::validate() const {
    if (!(d > 0.0) || !std::isfinite(d)) throw ArgumentError("tuning: d must be positive and finite");
    if (!(r_min > 0.0) || !(r_min < r_max) || !std::isfinite(r_max))
        throw ArgumentError("tuning: need 0 < r_min < r_max < inf");
}

double TuningStats::fallback_rate() const {
    const std::size_t tried = closed_form + bisection;
    return tried == 0 ? 0.0 : static_cast<double>(bisection) / static_cast<double>(tried);
}

TuningStats& TuningStats::operator+=(const TuningStats& other) {
    solves += other.solves;
    closed_form += other.closed_form;
    bisection += other.bisection;
    at_floor += other.at_floor;
    capped += other.capped;
    cache_hits += other.cache_hits;
    return *this;
}

double nb_poisson_distance(double lambda, double r) {
    if (!(lambda > 0.0) || !(r > 0.0) || !std::isfinite(lambda) || !std::isfinite(r))
        throw ArgumentError("nb_poisson_distance: lambda and r must be positive and finite");
    // lambda - r log1p(lambda/r) = r (x - log1p x), x = lambda / r
    const double exponent = std::max(0.0, r * x_minus_log1p(lambda / r));
    if (exponent > 700.0) return kInf;
    return std::expm1(exponent);
}

EmpiricalDistance empirical_cdf_ratio_distance(double lambda, double r, double epsilon) {
    if (!(lambda > 0.0) || !(r > 0.0)) throw ArgumentError("empirical_cdf_ratio_distance: invalid parameters");
    const double log_lambda = std::log(lambda);
    const double log_success = std::log(lambda) - std::log(r + lambda);
    const double log_target = std::log1p(-epsilon);

    double log_pois = -lambda;
    double log_nb = -r * std::log1p(lambda / r);
    double cdf_pois = log_pois;
    double cdf_nb = log_nb;

    EmpiricalDistance best;
    for (std::int64_t y = 0;; ++y) {
        const double err = std::abs(std::expm1(cdf_nb - cdf_pois));
        if (err > best.value) {
            best.value = err;
            best.argmax = y;
        }
        const bool past_mode = static_cast<double>(y) > lambda;
        if (past_mode && cdf_pois >= log_target && cdf_nb >= log_target) break;
        if (y > 100000000) break;
        const double next = static_cast<double>(y + 1);
        log_pois += log_lambda - std::log(next);
        log_nb += std::log(static_cast<double>(y) + r) - std::log(next) + log_success;
        cdf_pois = log_add_exp(cdf_pois, log_pois);
        cdf_nb = log_add_exp(cdf_nb, log_nb);
    }
    return best;
}

double lambert_w(double x, LambertBranch branch) {
    constexpr double kBranchPoint = -0.36787944117144233;  // -1/e
    if (std::isnan(x)) throw ArgumentError("lambert_w: NaN argument");
    // Distance from the branch point, 2 (e x + 1).
    double q = 2.0 * (std::numbers::e * x + 1.0);
    if (q < -1e-14) throw ArgumentError("lambert_w: argument below -1/e");
    q = std::max(q, 0.0);
    if (branch == LambertBranch::minus_one && !(x < 0.0))
        throw ArgumentError("lambert_w: the -1 branch needs -1/e <= x < 0");
    if (q == 0.0 || x == kBranchPoint) return -1.0;

    double w;
    const double p = std::sqrt(q);
    if (branch == LambertBranch::principal) {
        if (x == 0.0) return 0.0;
        if (x == std::numbers::e) return 1.0;
        if (x < -0.25) {
            w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
        } else if (x < 3.0) {
            w = std::log1p(x);
            if (x < 0.0) w = x * (1.0 - x);
        } else {
            const double l1 = std::log(x);
            const double l2 = std::log(l1);
            w = l1 - l2 + l2 / l1;
        }
        if (!std::isfinite(x)) return x;
    } else {
        if (x < -0.25) {
            w = -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p * p * p;
        } else {
            const double l1 = std::log(-x);
            const double l2 = std::log(-l1);
            w = l1 - l2 + l2 / l1;
        }
    }

    for (int iter = 0; iter < 50; ++iter) {
        const double ew = std::exp(w);
        const double f = w * ew - x;
        const double wp1 = w + 1.0;
        if (wp1 == 0.0) break;
        const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        const double step = f / denom;
        if (!std::isfinite(step)) break;
        w -= step;
        if (std::abs(step) <= 1e-15 * (1.0 + std::abs(w))) break;
    }
    return w;
}

double closed_form_r(double lambda, double d, LambertBranch branch) {
    // r log(1 + lambda/r) = lambda - log(1 + d). With t = 1 + lambda/r and a = that / lambda,
    // log t = a (t - 1), so -a t = W(-a e^-a). W_0 yields the trivial root t = 1.
    const double a = (lambda - std::log1p(d)) / lambda;
    if (!(a > 0.0) || !(a < 1.0)) return std::numeric_limits<double>::quiet_NaN();
    const double w = lambert_w(-a * std::exp(-a), branch);
    return lambda * a / (-w - a);
}

double solve_r(double lambda, const TuningPolicy& policy, TuningStats* stats) {
    policy.validate();
    TuningStats local;
    TuningStats& st = stats ? *stats : local;
    ++st.solves;
    const double d = policy.d;

    if (!(lambda > 0.0)) {
        ++st.at_floor;
        return policy.r_min;
    }
    if (!std::isfinite(lambda)) {
        ++st.capped;
        return policy.r_max;
    }
    if (nb_poisson_distance(lambda, policy.r_min) <= d) {
        ++st.at_floor;
        return policy.r_min;
    }
    if (nb_poisson_distance(lambda, policy.r_max) > d) {
        ++st.capped;
        return policy.r_max;
    }

    if (policy.use_closed_form) {
        for (auto branch : {LambertBranch::minus_one, LambertBranch::principal}) {
            const double r = closed_form_r(lambda, d, branch);
            if (!std::isfinite(r) || !(r >= policy.r_min) || !(r <= policy.r_max)) continue;
            const double dist = nb_poisson_distance(lambda, r);
            // Tight two-sided check: r must sit on the root, not merely satisfy the bound.
            if (dist <= d * (1.0 + 1e-6) && std::abs(dist - d) <= 1e-7 * d) {
                ++st.closed_form;
                return r;
            }
        }
    }

    ++st.bisection;
    double lo = policy.r_min;  // distance above d
    double hi = policy.r_max;  // distance at most d
    while (hi / lo - 1.0 > 1e-10) {
        const double mid = std::sqrt(lo * hi);
        if (mid <= lo || mid >= hi) break;
        if (nb_poisson_distance(lambda, mid) <= d)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

Eigen::VectorXd compute_r_vector(const Eigen::Ref<const Eigen::VectorXd>& beta, const Dataset& data,
                                 const TuningPolicy& policy, TuningStats* stats) {
    if (beta.size() != data.p()) throw ArgumentError("compute_r_vector: beta has wrong length");
    const Eigen::VectorXd eta = data.X() * beta;
    Eigen::VectorXd r(data.n());
    std::map<std::pair<int, long long>, double> cache;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double lambda = eta[i] > kMaxLogValue<double> ? kInf : std::exp(eta[i]);
        const auto key = rounded_key(lambda);
        if (auto it = cache.find(key); it != cache.end()) {
            r[i] = it->second;
            if (stats) ++stats->cache_hits;
            continue;
        }
        r[i] = solve_r(lambda, policy, stats);
        cache.emplace(key, r[i]);
    }
    return r;
}

}  // namespace pgpois
