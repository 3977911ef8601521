#include "pgpois/diagnostics.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include "pgpois/errors.hpp"

namespace pgpois {

namespace {

// Autocorrelations rho_0..rho_{T-1} (biased autocovariance over lag-0 variance) by FFT.
std::vector<double> autocorrelation(const Eigen::VectorXd& centered) {
    const Eigen::Index T = centered.size();
    std::size_t nfft = 1;
    while (nfft < static_cast<std::size_t>(2 * T)) nfft <<= 1;
    std::vector<double> padded(nfft, 0.0);
    for (Eigen::Index t = 0; t < T; ++t) padded[t] = centered[t];

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spectrum;
    fft.fwd(spectrum, padded);
    for (auto& c : spectrum) c = std::complex<double>(std::norm(c), 0.0);
    std::vector<double> acov;
    fft.inv(acov, spectrum);

    std::vector<double> rho(T);
    for (Eigen::Index k = 0; k < T; ++k) rho[k] = acov[k] / acov[0];
    return rho;
}

bool all_equal(const Eigen::VectorXd& log_weights) {
    return (log_weights.array() == log_weights[0]).all();
}

void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("credible level must lie in (0, 1)");
}

}  // namespace

EssEstimate ess_chain(const Eigen::Ref<const Eigen::VectorXd>& series) {
    const Eigen::Index T = series.size();
    if (T < 10) throw ArgumentError("ess_chain: need at least 10 draws");
    if (!series.allFinite()) throw ArgumentError("ess_chain: series has non-finite values");
    if (series.maxCoeff() == series.minCoeff()) return {static_cast<double>(T), true};

    const Eigen::VectorXd centered = series.array() - series.mean();
    const std::vector<double> rho = autocorrelation(centered);
    if (!(std::isfinite(rho[0]))) return {static_cast<double>(T), true};

    double tau = -1.0;
    double previous = std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 0; 2 * m + 1 < T; ++m) {
        double pair = rho[2 * m] + rho[2 * m + 1];
        if (!(pair > 0.0)) break;
        pair = std::min(pair, previous);
        tau += 2.0 * pair;
        previous = pair;
    }
    const double ess = static_cast<double>(T) / tau;
    return {std::clamp(ess, std::numeric_limits<double>::min(), static_cast<double>(T)), false};
}

double effective_draws(const Eigen::Ref<const Eigen::VectorXd>& series) {
    const EssEstimate e = ess_chain(series);
    return e.degenerate ? 1.0 : e.value;
}

double time_per_independent_sample(double elapsed_seconds, const Eigen::Ref<const Eigen::VectorXd>& ess,
                                   EssAggregation aggregation) {
    if (!(elapsed_seconds > 0.0)) throw ArgumentError("time_per_independent_sample: elapsed must be positive");
    if (ess.size() == 0 || !(ess.minCoeff() > 0.0))
        throw ArgumentError("time_per_independent_sample: ESS entries must be positive");
    const double denom = aggregation == EssAggregation::min
                             ? ess.minCoeff()
                             : quantile(std::vector<double>(ess.data(), ess.data() + ess.size()), 0.5);
    return elapsed_seconds / denom;
}

CpoResult cpo(const Eigen::Ref<const Eigen::MatrixXd>& draws, const Dataset& data) {
    if (draws.cols() != data.p()) throw ArgumentError("cpo: draws have wrong number of columns");
    const Eigen::Index T = draws.rows();
    if (T < 1) throw ArgumentError("cpo: no draws");
    const Eigen::MatrixXd eta = draws * data.X().transpose();  // T x n
    const double log_T = std::log(static_cast<double>(T));

    CpoResult out;
    out.few_draws = T < 100;
    out.cpo.resize(data.n());
    out.log_cpo.resize(data.n());
    Eigen::VectorXd neg_loglik(T);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double yi = data.y()[i];
        for (Eigen::Index t = 0; t < T; ++t) {
            const double e = eta(t, i);
            neg_loglik[t] = e > kMaxLogValue<double> ? std::numeric_limits<double>::infinity()
                                                     : -(yi * e - std::exp(e) - data.log_factorial()[i]);
        }
        const double top = neg_loglik.maxCoeff();
        double lse = top;
        if (std::isfinite(top)) lse = top + std::log((neg_loglik.array() - top).exp().sum());
        out.log_cpo[i] = log_T - lse;
        out.cpo[i] = std::exp(out.log_cpo[i]);
        // A single draw carrying most of the harmonic sum makes the estimate unreliable.
        if (!std::isfinite(top) || top - lse > std::log(0.5)) out.unstable.push_back(i);
    }
    return out;
}

double lpml(const Eigen::Ref<const Eigen::VectorXd>& cpo_values) {
    if (cpo_values.size() == 0 || !(cpo_values.minCoeff() > 0.0))
        throw ArgumentError("lpml: CPO values must be positive");
    return cpo_values.array().log().sum();
}

double lpml_from_log(const Eigen::Ref<const Eigen::VectorXd>& log_cpo) {
    if (log_cpo.size() == 0 || !log_cpo.allFinite()) throw ArgumentError("lpml: log CPO values must be finite");
    return log_cpo.sum();
}

double quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw ArgumentError("quantile: no values");
    if (!(prob >= 0.0 && prob <= 1.0)) throw ArgumentError("quantile: probability outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = static_cast<double>(values.size() - 1) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

double weighted_quantile(const std::vector<double>& values, const std::vector<double>& weights, double prob) {
    if (values.empty() || values.size() != weights.size()) throw ArgumentError("weighted_quantile: bad input");
    if (!(prob >= 0.0 && prob <= 1.0)) throw ArgumentError("weighted_quantile: probability outside [0, 1]");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    if (values.size() == 1) return values[0];

    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    const double w_first = weights[order.front()] / total;
    const double w_last = weights[order.back()] / total;
    const double denom = 1.0 - 0.5 * (w_first + w_last);

    double cumulative = 0.0;
    double prev_pos = 0.0;
    double prev_val = values[order[0]];
    for (std::size_t k = 0; k < order.size(); ++k) {
        const double wk = weights[order[k]] / total;
        cumulative += wk;
        const double pos = k + 1 == order.size() ? 1.0 : (cumulative - 0.5 * (wk + w_first)) / denom;
        const double val = values[order[k]];
        if (prob <= pos) {
            if (k == 0 || pos == prev_pos) return val;
            return prev_val + (prob - prev_pos) / (pos - prev_pos) * (val - prev_val);
        }
        prev_pos = pos;
        prev_val = val;
    }
    return values[order.back()];
}

PosteriorSummary summarize_draws(const Eigen::Ref<const Eigen::MatrixXd>& draws,
                                 const std::optional<Eigen::VectorXd>& log_weights, double level,
                                 const std::vector<std::string>& names) {
    check_level(level);
    const Eigen::Index T = draws.rows();
    const Eigen::Index p = draws.cols();
    if (T < 1) throw ArgumentError("summarize: no draws");
    if (log_weights && log_weights->size() != T) throw ArgumentError("summarize: one log weight per draw");
    const bool weighted = log_weights && !all_equal(*log_weights);
    const double lo_prob = 0.5 * (1.0 - level);
    const double hi_prob = 1.0 - lo_prob;

    PosteriorSummary out;
    out.level = level;
    out.draws = T;
    Eigen::VectorXd w;
    double w_ess = static_cast<double>(T);
    if (log_weights) {
        w = normalized_weights(*log_weights);
        w_ess = weighted ? weight_ess(*log_weights) : static_cast<double>(T);
        out.weight_ess = w_ess;
    }
    std::vector<double> wvec(w.data(), w.data() + w.size());

    for (Eigen::Index j = 0; j < p; ++j) {
        CoefficientSummary c;
        c.name = j < static_cast<Eigen::Index>(names.size()) ? names[j] : "beta" + std::to_string(j);
        const Eigen::VectorXd col = draws.col(j);
        std::vector<double> values(col.data(), col.data() + T);
        if (weighted) {
            c.mean = w.dot(col);
            const double var = w.dot((col.array() - c.mean).square().matrix());
            const double correction = 1.0 - w.squaredNorm();
            c.sd = correction > 0.0 ? std::sqrt(var / correction) : 0.0;
            c.lower = weighted_quantile(values, wvec, lo_prob);
            c.upper = weighted_quantile(values, wvec, hi_prob);
            c.ess = w_ess;
        } else {
            c.mean = col.mean();
            c.sd = T > 1 ? std::sqrt((col.array() - c.mean).square().sum() / static_cast<double>(T - 1)) : 0.0;
            c.lower = quantile(values, lo_prob);
            c.upper = quantile(std::move(values), hi_prob);
            c.ess = log_weights ? w_ess : (T >= 10 ? effective_draws(col) : static_cast<double>(T));
        }
        c.excludes_zero = c.lower > 0.0 || c.upper < 0.0;
        out.coefficients.push_back(std::move(c));
    }
    return out;
}

namespace {

void fill_timing(PosteriorSummary& s, double elapsed) {
    s.elapsed_seconds = elapsed;
    Eigen::VectorXd ess(s.coefficients.size());
    for (std::size_t j = 0; j < s.coefficients.size(); ++j) ess[j] = s.coefficients[j].ess;
    s.time_per_independent_sample =
        elapsed > 0.0 && ess.size() > 0 && ess.minCoeff() > 0.0 ? time_per_independent_sample(elapsed, ess) : 0.0;
}

}  // namespace

PosteriorSummary summarize(const ChainOutput& chain, double level, const std::vector<std::string>& names) {
    PosteriorSummary s = summarize_draws(chain.draws, std::nullopt, level, names);
    s.acceptance_rate = chain.acceptance_rate;
    fill_timing(s, chain.elapsed_seconds);
    return s;
}

PosteriorSummary summarize(const ISOutput& output, double level, const std::vector<std::string>& names) {
    PosteriorSummary s = summarize_draws(output.draws, output.log_weights, level, names);
    fill_timing(s, output.elapsed_seconds);
    return s;
}

}  // namespace pgpois
