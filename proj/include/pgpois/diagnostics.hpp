#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "pgpois/model.hpp"
#include "pgpois/samplers.hpp"

namespace pgpois {

struct EssEstimate {
    double value = 0.0;
    bool degenerate = false;  // constant series; value is T
};

/// Autocorrelation ESS with Geyer's initial monotone positive sequence truncation.
/// Clamped to (0, T]. Needs T >= 10.
EssEstimate ess_chain(const Eigen::Ref<const Eigen::VectorXd>& series);

/// ESS for summaries and efficiency figures. A series that never moved carries one draw's worth of
/// information, so a degenerate series counts as 1 rather than T.
double effective_draws(const Eigen::Ref<const Eigen::VectorXd>& series);

enum class EssAggregation { min, median };

/// elapsed / aggregate(ESS); the minimum over coordinates by default.
double time_per_independent_sample(double elapsed_seconds, const Eigen::Ref<const Eigen::VectorXd>& ess,
                                   EssAggregation aggregation = EssAggregation::min);

struct CpoResult {
    Eigen::VectorXd cpo;
    Eigen::VectorXd log_cpo;
    std::vector<Eigen::Index> unstable;  // observations dominated by a single draw
    bool few_draws = false;              // fewer than 100 draws
};

/// Harmonic-mean CPO_i = [T^-1 sum_t 1/f(y_i | beta_t)]^-1, evaluated with log-sum-exp.
CpoResult cpo(const Eigen::Ref<const Eigen::MatrixXd>& draws, const Dataset& data);

/// sum_i log CPO_i.
double lpml(const Eigen::Ref<const Eigen::VectorXd>& cpo_values);
double lpml_from_log(const Eigen::Ref<const Eigen::VectorXd>& log_cpo);

/// Type-7 quantile (linear interpolation between order statistics).
double quantile(std::vector<double> values, double prob);

/// Weighted analogue of the type-7 quantile: order statistic k sits at
/// (S_k - (w_k + w_0) / 2) / (1 - (w_0 + w_last) / 2), S_k the cumulative normalized weight.
/// Identical to `quantile` for equal weights.
double weighted_quantile(const std::vector<double>& values, const std::vector<double>& weights, double prob);

struct CoefficientSummary {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double ess = 0.0;
    bool excludes_zero = false;
};

struct PosteriorSummary {
    double level = 0.95;
    std::vector<CoefficientSummary> coefficients;
    std::optional<double> acceptance_rate;
    std::optional<double> weight_ess;
    double elapsed_seconds = 0.0;
    double time_per_independent_sample = 0.0;
    Eigen::Index draws = 0;
};

/// Per-coefficient statistics of a draws matrix; weighted when log weights are given.
PosteriorSummary summarize_draws(const Eigen::Ref<const Eigen::MatrixXd>& draws,
                                 const std::optional<Eigen::VectorXd>& log_weights, double level,
                                 const std::vector<std::string>& names = {});

PosteriorSummary summarize(const ChainOutput& chain, double level, const std::vector<std::string>& names = {});
PosteriorSummary summarize(const ISOutput& output, double level, const std::vector<std::string>& names = {});

}  // namespace pgpois
