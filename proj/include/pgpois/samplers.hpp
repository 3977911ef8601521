#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "pgpois/model.hpp"
#include "pgpois/proposal.hpp"
#include "pgpois/random.hpp"
#include "pgpois/tuning.hpp"

namespace pgpois {

/// Horseshoe prior with a fixed global scale: beta_j | eta2_j ~ N(0, tau^2 eta2_j).
struct HorseshoePrior {
    double tau = 1.0;
};

using PriorSpec = std::variant<GaussianPrior, HorseshoePrior>;

/// Local scales eta2 and their auxiliary inverse-gamma variables nu.
struct HorseshoeState {
    Eigen::VectorXd eta2;
    Eigen::VectorXd nu;

    static HorseshoeState initial(Eigen::Index p);
};

/// The Gaussian prior implied by the current horseshoe state: N(0, tau^2 diag(eta2)).
GaussianPrior horseshoe_effective_prior(const HorseshoeState& state, double tau);

struct MHConfig {
    int iterations = 10000;
    int burnin = 5000;
    TuningPolicy tuning{};
    std::uint64_t seed = 0;
    std::optional<Eigen::VectorXd> init_beta;  // default_initial_beta when empty
    bool keep_burnin = false;
    bool record_transitions = false;

    void validate(Eigen::Index p) const;
};

/// One proposed move, kept for replaying acceptance decisions.
struct Transition {
    Eigen::VectorXd beta_prev;
    Eigen::VectorXd beta_star;
    double log_alpha = 0.0;
    double log_u = 0.0;
    bool accepted = false;
    bool failed = false;
};

struct ChainOutput {
    Eigen::MatrixXd draws;                   // post-burn-in, one row per iteration
    std::optional<Eigen::MatrixXd> trace;    // every iteration, when keep_burnin
    std::vector<bool> accepted;              // every iteration
    double acceptance_rate = 0.0;
    double elapsed_seconds = 0.0;
    std::optional<Eigen::MatrixXd> prior_trace;  // post-burn-in eta2 draws under the horseshoe
    std::size_t numeric_failures = 0;
    TuningStats tuning;
    std::vector<Transition> transitions;
};

struct ISOutput {
    Eigen::MatrixXd draws;
    Eigen::VectorXd log_weights;
    double ess_weights = 0.0;
    double elapsed_seconds = 0.0;
    std::optional<Eigen::MatrixXd> trace;
    std::optional<Eigen::MatrixXd> prior_trace;
    std::size_t numeric_failures = 0;
    TuningStats tuning;
};

struct MHStepResult {
    Eigen::VectorXd beta_next;
    Eigen::VectorXd beta_star;
    bool accepted = false;
    bool failed = false;  // a proposal build failed; counted as a rejection
    double log_alpha = 0.0;
    double log_u = 0.0;
};

/// log alpha for moving from beta_prev to beta_star: posterior ratio times backward/forward
/// proposal ratio, with r recomputed at each anchor. Empty when a proposal build fails.
std::optional<double> mh_log_alpha(const Eigen::VectorXd& beta_prev, const Eigen::VectorXd& beta_star,
                                   const Dataset& data, const GaussianPrior& prior, const TuningPolicy& policy,
                                   TuningStats* stats = nullptr);

/// Deterministic starting point: the proposal-mean map beta <- m(beta) iterated from zero
/// until it settles. No random numbers are used.
Eigen::VectorXd default_initial_beta(const Dataset& data, const GaussianPrior& prior, const TuningPolicy& policy);

/// Starting point for a prior spec. The horseshoe starts from the N(0, 2 I) fixed point: its initial
/// state (eta2 = 1, scale tau) would pin strong signals near zero, far from where the chain can move.
Eigen::VectorXd default_initial_beta(const Dataset& data, const PriorSpec& prior, const TuningPolicy& policy);

/// One Metropolis-Hastings step. Draws p standard normals and one uniform from rng.
MHStepResult mh_step(const Eigen::VectorXd& beta_prev, const Dataset& data, const GaussianPrior& prior,
                     const TuningPolicy& policy, Rng& rng, TuningStats* stats = nullptr);

ChainOutput mh_run(const Dataset& data, const PriorSpec& prior, const MHConfig& config);

/// One Gibbs sweep over the horseshoe scales: every eta2_j, then every nu_j.
HorseshoeState horseshoe_update(const Eigen::VectorXd& beta, const HorseshoeState& state, double tau, Rng& rng);

/// (p_n / n) sqrt(log(n / p_n)).
double tau_optimal(long n, long p_n);

/// Adaptive importance sampling: each draw comes from the proposal anchored at the previous draw.
ISOutput is_run(const Dataset& data, const PriorSpec& prior, const MHConfig& config);

/// Self-normalized weights from log weights (max-subtracted).
Eigen::VectorXd normalized_weights(const Eigen::Ref<const Eigen::VectorXd>& log_weights);

/// (sum w)^2 / sum w^2, in [1, T].
double weight_ess(const Eigen::Ref<const Eigen::VectorXd>& log_weights);

}  // namespace pgpois
