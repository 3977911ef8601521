#include "pgpois/samplers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "pgpois/errors.hpp"

namespace pgpois {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::optional<ProposalDensity> try_build(const Eigen::VectorXd& anchor, const Dataset& data,
                                         const GaussianPrior& prior, const TuningPolicy& policy,
                                         TuningStats* stats) {
    try {
        const Eigen::VectorXd r = compute_r_vector(anchor, data, policy, stats);
        return build_proposal(anchor, data, r, prior);
    } catch (const NumericError&) {
        return std::nullopt;
    }
}

// Combines the four log densities; handles the -inf sentinel on either side.
double combine_log_alpha(double lp_star, double lp_prev, double log_q_back, double log_q_fwd) {
    if (lp_star == kNegInf) return kNegInf;
    if (lp_prev == kNegInf) return std::numeric_limits<double>::infinity();
    return (lp_star - lp_prev) + (log_q_back - log_q_fwd);
}

bool accept(double log_alpha, double log_u) { return !std::isnan(log_alpha) && log_u < log_alpha; }

const GaussianPrior* fixed_prior(const PriorSpec& prior) { return std::get_if<GaussianPrior>(&prior); }

double horseshoe_tau(const PriorSpec& prior) {
    const auto& hs = std::get<HorseshoePrior>(prior);
    if (!(hs.tau > 0.0) || !std::isfinite(hs.tau)) throw ArgumentError("horseshoe prior needs tau > 0");
    return hs.tau;
}

Eigen::VectorXd initial_beta(const MHConfig& config, const Dataset& data, const PriorSpec& prior) {
    return config.init_beta ? *config.init_beta : default_initial_beta(data, prior, config.tuning);
}

// Metropolis-Hastings state that keeps the forward proposal and log posterior of the
// current point between steps. Both are dropped whenever the prior changes.
class MHChain {
public:
    MHChain(const Dataset& data, const TuningPolicy& policy, Eigen::VectorXd beta)
        : data_(data), policy_(policy), beta_(std::move(beta)) {}

    void set_prior(const GaussianPrior& prior) {
        prior_ = &prior;
        forward_.reset();
        forward_ready_ = false;
        log_post_.reset();
    }

    const Eigen::VectorXd& beta() const { return beta_; }

    MHStepResult step(Rng& rng, TuningStats* stats) {
        if (!forward_ready_) {
            forward_ = try_build(beta_, data_, *prior_, policy_, stats);
            forward_ready_ = true;
        }
        if (!log_post_) log_post_ = log_posterior_unnorm(beta_, data_, *prior_);

        const Eigen::VectorXd z = sample_normal_vector(data_.p(), rng);
        MHStepResult result;
        result.log_u = std::log(sample_uniform(rng));
        result.beta_next = beta_;
        if (!forward_) {
            result.failed = true;
            result.beta_star = beta_;
            result.log_alpha = kNegInf;
            return result;
        }
        result.beta_star = sample_proposal(*forward_, z);
        const double lp_star = log_posterior_unnorm(result.beta_star, data_, *prior_);

        std::optional<ProposalDensity> backward;
        if (lp_star == kNegInf) {
            result.log_alpha = kNegInf;
        } else {
            backward = try_build(result.beta_star, data_, *prior_, policy_, stats);
            if (!backward) {
                result.failed = true;
                result.log_alpha = kNegInf;
                return result;
            }
            result.log_alpha = combine_log_alpha(lp_star, *log_post_, proposal_logpdf(*backward, beta_),
                                                 proposal_logpdf(*forward_, result.beta_star));
        }
        result.accepted = accept(result.log_alpha, result.log_u);
        if (result.accepted) {
            beta_ = result.beta_star;
            result.beta_next = beta_;
            log_post_ = lp_star;
            forward_ = std::move(backward);
        }
        return result;
    }

private:
    const Dataset& data_;
    const TuningPolicy& policy_;
    const GaussianPrior* prior_ = nullptr;
    Eigen::VectorXd beta_;
    std::optional<ProposalDensity> forward_;
    bool forward_ready_ = false;
    std::optional<double> log_post_;
};

void check_prior_dim(const PriorSpec& prior, const Dataset& data) {
    if (const auto* g = fixed_prior(prior); g && g->dim() != data.p())
        throw ArgumentError("prior dimension " + std::to_string(g->dim()) + " does not match design with p = " +
                            std::to_string(data.p()));
}

}  // namespace

HorseshoeState HorseshoeState::initial(Eigen::Index p) {
    return {Eigen::VectorXd::Ones(p), Eigen::VectorXd::Ones(p)};
}

GaussianPrior horseshoe_effective_prior(const HorseshoeState& state, double tau) {
    return GaussianPrior::diagonal(Eigen::VectorXd::Zero(state.eta2.size()), (tau * tau) * state.eta2);
}

void MHConfig::validate(Eigen::Index p) const {
    if (iterations < 1) throw ArgumentError("iterations must be positive");
    if (burnin < 0 || burnin >= iterations) throw ArgumentError("burnin must satisfy 0 <= burnin < iterations");
    tuning.validate();
    if (init_beta && init_beta->size() != p) throw ArgumentError("init_beta has wrong length");
    if (init_beta && !init_beta->allFinite()) throw ArgumentError("init_beta must be finite");
}

std::optional<double> mh_log_alpha(const Eigen::VectorXd& beta_prev, const Eigen::VectorXd& beta_star,
                                   const Dataset& data, const GaussianPrior& prior, const TuningPolicy& policy,
                                   TuningStats* stats) {
    const auto forward = try_build(beta_prev, data, prior, policy, stats);
    if (!forward) return std::nullopt;
    const double lp_star = log_posterior_unnorm(beta_star, data, prior);
    if (lp_star == kNegInf) return kNegInf;
    const auto backward = try_build(beta_star, data, prior, policy, stats);
    if (!backward) return std::nullopt;
    return combine_log_alpha(lp_star, log_posterior_unnorm(beta_prev, data, prior),
                             proposal_logpdf(*backward, beta_prev), proposal_logpdf(*forward, beta_star));
}

Eigen::VectorXd default_initial_beta(const Dataset& data, const GaussianPrior& prior, const TuningPolicy& policy) {
    // Started at zero the reverse proposal density is typically negligible and the chain never moves.
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(data.p());
    for (int it = 0; it < 100; ++it) {
        const auto prop = try_build(beta, data, prior, policy, nullptr);
        if (!prop || !prop->mean.allFinite()) break;
        const double change = (prop->mean - beta).lpNorm<Eigen::Infinity>();
        beta = prop->mean;
        if (change <= 1e-8 * (1.0 + beta.lpNorm<Eigen::Infinity>())) break;
    }
    return beta;
}

Eigen::VectorXd default_initial_beta(const Dataset& data, const PriorSpec& prior, const TuningPolicy& policy) {
    if (const auto* g = fixed_prior(prior)) return default_initial_beta(data, *g, policy);
    return default_initial_beta(data, GaussianPrior::isotropic(data.p(), 0.0, 2.0), policy);
}

MHStepResult mh_step(const Eigen::VectorXd& beta_prev, const Dataset& data, const GaussianPrior& prior,
                     const TuningPolicy& policy, Rng& rng, TuningStats* stats) {
    if (!beta_prev.allFinite()) throw ArgumentError("mh_step: beta_prev must be finite");
    MHChain chain(data, policy, beta_prev);
    chain.set_prior(prior);
    return chain.step(rng, stats);
}

HorseshoeState horseshoe_update(const Eigen::VectorXd& beta, const HorseshoeState& state, double tau, Rng& rng) {
    if (!(tau > 0.0)) throw ArgumentError("horseshoe_update: tau must be positive");
    const Eigen::Index p = beta.size();
    HorseshoeState next = state;
    const double two_tau2 = 2.0 * tau * tau;
    for (Eigen::Index j = 0; j < p; ++j)
        next.eta2[j] = sample_invgamma(1.0, 1.0 / next.nu[j] + beta[j] * beta[j] / two_tau2, rng);
    for (Eigen::Index j = 0; j < p; ++j) next.nu[j] = sample_invgamma(1.0, 1.0 + 1.0 / next.eta2[j], rng);
    return next;
}

double tau_optimal(long n, long p_n) {
    if (p_n < 1 || n < 1 || p_n >= n) throw ArgumentError("tau_optimal: need 0 < p_n < n");
    const double ratio = static_cast<double>(p_n) / static_cast<double>(n);
    return ratio * std::sqrt(std::log(static_cast<double>(n) / static_cast<double>(p_n)));
}

ChainOutput mh_run(const Dataset& data, const PriorSpec& prior, const MHConfig& config) {
    const Eigen::Index p = data.p();
    config.validate(p);
    check_prior_dim(prior, data);
    const bool horseshoe = std::holds_alternative<HorseshoePrior>(prior);
    const double tau = horseshoe ? horseshoe_tau(prior) : 0.0;

    Rng rng(config.seed);
    const int kept = config.iterations - config.burnin;
    ChainOutput out;
    out.draws.resize(kept, p);
    out.accepted.reserve(config.iterations);
    if (config.keep_burnin) out.trace = Eigen::MatrixXd(config.iterations, p);
    if (config.record_transitions) out.transitions.reserve(config.iterations);

    HorseshoeState hs;
    GaussianPrior effective = horseshoe ? GaussianPrior::flat(p) : *fixed_prior(prior);
    if (horseshoe) {
        hs = HorseshoeState::initial(p);
        effective = horseshoe_effective_prior(hs, tau);
        out.prior_trace = Eigen::MatrixXd(kept, p);
    }

    MHChain chain(data, config.tuning, initial_beta(config, data, prior));
    chain.set_prior(effective);
    std::size_t n_accepted = 0;

    const auto start = std::chrono::steady_clock::now();
    for (int t = 0; t < config.iterations; ++t) {
        const Eigen::VectorXd beta_prev = config.record_transitions ? chain.beta() : Eigen::VectorXd();
        MHStepResult step = chain.step(rng, &out.tuning);
        out.accepted.push_back(step.accepted);
        n_accepted += step.accepted ? 1 : 0;
        out.numeric_failures += step.failed ? 1 : 0;
        if (config.record_transitions)
            out.transitions.push_back(
                {beta_prev, step.beta_star, step.log_alpha, step.log_u, step.accepted, step.failed});

        if (horseshoe) {
            hs = horseshoe_update(chain.beta(), hs, tau, rng);
            effective = horseshoe_effective_prior(hs, tau);
            chain.set_prior(effective);
        }
        if (config.keep_burnin) out.trace->row(t) = chain.beta().transpose();
        if (t >= config.burnin) {
            out.draws.row(t - config.burnin) = chain.beta().transpose();
            if (horseshoe) out.prior_trace->row(t - config.burnin) = hs.eta2.transpose();
        }
    }
    out.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.acceptance_rate = static_cast<double>(n_accepted) / static_cast<double>(config.iterations);
    return out;
}

ISOutput is_run(const Dataset& data, const PriorSpec& prior, const MHConfig& config) {
    const Eigen::Index p = data.p();
    config.validate(p);
    check_prior_dim(prior, data);
    const bool horseshoe = std::holds_alternative<HorseshoePrior>(prior);
    const double tau = horseshoe ? horseshoe_tau(prior) : 0.0;

    Rng rng(config.seed);
    const int kept = config.iterations - config.burnin;
    ISOutput out;
    out.draws.resize(kept, p);
    out.log_weights.resize(kept);
    if (config.keep_burnin) out.trace = Eigen::MatrixXd(config.iterations, p);

    HorseshoeState hs;
    GaussianPrior effective = horseshoe ? GaussianPrior::flat(p) : *fixed_prior(prior);
    if (horseshoe) {
        hs = HorseshoeState::initial(p);
        effective = horseshoe_effective_prior(hs, tau);
        out.prior_trace = Eigen::MatrixXd(kept, p);
    }

    Eigen::VectorXd anchor = initial_beta(config, data, prior);
    std::optional<ProposalDensity> proposal;

    const auto start = std::chrono::steady_clock::now();
    for (int t = 0; t < config.iterations; ++t) {
        // A failed build keeps the last valid proposal; the weight still uses the density sampled from.
        if (auto built = try_build(anchor, data, effective, config.tuning, &out.tuning)) {
            proposal = std::move(built);
        } else {
            ++out.numeric_failures;
            if (!proposal) throw NumericError("is_run: could not build the initial importance density");
        }
        const Eigen::VectorXd draw = sample_proposal(*proposal, rng);
        const double log_post = log_posterior_unnorm(draw, data, effective);
        const double log_w = log_post == kNegInf ? kNegInf : log_post - proposal_logpdf(*proposal, draw);

        if (config.keep_burnin) out.trace->row(t) = draw.transpose();
        if (t >= config.burnin) {
            out.draws.row(t - config.burnin) = draw.transpose();
            out.log_weights[t - config.burnin] = log_w;
        }
        anchor = draw;
        if (horseshoe) {
            hs = horseshoe_update(draw, hs, tau, rng);
            effective = horseshoe_effective_prior(hs, tau);
            if (t >= config.burnin) out.prior_trace->row(t - config.burnin) = hs.eta2.transpose();
        }
    }
    out.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.ess_weights = weight_ess(out.log_weights);
    return out;
}

Eigen::VectorXd normalized_weights(const Eigen::Ref<const Eigen::VectorXd>& log_weights) {
    if (log_weights.size() == 0) throw ArgumentError("normalized_weights: empty weight vector");
    const double top = log_weights.maxCoeff();
    if (!std::isfinite(top))
        throw EstimationError("all importance weights are zero; use a larger d or more iterations");
    Eigen::VectorXd w =
        (log_weights.array() == -std::numeric_limits<double>::infinity())
            .select(0.0, (log_weights.array() - top).exp())
            .matrix();
    return w / w.sum();
}

double weight_ess(const Eigen::Ref<const Eigen::VectorXd>& log_weights) {
    const Eigen::VectorXd w = normalized_weights(log_weights);
    const double ess = 1.0 / w.squaredNorm();
    return std::clamp(ess, 1.0, static_cast<double>(w.size()));
}

}  // namespace pgpois
