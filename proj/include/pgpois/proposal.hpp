#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "pgpois/errors.hpp"
#include "pgpois/model.hpp"
#include "pgpois/random.hpp"

namespace pgpois {

/// Gaussian proposal N(mean, L L') built from the Polya-gamma expectations at `anchor`.
template <typename Scalar>
struct BasicProposalDensity {
    VectorX<Scalar> mean;
    MatrixX<Scalar> chol;  // lower-triangular factor of the covariance
    Scalar log_det_cov{0};
    VectorX<Scalar> anchor;

    Eigen::Index dim() const { return mean.size(); }
    MatrixX<Scalar> covariance() const { return chol * chol.transpose(); }
};

using ProposalDensity = BasicProposalDensity<double>;

/// Below this |c| the Polya-gamma mean uses its limit b/4.
inline constexpr double kPgMeanSingularity = 1e-8;

/// Mean of PG(b, c): (b / 2c) tanh(c / 2), with the removable singularity at c = 0.
template <typename Scalar>
Scalar pg_mean(Scalar b, Scalar c) {
    if (!(b > 0) || !std::isfinite(b)) throw ArgumentError("pg_mean: b must be positive and finite");
    if (!std::isfinite(c)) throw ArgumentError("pg_mean: c must be finite");
    if (std::abs(c) < Scalar(kPgMeanSingularity)) return b / Scalar(4);
    return b / (Scalar(2) * c) * std::tanh(c / Scalar(2));
}

namespace detail {

/// Cholesky of a symmetric matrix; on failure adds 1e-10 * trace / p to the diagonal and retries
/// with 10x escalation, three times at most.
template <typename Scalar>
Eigen::LLT<MatrixX<Scalar>> cholesky_with_jitter(const MatrixX<Scalar>& A, const char* what) {
    Eigen::LLT<MatrixX<Scalar>> llt(A);
    if (llt.info() == Eigen::Success) return llt;
    const Eigen::Index p = A.rows();
    Scalar jitter = Scalar(1e-10) * std::abs(A.trace()) / static_cast<Scalar>(p);
    if (!(jitter > 0)) jitter = Scalar(1e-10);
    for (int attempt = 0; attempt < 3; ++attempt, jitter *= Scalar(10)) {
        MatrixX<Scalar> shifted = A;
        shifted.diagonal().array() += jitter;
        llt.compute(shifted);
        if (llt.info() == Eigen::Success) return llt;
    }
    throw NumericError(std::string(what) + ": matrix is not positive definite after jitter");
}

}  // namespace detail

/// Builds the proposal anchored at `beta_anchor`:
///   precision  P = X' Omega X + B^-1,  Omega = diag(E w_i)
///   mean       m = P^-1 (X' kappa + B^-1 b),  kappa_i = E w_i log r_i + (y_i - r_i) / 2
/// where E w_i is the mean of PG(y_i + r_i, x_i'beta_anchor - log r_i).
template <typename Scalar, typename Derived, typename DerivedR>
BasicProposalDensity<Scalar> build_proposal(const Eigen::MatrixBase<Derived>& beta_anchor,
                                            const BasicDataset<Scalar>& data,
                                            const Eigen::MatrixBase<DerivedR>& r,
                                            const BasicGaussianPrior<Scalar>& prior) {
    const Eigen::Index n = data.n();
    const Eigen::Index p = data.p();
    if (beta_anchor.size() != p) throw ArgumentError("build_proposal: anchor has wrong length");
    if (r.size() != n) throw ArgumentError("build_proposal: r must have one entry per observation");
    if (prior.dim() != p) throw ArgumentError("build_proposal: prior dimension differs from design");

    const VectorX<Scalar> eta = data.X() * beta_anchor;
    if (!eta.allFinite()) throw NumericError("build_proposal: non-finite linear predictor at anchor");

    VectorX<Scalar> omega(n);
    VectorX<Scalar> kappa(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(r[i] > 0) || !std::isfinite(r[i])) throw ArgumentError("build_proposal: r_i must be positive");
        const Scalar log_r = std::log(r[i]);
        const Scalar yi = data.y()[i];
        omega[i] = pg_mean(yi + r[i], eta[i] - log_r);
        kappa[i] = omega[i] * log_r + (yi - r[i]) / Scalar(2);
    }

    MatrixX<Scalar> precision = data.X().transpose() * omega.asDiagonal() * data.X();
    VectorX<Scalar> rhs = data.X().transpose() * kappa;
    if (!prior.is_flat()) {
        if (prior.is_diagonal()) {
            precision.diagonal() += prior.precision().diagonal();
            rhs += prior.precision().diagonal().cwiseProduct(prior.mean());
        } else {
            precision += prior.precision();
            rhs += prior.precision() * prior.mean();
        }
    }
    if (!precision.allFinite()) throw NumericError("build_proposal: non-finite precision matrix");

    const auto llt = detail::cholesky_with_jitter(precision, "build_proposal");
    BasicProposalDensity<Scalar> prop;
    prop.anchor = beta_anchor;
    prop.mean = llt.solve(rhs);
    MatrixX<Scalar> cov = llt.solve(MatrixX<Scalar>::Identity(p, p));
    cov = (cov + cov.transpose()) / Scalar(2);
    Eigen::LLT<MatrixX<Scalar>> cov_llt(cov);
    if (cov_llt.info() != Eigen::Success || !prop.mean.allFinite())
        throw NumericError("build_proposal: proposal covariance is not positive definite");
    prop.chol = cov_llt.matrixL();
    prop.log_det_cov = Scalar(2) * prop.chol.diagonal().array().log().sum();
    return prop;
}

/// m + L z for a given vector of standard normals z.
template <typename Scalar, typename Derived>
VectorX<Scalar> sample_proposal(const BasicProposalDensity<Scalar>& prop, const Eigen::MatrixBase<Derived>& z) {
    if (z.size() != prop.dim()) throw ArgumentError("sample_proposal: z has wrong length");
    return prop.mean + prop.chol.template triangularView<Eigen::Lower>() * z;
}

template <typename Scalar, std::uniform_random_bit_generator Gen>
VectorX<Scalar> sample_proposal(const BasicProposalDensity<Scalar>& prop, Gen& rng) {
    return sample_proposal(prop, sample_normal_vector(prop.dim(), rng).template cast<Scalar>());
}

template <typename Scalar, typename Derived>
Scalar proposal_logpdf(const BasicProposalDensity<Scalar>& prop, const Eigen::MatrixBase<Derived>& beta) {
    if (beta.size() != prop.dim()) throw ArgumentError("proposal_logpdf: beta has wrong length");
    const VectorX<Scalar> u = prop.chol.template triangularView<Eigen::Lower>().solve(beta - prop.mean);
    return Scalar(-0.5) * (static_cast<Scalar>(prop.dim()) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>) +
                           prop.log_det_cov + u.squaredNorm());
}

}  // namespace pgpois
