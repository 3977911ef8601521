#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "pgpois/errors.hpp"

namespace pgpois {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Dense row-major design matrix; row i is the covariate vector x_i.
template <typename Scalar>
using DesignMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Log of the largest finite value; exp() of anything above overflows.
template <typename Scalar>
inline const Scalar kMaxLogValue = std::log(std::numeric_limits<Scalar>::max());

/// Count responses y (n) with an n x p design matrix. Immutable after construction.
template <typename Scalar>
class BasicDataset {
public:
    BasicDataset(VectorX<Scalar> y, DesignMatrix<Scalar> X, std::vector<std::string> column_names = {})
        : y_(std::move(y)), X_(std::move(X)), names_(std::move(column_names)) {
        if (y_.size() < 1 || X_.cols() < 1)
            throw DataError("dataset needs n >= 1 observations and p >= 1 columns");
        if (X_.rows() != y_.size())
            throw DataError("design has " + std::to_string(X_.rows()) + " rows but y has " +
                            std::to_string(y_.size()) + " entries");
        if (!X_.allFinite()) throw DataError("design matrix contains non-finite entries");
        for (Eigen::Index i = 0; i < y_.size(); ++i) {
            if (!(y_[i] >= 0) || y_[i] != std::floor(y_[i]) || !std::isfinite(y_[i]))
                throw DataError("response " + std::to_string(i) + " is not a non-negative integer");
        }
        if (names_.empty()) {
            for (Eigen::Index j = 0; j < X_.cols(); ++j) names_.push_back("beta" + std::to_string(j));
        }
        if (static_cast<Eigen::Index>(names_.size()) != X_.cols())
            throw DataError("column_names has " + std::to_string(names_.size()) + " labels for " +
                            std::to_string(X_.cols()) + " columns");
        log_factorial_ = y_.unaryExpr([](Scalar v) { return std::lgamma(v + Scalar(1)); });
    }

    Eigen::Index n() const { return y_.size(); }
    Eigen::Index p() const { return X_.cols(); }
    const VectorX<Scalar>& y() const { return y_; }
    const DesignMatrix<Scalar>& X() const { return X_; }
    const std::vector<std::string>& column_names() const { return names_; }
    /// log(y_i!) for each observation.
    const VectorX<Scalar>& log_factorial() const { return log_factorial_; }

private:
    VectorX<Scalar> y_;
    DesignMatrix<Scalar> X_;
    std::vector<std::string> names_;
    VectorX<Scalar> log_factorial_;
};

namespace detail {

/// Index (1-based) of the first leading principal minor that is not positive definite.
template <typename Derived>
Eigen::Index failing_leading_minor(const Eigen::MatrixBase<Derived>& A) {
    for (Eigen::Index k = 1; k <= A.rows(); ++k) {
        Eigen::LLT<MatrixX<typename Derived::Scalar>> llt(A.topLeftCorner(k, k));
        if (llt.info() != Eigen::Success) return k;
    }
    return A.rows();
}

template <typename Derived>
bool is_diagonal(const Eigen::MatrixBase<Derived>& A) {
    for (Eigen::Index j = 0; j < A.cols(); ++j)
        for (Eigen::Index i = 0; i < A.rows(); ++i)
            if (i != j && A(i, j) != 0) return false;
    return true;
}

}  // namespace detail

/// Gaussian prior N(b, B). Caches the precision B^-1 and log det B.
/// A flat prior is represented by a zero precision and is improper.
template <typename Scalar>
class BasicGaussianPrior {
public:
    BasicGaussianPrior(VectorX<Scalar> mean, MatrixX<Scalar> covariance)
        : mean_(std::move(mean)), cov_(std::move(covariance)) {
        const Eigen::Index p = mean_.size();
        if (cov_.rows() != p || cov_.cols() != p)
            throw ArgumentError("prior covariance must be " + std::to_string(p) + "x" + std::to_string(p));
        if (!mean_.allFinite() || !cov_.allFinite()) throw ArgumentError("prior parameters must be finite");
        if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10))
            throw ArgumentError("prior covariance is not symmetric");
        diagonal_ = detail::is_diagonal(cov_);
        if (diagonal_) {
            const VectorX<Scalar> d = cov_.diagonal();
            for (Eigen::Index j = 0; j < p; ++j) {
                if (!(d[j] > 0))
                    throw NumericError("prior covariance is not positive definite: leading minor " +
                                       std::to_string(j + 1) + " fails");
            }
            precision_ = d.cwiseInverse().asDiagonal();
            log_det_ = d.array().log().sum();
        } else {
            Eigen::LLT<MatrixX<Scalar>> llt(cov_);
            if (llt.info() != Eigen::Success)
                throw NumericError("prior covariance is not positive definite: leading minor " +
                                   std::to_string(detail::failing_leading_minor(cov_)) + " fails");
            precision_ = llt.solve(MatrixX<Scalar>::Identity(p, p));
            precision_ = (precision_ + precision_.transpose()) / Scalar(2);
            log_det_ = Scalar(2) * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        }
    }

    static BasicGaussianPrior isotropic(Eigen::Index p, Scalar mean, Scalar variance) {
        return BasicGaussianPrior(VectorX<Scalar>::Constant(p, mean),
                                  MatrixX<Scalar>(VectorX<Scalar>::Constant(p, variance).asDiagonal()));
    }

    static BasicGaussianPrior diagonal(VectorX<Scalar> mean, const VectorX<Scalar>& variances) {
        return BasicGaussianPrior(std::move(mean), MatrixX<Scalar>(variances.asDiagonal()));
    }

    /// B -> infinity * I, i.e. zero precision.
    static BasicGaussianPrior flat(Eigen::Index p) {
        BasicGaussianPrior prior;
        prior.mean_ = VectorX<Scalar>::Zero(p);
        prior.cov_ = MatrixX<Scalar>::Constant(p, p, std::numeric_limits<Scalar>::infinity());
        prior.precision_ = MatrixX<Scalar>::Zero(p, p);
        prior.log_det_ = std::numeric_limits<Scalar>::infinity();
        prior.diagonal_ = true;
        prior.flat_ = true;
        return prior;
    }

    Eigen::Index dim() const { return mean_.size(); }
    const VectorX<Scalar>& mean() const { return mean_; }
    const MatrixX<Scalar>& covariance() const { return cov_; }
    const MatrixX<Scalar>& precision() const { return precision_; }
    Scalar log_det_covariance() const { return log_det_; }
    bool is_diagonal() const { return diagonal_; }
    bool is_flat() const { return flat_; }

private:
    BasicGaussianPrior() = default;

    VectorX<Scalar> mean_;
    MatrixX<Scalar> cov_;
    MatrixX<Scalar> precision_;
    Scalar log_det_{0};
    bool diagonal_{false};
    bool flat_{false};
};

using Dataset = BasicDataset<double>;
using GaussianPrior = BasicGaussianPrior<double>;

namespace detail {

template <typename Scalar, typename Derived>
void check_beta(const Eigen::MatrixBase<Derived>& beta, Eigen::Index p, const char* what) {
    if (beta.size() != p)
        throw ArgumentError(std::string(what) + ": beta has length " + std::to_string(beta.size()) +
                            ", expected " + std::to_string(p));
}

}  // namespace detail

/// Linear predictor X beta.
template <typename Scalar, typename Derived>
VectorX<Scalar> linear_predictor(const Eigen::MatrixBase<Derived>& beta, const BasicDataset<Scalar>& data) {
    detail::check_beta<Scalar>(beta, data.p(), "linear_predictor");
    return data.X() * beta;
}

/// Exact Poisson log-likelihood sum_i [y_i x_i'beta - exp(x_i'beta) - log y_i!].
/// Returns -inf when any exp(x_i'beta) overflows.
template <typename Scalar, typename Derived>
Scalar log_poisson_likelihood(const Eigen::MatrixBase<Derived>& beta, const BasicDataset<Scalar>& data) {
    detail::check_beta<Scalar>(beta, data.p(), "log_poisson_likelihood");
    const VectorX<Scalar> eta = data.X() * beta;
    if (!eta.allFinite() || eta.maxCoeff() > kMaxLogValue<Scalar>) return -std::numeric_limits<Scalar>::infinity();
    return (data.y().array() * eta.array() - eta.array().exp() - data.log_factorial().array()).sum();
}

/// Negative-binomial approximation with per-observation r_i.
///
/// The unnormalized form is sum_i [r_i log(r_i/(r_i+l_i)) + y_i log(l_i/(r_i+l_i))], the part that
/// depends on beta. With `normalized` the combinatorial term log G(y+r) - log G(r) - log y! is added,
/// giving a proper log pmf.
template <typename Scalar, typename Derived, typename DerivedR>
Scalar log_nb_likelihood(const Eigen::MatrixBase<Derived>& beta, const Eigen::MatrixBase<DerivedR>& r,
                         const BasicDataset<Scalar>& data, bool normalized) {
    detail::check_beta<Scalar>(beta, data.p(), "log_nb_likelihood");
    if (r.size() != data.n()) throw ArgumentError("log_nb_likelihood: r must have one entry per observation");
    for (Eigen::Index i = 0; i < r.size(); ++i)
        if (!(r[i] > 0) || !std::isfinite(r[i])) throw ArgumentError("log_nb_likelihood: r_i must be positive");
    const VectorX<Scalar> eta = data.X() * beta;
    if (!eta.allFinite() || eta.maxCoeff() > kMaxLogValue<Scalar>) return -std::numeric_limits<Scalar>::infinity();
    Scalar total = 0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const Scalar ri = r[i];
        const Scalar yi = data.y()[i];
        // log(r + l) = log r + log1p(l / r)
        const Scalar log1p_ratio = std::log1p(std::exp(eta[i]) / ri);
        total += -ri * log1p_ratio + yi * (eta[i] - std::log(ri) - log1p_ratio);
        if (normalized) total += std::lgamma(yi + ri) - std::lgamma(ri) - data.log_factorial()[i];
    }
    return total;
}

/// Full multivariate normal log density, including the normalizing constant.
template <typename Scalar, typename Derived>
Scalar log_gaussian_prior(const Eigen::MatrixBase<Derived>& beta, const BasicGaussianPrior<Scalar>& prior) {
    detail::check_beta<Scalar>(beta, prior.dim(), "log_gaussian_prior");
    if (prior.is_flat()) return Scalar(0);
    const VectorX<Scalar> centered = beta - prior.mean();
    const Scalar quad = centered.dot(prior.precision() * centered);
    return Scalar(-0.5) * (static_cast<Scalar>(prior.dim()) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>) +
                           prior.log_det_covariance() + quad);
}

/// log p(y | beta) + log p(beta), the unnormalized log posterior.
template <typename Scalar, typename Derived>
Scalar log_posterior_unnorm(const Eigen::MatrixBase<Derived>& beta, const BasicDataset<Scalar>& data,
                            const BasicGaussianPrior<Scalar>& prior) {
    if (prior.dim() != data.p()) throw ArgumentError("log_posterior_unnorm: prior and data dimensions differ");
    const Scalar loglik = log_poisson_likelihood(beta, data);
    if (loglik == -std::numeric_limits<Scalar>::infinity()) return loglik;
    return loglik + log_gaussian_prior(beta, prior);
}

}  // namespace pgpois
