#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "hdclt/core/error.hpp"

namespace hdclt {

enum class CovKind { diagonal, equicorrelated, dense };

inline std::string to_string(CovKind kind) {
  switch (kind) {
    case CovKind::diagonal: return "diagonal";
    case CovKind::equicorrelated: return "equicorrelated";
    case CovKind::dense: return "dense";
  }
  return "unknown";
}

/// Covariance of one summand X_i (and of its Gaussian partner Y_i).
///
/// Always validated as symmetric positive definite on construction; the
/// lower Cholesky factor is cached and used for every correlated draw.
class CovarianceSpec {
 public:
  static CovarianceSpec diagonal(std::vector<double> variances) {
    require(!variances.empty(), ErrorKind::invalid_argument, "covariance: dimension must be >= 1");
    for (std::size_t j = 0; j < variances.size(); ++j) {
      if (!(variances[j] > 0.0) || !std::isfinite(variances[j])) {
        std::ostringstream msg;
        msg << "covariance: variance " << j + 1 << " must be positive and finite (got "
            << variances[j] << ")";
        throw Error(ErrorKind::not_spd, msg.str());
      }
    }
    CovarianceSpec c;
    c.kind_ = CovKind::diagonal;
    c.params_ = variances;
    const auto p = static_cast<Eigen::Index>(variances.size());
    c.matrix_ = Eigen::MatrixXd::Zero(p, p);
    c.chol_ = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
      c.matrix_(j, j) = variances[static_cast<std::size_t>(j)];
      c.chol_(j, j) = std::sqrt(variances[static_cast<std::size_t>(j)]);
    }
    return c;
  }

  static CovarianceSpec equicorrelated(double rho, double sigma2, std::size_t p) {
    require(p >= 1, ErrorKind::invalid_argument, "covariance: dimension must be >= 1");
    require(rho >= 0.0 && rho < 1.0, ErrorKind::not_spd,
            "covariance: equicorrelated rho must lie in [0, 1)");
    require(sigma2 > 0.0 && std::isfinite(sigma2), ErrorKind::not_spd,
            "covariance: equicorrelated sigma2 must be positive");
    const auto n = static_cast<Eigen::Index>(p);
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, n, rho * sigma2);
    m.diagonal().setConstant(sigma2);
    CovarianceSpec c = from_matrix(std::move(m));
    c.kind_ = CovKind::equicorrelated;
    c.params_ = {rho, sigma2, static_cast<double>(p)};
    return c;
  }

  static CovarianceSpec dense(Eigen::MatrixXd matrix) {
    CovarianceSpec c = from_matrix(std::move(matrix));
    c.kind_ = CovKind::dense;
    c.params_.assign(c.matrix_.data(), c.matrix_.data() + c.matrix_.size());
    return c;
  }

  CovKind kind() const { return kind_; }
  std::size_t dim() const { return static_cast<std::size_t>(matrix_.rows()); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::MatrixXd& cholesky() const { return chol_; }
  const std::vector<double>& params() const { return params_; }

  bool is_diagonal() const {
    if (kind_ == CovKind::diagonal) return true;
    const auto p = matrix_.rows();
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < p; ++j)
        if (i != j && matrix_(i, j) != 0.0) return false;
    return true;
  }

  double variance(std::size_t j) const {
    const auto k = static_cast<Eigen::Index>(j);
    return matrix_(k, k);
  }

  std::vector<double> variances() const {
    std::vector<double> v(dim());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = variance(j);
    return v;
  }

  double sigma_min() const { return std::sqrt(matrix_.diagonal().minCoeff()); }
  double sigma_max() const { return std::sqrt(matrix_.diagonal().maxCoeff()); }

  std::string id() const {
    std::ostringstream os;
    os << to_string(kind_) << "_p" << dim();
    if (kind_ == CovKind::equicorrelated) os << "_rho" << params_[0];
    if (kind_ == CovKind::diagonal && sigma_min() != sigma_max())
      os << "_var" << matrix_.diagonal().minCoeff() << "-" << matrix_.diagonal().maxCoeff();
    return os.str();
  }

  friend bool operator==(const CovarianceSpec& a, const CovarianceSpec& b) {
    return a.kind_ == b.kind_ && a.matrix_ == b.matrix_;
  }

 private:
  CovarianceSpec() = default;

  static CovarianceSpec from_matrix(Eigen::MatrixXd m) {
    require(m.rows() >= 1 && m.rows() == m.cols(), ErrorKind::invalid_argument,
            "covariance: matrix must be square with dimension >= 1");
    require(m.allFinite(), ErrorKind::not_spd, "covariance: matrix has non-finite entries");
    const double scale = m.cwiseAbs().maxCoeff();
    require(((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale), ErrorKind::not_spd,
            "covariance: matrix is not symmetric");
    auto factor_ok = [](const Eigen::LLT<Eigen::MatrixXd>& llt) {
      return llt.info() == Eigen::Success &&
             llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0;
    };
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (!factor_ok(llt)) {
      Eigen::Index bad = m.rows();
      for (Eigen::Index k = 1; k <= m.rows(); ++k) {
        if (!factor_ok(Eigen::LLT<Eigen::MatrixXd>(m.topLeftCorner(k, k)))) {
          bad = k;
          break;
        }
      }
      std::ostringstream msg;
      msg << "covariance: matrix is not positive definite (leading minor of order " << bad
          << " is not positive)";
      throw Error(ErrorKind::not_spd, msg.str());
    }
    CovarianceSpec c;
    c.chol_ = llt.matrixL();
    c.matrix_ = std::move(m);
    return c;
  }

  CovKind kind_ = CovKind::diagonal;
  std::vector<double> params_;
  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd chol_;
};

}  // namespace hdclt
