#include "jlsgev/crosscov.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "jlsgev/errors.hpp"

namespace jlsgev {

void CoefCovariance::validate() const {
  if (!(tau_sq1 > 0.0) || !(tau_sq2 > 0.0)) {
    throw ValidationError("CoefCovariance: tau^2 must be positive");
  }
  if (!(rho >= -1.0 && rho <= 1.0)) {
    throw ValidationError("CoefCovariance: rho must lie in [-1, 1]");
  }
}

Eigen::MatrixXd joint_coef_cov(const CoefCovariance& c, int p) {
  c.validate();
  if (p < 1) throw ValidationError("joint_coef_cov: p must be >= 1");
  const double t1 = std::sqrt(c.tau_sq1);
  const double t2 = std::sqrt(c.tau_sq2);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * p, 2 * p);
  m.topLeftCorner(p, p).diagonal().setConstant(c.tau_sq1);
  m.bottomRightCorner(p, p).diagonal().setConstant(c.tau_sq2);
  m.topRightCorner(p, p).diagonal().setConstant(c.rho * t1 * t2);
  m.bottomLeftCorner(p, p).diagonal().setConstant(c.rho * t1 * t2);
  return m;
}

void sample_coefficients(const CoefCovariance& c, int p, Rng& rng,
                         Eigen::VectorXd& delta1, Eigen::VectorXd& delta2) {
  c.validate();
  const double t1 = std::sqrt(c.tau_sq1);
  const double t2 = std::sqrt(c.tau_sq2);
  const double mix = std::sqrt(std::max(0.0, 1.0 - c.rho * c.rho));
  delta1.resize(p);
  delta2.resize(p);
  for (int i = 0; i < p; ++i) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    delta1[i] = t1 * z1;
    delta2[i] = t2 * (c.rho * z1 + mix * z2);
  }
}

double coef_log_prior(const CoefCovariance& c, const Eigen::VectorXd& delta1,
                      const Eigen::VectorXd& delta2) {
  c.validate();
  if (delta1.size() != delta2.size()) {
    throw ValidationError("coef_log_prior: coefficient lengths differ");
  }
  const double om = 1.0 - c.rho * c.rho;
  if (om <= 0.0) return -std::numeric_limits<double>::infinity();
  const auto p = static_cast<double>(delta1.size());
  const double t1 = std::sqrt(c.tau_sq1);
  const double t2 = std::sqrt(c.tau_sq2);
  double quad = 0.0;
  for (Eigen::Index i = 0; i < delta1.size(); ++i) {
    const double u = delta1[i] / t1;
    const double v = delta2[i] / t2;
    quad += u * u - 2.0 * c.rho * u * v + v * v;
  }
  return -p * std::log(2.0 * std::numbers::pi) -
         0.5 * p * (std::log(c.tau_sq1) + std::log(c.tau_sq2) + std::log(om)) -
         0.5 * quad / om;
}

void LmcCoefficients::validate() const {
  if (!(a11 > 0.0) || !(a22 > 0.0)) {
    throw ValidationError("LmcCoefficients: diagonal must be positive");
  }
  if (!std::isfinite(a21)) throw ValidationError("LmcCoefficients: a21 not finite");
}

void CrossCovSystem::validate() const {
  coef.validate();
  lmc.validate();
  if (knots1.size() != knots2.size()) {
    throw ValidationError("CrossCovSystem: coefficient counts must match");
  }
}

Eigen::Matrix2d cross_covariance(const Eigen::Vector2d& s,
                                 const Eigen::Vector2d& t,
                                 const CrossCovSystem& sys) {
  sys.validate();
  const Eigen::MatrixXd p1s = eval_matrix(sys.knots1, {s});
  const Eigen::MatrixXd p1t = eval_matrix(sys.knots1, {t});
  const Eigen::MatrixXd p2s = eval_matrix(sys.knots2, {s});
  const Eigen::MatrixXd p2t = eval_matrix(sys.knots2, {t});
  const double t1 = std::sqrt(sys.coef.tau_sq1);
  const double t2 = std::sqrt(sys.coef.tau_sq2);
  const double c12 = sys.coef.rho * t1 * t2;
  Eigen::Matrix2d cv;
  cv(0, 0) = sys.coef.tau_sq1 * p1s.row(0).dot(p1t.row(0));
  cv(0, 1) = c12 * p1s.row(0).dot(p2t.row(0));
  cv(1, 0) = c12 * p2s.row(0).dot(p1t.row(0));
  cv(1, 1) = sys.coef.tau_sq2 * p2s.row(0).dot(p2t.row(0));
  Eigen::Matrix2d a;
  a << sys.lmc.a11, 0.0, sys.lmc.a21, sys.lmc.a22;
  return a * cv * a.transpose();
}

Eigen::VectorXd latent_surface(const Eigen::MatrixXd& phi1,
                               const Eigen::MatrixXd& phi2,
                               const Eigen::VectorXd& delta1,
                               const Eigen::VectorXd& delta2,
                               const std::vector<int>& owner,
                               const LmcCoefficients& lmc, double offset1,
                               double offset2) {
  lmc.validate();
  const Eigen::Index r = phi1.rows();
  if (phi2.rows() != r || static_cast<Eigen::Index>(owner.size()) != r) {
    throw ValidationError("latent_surface: row counts disagree");
  }
  if (phi1.cols() != delta1.size() || phi2.cols() != delta2.size()) {
    throw ValidationError("latent_surface: coefficient lengths disagree");
  }
  const Eigen::VectorXd v1 = phi1 * delta1;
  const Eigen::VectorXd v2 = phi2 * delta2;
  Eigen::VectorXd out(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (owner[i] == 1) {
      out[i] = offset1 + lmc.a11 * v1[i];
    } else if (owner[i] == 2) {
      out[i] = offset2 + lmc.a21 * v1[i] + lmc.a22 * v2[i];
    } else {
      throw ValidationError("latent_surface: owner tag must be 1 or 2");
    }
  }
  return out;
}

}  // namespace jlsgev
