#pragma once

#include <Eigen/Dense>
#include <vector>

#include "jlsgev/basis.hpp"
#include "jlsgev/rng.hpp"

namespace jlsgev {

// Correlated-coefficient covariance: the stacked vector (delta1, delta2) is
// N(0, [[tau1^2 I, rho tau1 tau2 I], [rho tau1 tau2 I, tau2^2 I]]), i.e.
// per-index bivariate pairs, independent across indices.
struct CoefCovariance {
  double tau_sq1 = 1.0;
  double tau_sq2 = 1.0;
  double rho = 0.0;  // in [-1, 1]

  void validate() const;
};

Eigen::MatrixXd joint_coef_cov(const CoefCovariance& c, int p);

// delta1 = tau1 Z1, delta2 = tau2 (rho Z1 + sqrt(1-rho^2) Z2).
void sample_coefficients(const CoefCovariance& c, int p, Rng& rng,
                         Eigen::VectorXd& delta1, Eigen::VectorXd& delta2);

// Log density of a coefficient pair under the joint covariance; -inf when
// |rho| = 1 (degenerate).
double coef_log_prior(const CoefCovariance& c, const Eigen::VectorXd& delta1,
                      const Eigen::VectorXd& delta2);

// Lower-triangular 2x2 coregionalization matrix; diagonal positive.
struct LmcCoefficients {
  double a11 = 1.0;
  double a21 = 0.0;
  double a22 = 1.0;

  void validate() const;
};

// Per-process basis systems (shared by default) plus the coefficient model.
// Coefficient counts must match so the cross block stays square.
struct CrossCovSystem {
  KnotSet knots1;
  KnotSet knots2;
  CoefCovariance coef;
  LmcCoefficients lmc;

  void validate() const;
};

// 2x2 covariance of (w1(s), w2(t)) under w = A v, v_i = phi_i' delta_i.
// Non-symmetric in general when rho != 0 and the two basis systems differ.
Eigen::Matrix2d cross_covariance(const Eigen::Vector2d& s,
                                 const Eigen::Vector2d& t,
                                 const CrossCovSystem& sys);

// Affine surface over tagged locations: process-1 rows get
// o1 + a11*v1, process-2 rows get o2 + a21*v1 + a22*v2, where v1 = phi1*d1
// and v2 = phi2*d2 are evaluated at every row. Equivalent to the structured
// r x 2r coregionalization operator applied to the stacked latent vector,
// which is never materialized.
Eigen::VectorXd latent_surface(const Eigen::MatrixXd& phi1,
                               const Eigen::MatrixXd& phi2,
                               const Eigen::VectorXd& delta1,
                               const Eigen::VectorXd& delta2,
                               const std::vector<int>& owner,  // 1 or 2 per row
                               const LmcCoefficients& lmc, double offset1,
                               double offset2);

}  // namespace jlsgev
