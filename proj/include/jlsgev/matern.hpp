#pragma once

#include <Eigen/Dense>
#include <vector>

#include "jlsgev/rng.hpp"

namespace jlsgev {

// Matern correlation scaled by sill, distance scaling sqrt(2*nu)*d/range.
// Closed forms at nu in {0.5, 1.5, 2.5}, Bessel-K otherwise.
double matern(double dist, double range, double sill, double nu);

Eigen::MatrixXd matern_cov(const std::vector<Eigen::Vector2d>& pts,
                           double range, double sill, double nu);

// Zero-mean Gaussian draw via Cholesky; on failure retries with jitter
// 1e-10 * sill escalating x10 up to 1e-6 * sill.
Eigen::VectorXd sample_gaussian(const Eigen::MatrixXd& cov, Rng& rng);

}  // namespace jlsgev
