#pragma once

#include "paretotrace/objectives.hpp"

#include <Eigen/Dense>

namespace paretotrace {

// Normal-amplitude coordinates on the ordered design vertices: the deformation
// at vertex k is alpha_k * n_k, so tangential motion is excluded by
// construction rather than by constraints.
struct BoundaryDeformation {
  Eigen::VectorXd alpha;
};

enum class DeformationMetric { h1_elastic, h1_laplace };

struct MetricConfig {
  DeformationMetric metric = DeformationMetric::h1_elastic;
  double lame_lambda = 0.0;
  double lame_mu = 1.0;
  // Element stiffening exponent: contributions scale with (mean area / area)^p,
  // so small elements deform nearly rigidly and large ones absorb the motion.
  double stiffening = 1.0;
};

// Solves b(V, W) = -g.W on the rotor subdomain (V = 0 on the rim and outside)
// with the gradient covector as a nodal load on the design vertices. The
// result satisfies g.V = -b(V, V) <= 0.
std::vector<Vec2> descent_direction(const Mesh& mesh, const ShapeGradient& gradient,
                                    const MetricConfig& metric);

// Extends the interface deformation alpha_k * n_k into the rotor interior
// (harmonic by default, elastic optionally); exact on the Dirichlet data,
// zero on the rim and outside the rotor.
std::vector<Vec2> extend_to_interior(const Mesh& mesh, const std::vector<DesignVertex>& boundary,
                                     const Eigen::VectorXd& alpha, const MetricConfig& metric);

// Reduced second-order operator over normal amplitudes, symmetrized exactly.
// Eigenvalues with magnitude below 1e-10 * max|H| are pushed away from zero
// (sign kept) so the corrector can follow saddle portions of the path; shift
// records the largest eigenvalue modification applied.
struct ShapeHessian {
  Eigen::MatrixXd matrix;  // symmetrized, as assembled
  double shift = 0.0;
  double min_abs_eigenvalue = 0.0;
};

// Solves H x = rhs through the stabilized spectrum; h is symmetrized first.
// Eigenvalue magnitudes are floored at max(1e-10 * max|H|, mu_floor); a large
// mu_floor turns the solve into damped gradient descent while keeping
// eigenvalue signs, so saddle paths remain traversable. Reports the applied
// stabilization through the optional ShapeHessian output.
Eigen::VectorXd solve_stabilized(const Eigen::MatrixXd& h, const Eigen::VectorXd& rhs,
                                 ShapeHessian* info = nullptr, double mu_floor = 0.0);

}  // namespace paretotrace
