#pragma once

#include "paretotrace/fem.hpp"
#include "paretotrace/mesh.hpp"

namespace paretotrace {

// Torque ring and axial scale shared by both objectives.
struct GapGeometry {
  double r1 = 0.052;
  double r2 = 0.058;
  double axial_length = 0.1;
};

// Q(x) = 1/|x| * [[x1 x2, (x2^2-x1^2)/2], [(x2^2-x1^2)/2, -x1 x2]];
// symmetric, trace-free, annihilates radial vectors.
Eigen::Matrix2d q_matrix(double x1, double x2);

// J1: negative Arkkio torque over the gap ring (N*m, minimization sign).
double torque_arkkio(const Mesh& mesh, const NodalField& field, const GapGeometry& gap);

// J2: iron volume of the deformable (rotor) domain (m^3).
double iron_volume(const Mesh& mesh, double axial_length);

// dJ1/du, the adjoint right-hand side of the torque.
Eigen::VectorXd torque_state_derivative(const Mesh& mesh, const NodalField& field,
                                        const GapGeometry& gap);

// Adds p^T dr/dX to out (per-vertex 2D covectors over the whole mesh): the
// geometric sensitivity of the Galerkin residual, differentiated exactly for
// the discrete P1 form.
void accumulate_residual_shape_derivative(const Mesh& mesh, const NodalField& state,
                                          const NodalField& adjoint,
                                          const ReluctivityModel& materials,
                                          const SourceField& source, std::vector<Vec2>& out);

// Adds the exact gradient of the rotor iron area to out.
void accumulate_iron_area_gradient(const Mesh& mesh, std::vector<Vec2>& out);

enum class Objective { torque, volume };

struct ShapeGradient {
  std::vector<DesignVertex> boundary;  // ordered design vertices at evaluation time
  std::vector<Vec2> covector;          // dJ/dX_k per design vertex
  Eigen::VectorXd normal_component;    // covector . normal
  // dJ/dX over every vertex: the design-vertex entries above plus the small
  // discrete sensitivities at movable interior vertices, needed for descent
  // line searches to see the true directional derivative.
  std::vector<Vec2> full_covector;
};

// Exact derivative of the discrete objective with respect to design-vertex
// coordinates, via the adjoint for J1 and the analytic area derivative for J2.
ShapeGradient shape_gradient(const Mesh& mesh, const ReluctivityModel& materials,
                             const SourceField& source, const GapGeometry& gap,
                             Objective objective, const NodalField& state, FemSolver& solver);

}  // namespace paretotrace
