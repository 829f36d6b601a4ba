#pragma once

#include "paretotrace/mesh.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <memory>
#include <optional>
#include <vector>

namespace paretotrace {

struct SolveError : std::runtime_error {
  double last_residual = 0.0;
  int iterations = 0;
  SolveError(const std::string& msg, double res, int iters)
      : std::runtime_error(msg), last_residual(res), iterations(iters) {}
};

// Magnetic reluctivity, piecewise in space: nu0 outside iron, and inside iron
// either a constant or the saturation curve nu(s) = k1 + k2*exp(k3*s^2) with
// s = |grad u| = |B|, clipped at the air reluctivity nu0 (the physical
// asymptote of any B-H curve: saturated iron behaves like air, never worse).
struct ReluctivityModel {
  enum class Law { linear, brauer };

  static constexpr double nu0() { return 1.0 / (4.0e-7 * 3.14159265358979323846); }

  Law law = Law::brauer;
  double nu_linear = nu0() / 1000.0;
  double k1 = 200.0;
  double k2 = 1e-3;
  double k3 = 6.0;

  double iron_nu(double s) const {
    if (law == Law::linear) return nu_linear;
    double arg = k3 * s * s;
    if (arg > 700.0) return nu0();  // exp would overflow; deep in the clipped range
    return std::min(k1 + k2 * std::exp(arg), nu0());
  }
  // d(nu)/ds divided by s; finite at s = 0 (limit 2*k2*k3 for the saturation
  // law) and zero in the clipped range.
  double iron_dnu_ds_over_s(double s) const {
    if (law == Law::linear) return 0.0;
    double arg = k3 * s * s;
    if (arg > 700.0 || k1 + k2 * std::exp(arg) >= nu0()) return 0.0;
    return 2.0 * k2 * k3 * std::exp(arg);
  }

  struct Validation {
    bool positive = false;        // nu(s) > 0
    bool monotone_flux = false;   // d/ds [nu(s) s] > 0
    bool below_air = false;       // nu(s) <= nu0
    double worst_flux_slope = 0;  // min sampled d/ds [nu(s) s]
  };
  // Samples s in [0, s_max] and checks the three material-law conditions.
  Validation validate(double s_max = 3.0, int samples = 301) const;
};

// Two opposing coil sectors carrying a signed current density; the machine has
// one pole pair. amplitude is either a density (A/m^2) or a total current per
// coil (A) split by the coil area, selectable because the physical loading of
// the reference machine is specified only loosely.
struct CurrentExcitation {
  enum class Unit { current_density, total_current };

  double amplitude = 2.0e5;
  Unit unit = Unit::current_density;
  double field_angle_deg = 45.0;
  int pole_pairs = 1;

  // Signed density per coil id; throws if pole_pairs != 1.
  std::vector<double> coil_densities(const Mesh& mesh) const;
};

// Piecewise-constant current density per triangle.
struct SourceField {
  Eigen::VectorXd per_triangle;

  static SourceField zero(const Mesh& mesh) {
    SourceField s;
    s.per_triangle = Eigen::VectorXd::Zero(mesh.num_triangles());
    return s;
  }
  static SourceField from_excitation(const Mesh& mesh, const CurrentExcitation& ex);
};

// z-component of the magnetic vector potential on mesh vertices; zero on the
// outer Dirichlet boundary.
struct NodalField {
  Eigen::VectorXd values;
};

Eigen::VectorXd assemble_load(const Mesh& mesh, const SourceField& source);
Eigen::VectorXd assemble_residual(const Mesh& mesh, const NodalField& field,
                                  const ReluctivityModel& materials, const SourceField& source);
Eigen::SparseMatrix<double> assemble_tangent(const Mesh& mesh, const NodalField& field,
                                             const ReluctivityModel& materials);

// Per-triangle |grad u| = |B|.
Eigen::VectorXd flux_magnitude(const Mesh& mesh, const NodalField& field);

struct StateReport {
  int newton_iterations = 0;
  double residual_norm = 0.0;
  double load_norm = 0.0;
};

// Nonlinear solver bound to one mesh. Dirichlet rows are eliminated; vertices
// on outer_dirichlet edges are fixed to zero.
class FemSolver {
 public:
  explicit FemSolver(const Mesh& mesh);

  const std::vector<int>& free_index() const { return free_index_; }
  int num_free() const { return num_free_; }

  // Damped Newton with residual backtracking; returns the converged state.
  // Throws SolveError after max_iterations or a stalled line search.
  NodalField solve_state(const ReluctivityModel& materials, const SourceField& source,
                         const NodalField* initial_guess, double rel_tol,
                         StateReport* report = nullptr, int max_iterations = 50);

  // Solves A'(state)^T p = -rhs with p = 0 on Dirichlet vertices.
  NodalField solve_adjoint(const ReluctivityModel& materials, const NodalField& state,
                           const Eigen::VectorXd& rhs_full);

 private:
  const Mesh& mesh_;
  std::vector<int> free_index_;  // vertex -> free dof, -1 when fixed
  std::vector<int> free_vertex_;
  int num_free_ = 0;

  Eigen::VectorXd reduce(const Eigen::VectorXd& full) const;
  void scatter(const Eigen::VectorXd& reduced, Eigen::VectorXd& full) const;
  Eigen::SparseMatrix<double> reduce_matrix(const Eigen::SparseMatrix<double>& full) const;
};

}  // namespace paretotrace
