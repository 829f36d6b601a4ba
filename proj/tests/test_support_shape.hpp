#pragma once

#include "paretotrace/objectives.hpp"
#include "test_support.hpp"

#include <random>
#include <vector>

namespace test_support {

using namespace paretotrace;

// Random direction supported on the design vertices, scaled so the largest
// vertex move is a small fraction of the local interface spacing.
inline std::vector<Vec2> random_interface_direction(const Mesh& mesh,
                                                    const std::vector<DesignVertex>& boundary,
                                                    std::mt19937& gen) {
  std::normal_distribution<double> dist;
  std::vector<Vec2> dir(mesh.num_vertices(), Vec2::Zero());
  double vmax = 0.0;
  double hmin = std::numeric_limits<double>::max();
  for (const auto& dv : boundary) {
    dir[dv.vertex] = Vec2(dist(gen), dist(gen));
    vmax = std::max(vmax, dir[dv.vertex].norm());
    hmin = std::min(hmin, dv.lumped_length);
  }
  for (auto& v : dir) v *= 0.5 * hmin / vmax;
  return dir;
}

struct TaylorResult {
  double slope = 0.0;
  std::vector<double> errors;
};

// Compares J(X + eps V) against the first-order model J(X) + eps g.V with the
// state re-solved at every perturbed design; reports the observed order.
inline TaylorResult taylor_test(const Mesh& mesh, const ReluctivityModel& materials,
                                const SourceField& source, const GapGeometry& gap,
                                Objective objective, const std::vector<Vec2>& direction,
                                const std::vector<double>& epsilons) {
  FemSolver solver(mesh);
  NodalField state = solver.solve_state(materials, source, nullptr, 1e-13);
  ShapeGradient g = shape_gradient(mesh, materials, source, gap, objective, state, solver);

  auto value = [&](const Mesh& m, const NodalField* guess) {
    if (objective == Objective::volume) return iron_volume(m, gap.axial_length);
    FemSolver s(m);
    NodalField u = s.solve_state(materials, source, guess, 1e-13);
    return torque_arkkio(m, u, gap);
  };

  double j0 = value(mesh, &state);
  double gv = 0.0;
  for (std::size_t k = 0; k < g.boundary.size(); ++k) {
    gv += g.covector[k].dot(direction[g.boundary[k].vertex]);
  }

  TaylorResult result;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double eps : epsilons) {
    auto step = apply_deformation(mesh, direction, eps);
    if (!step.ok) throw std::runtime_error("taylor_test: perturbation inverted the mesh");
    double je = value(step.mesh, &state);
    double err = std::abs(je - j0 - eps * gv);
    result.errors.push_back(err);
    double lx = std::log10(eps), ly = std::log10(std::max(err, 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double n = static_cast<double>(epsilons.size());
  result.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return result;
}

}  // namespace test_support
