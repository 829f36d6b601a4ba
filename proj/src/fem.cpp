#include "paretotrace/fem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace paretotrace {

namespace {

struct ElementGeom {
  double area;
  std::array<Vec2, 3> grad;  // P1 basis gradients, constant per triangle
};

ElementGeom element_geometry(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  const Vec2& p0 = mesh.vertices[tri.v[0]];
  const Vec2& p1 = mesh.vertices[tri.v[1]];
  const Vec2& p2 = mesh.vertices[tri.v[2]];
  double d = 2.0 * signed_area(p0, p1, p2);
  ElementGeom g;
  g.area = 0.5 * d;
  const std::array<Vec2, 3> p = {p0, p1, p2};
  for (int i = 0; i < 3; ++i) {
    Vec2 e = p[(i + 2) % 3] - p[(i + 1) % 3];
    g.grad[i] = Vec2(-e.y(), e.x()) / d;
  }
  return g;
}

bool is_iron(const Triangle& t) { return t.region == Region::iron; }

}  // namespace

ReluctivityModel::Validation ReluctivityModel::validate(double s_max, int samples) const {
  Validation v;
  v.positive = true;
  v.monotone_flux = true;
  v.below_air = true;
  v.worst_flux_slope = std::numeric_limits<double>::max();
  for (int i = 0; i < samples; ++i) {
    double s = s_max * i / (samples - 1);
    double nu = iron_nu(s);
    double dnu_over_s = iron_dnu_ds_over_s(s);
    double flux_slope = nu + s * s * dnu_over_s;  // d/ds [nu(s) s]
    if (!(nu > 0.0)) v.positive = false;
    if (!(flux_slope > 0.0)) v.monotone_flux = false;
    if (!(nu <= nu0())) v.below_air = false;
    v.worst_flux_slope = std::min(v.worst_flux_slope, flux_slope);
  }
  return v;
}

std::vector<double> CurrentExcitation::coil_densities(const Mesh& mesh) const {
  if (pole_pairs != 1) {
    throw std::invalid_argument("only one pole pair is supported");
  }
  int max_coil = -1;
  for (const auto& t : mesh.triangles) {
    if (t.region == Region::coil) max_coil = std::max(max_coil, static_cast<int>(t.coil));
  }
  if (max_coil < 0) return {};
  std::vector<double> area(max_coil + 1, 0.0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.triangles[t].region == Region::coil) {
      area[mesh.triangles[t].coil] += triangle_area(mesh, t);
    }
  }
  std::vector<double> density(max_coil + 1, 0.0);
  for (int k = 0; k <= max_coil; ++k) {
    double sign = (k % 2 == 0) ? 1.0 : -1.0;
    if (unit == Unit::current_density) {
      density[k] = sign * amplitude;
    } else {
      if (area[k] <= 0.0) throw GeometryError("coil region " + std::to_string(k) + " is empty");
      density[k] = sign * amplitude / area[k];
    }
  }
  return density;
}

SourceField SourceField::from_excitation(const Mesh& mesh, const CurrentExcitation& ex) {
  SourceField s = SourceField::zero(mesh);
  auto density = ex.coil_densities(mesh);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    if (tri.region == Region::coil) s.per_triangle(t) = density[tri.coil];
  }
  return s;
}

namespace {

std::vector<std::uint8_t> dirichlet_flags(const Mesh& mesh) {
  std::vector<std::uint8_t> fixed(mesh.num_vertices(), 0);
  for (const auto& e : mesh.marked_edges) {
    if (e.marker == EdgeMarker::outer_dirichlet) {
      fixed[e.a] = 1;
      fixed[e.b] = 1;
    }
  }
  return fixed;
}

}  // namespace

Eigen::VectorXd assemble_load(const Mesh& mesh, const SourceField& source) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    double j = source.per_triangle(t);
    if (j == 0.0) continue;
    double a = triangle_area(mesh, t);
    for (int v : mesh.triangles[t].v) f(v) += a * j / 3.0;
  }
  auto fixed = dirichlet_flags(mesh);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (fixed[v]) f(v) = 0.0;
  }
  return f;
}

Eigen::VectorXd assemble_residual(const Mesh& mesh, const NodalField& field,
                                  const ReluctivityModel& materials, const SourceField& source) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    ElementGeom g = element_geometry(mesh, t);
    Vec2 gu = Vec2::Zero();
    for (int i = 0; i < 3; ++i) gu += field.values(tri.v[i]) * g.grad[i];
    double s = gu.norm();
    double nu = is_iron(tri) ? materials.iron_nu(s) : ReluctivityModel::nu0();
    double j = source.per_triangle(t);
    for (int i = 0; i < 3; ++i) {
      r(tri.v[i]) += g.area * (nu * gu.dot(g.grad[i]) - j / 3.0);
    }
  }
  auto fixed = dirichlet_flags(mesh);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (fixed[v]) r(v) = 0.0;
  }
  return r;
}

Eigen::SparseMatrix<double> assemble_tangent(const Mesh& mesh, const NodalField& field,
                                             const ReluctivityModel& materials) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    ElementGeom g = element_geometry(mesh, t);
    Vec2 gu = Vec2::Zero();
    for (int i = 0; i < 3; ++i) gu += field.values(tri.v[i]) * g.grad[i];
    double s = gu.norm();
    double nu = is_iron(tri) ? materials.iron_nu(s) : ReluctivityModel::nu0();
    double c = is_iron(tri) ? materials.iron_dnu_ds_over_s(s) : 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double k = g.area * (nu * g.grad[i].dot(g.grad[j]) +
                             c * gu.dot(g.grad[i]) * gu.dot(g.grad[j]));
        trip.emplace_back(tri.v[i], tri.v[j], k);
      }
    }
  }
  Eigen::SparseMatrix<double> m(mesh.num_vertices(), mesh.num_vertices());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

Eigen::VectorXd flux_magnitude(const Mesh& mesh, const NodalField& field) {
  Eigen::VectorXd b(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    ElementGeom g = element_geometry(mesh, t);
    Vec2 gu = Vec2::Zero();
    for (int i = 0; i < 3; ++i) gu += field.values(tri.v[i]) * g.grad[i];
    b(t) = gu.norm();
  }
  return b;
}

FemSolver::FemSolver(const Mesh& mesh) : mesh_(mesh) {
  auto fixed = dirichlet_flags(mesh);
  free_index_.assign(mesh.num_vertices(), -1);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (!fixed[v]) {
      free_index_[v] = num_free_++;
      free_vertex_.push_back(v);
    }
  }
}

Eigen::VectorXd FemSolver::reduce(const Eigen::VectorXd& full) const {
  Eigen::VectorXd r(num_free_);
  for (int i = 0; i < num_free_; ++i) r(i) = full(free_vertex_[i]);
  return r;
}

void FemSolver::scatter(const Eigen::VectorXd& reduced, Eigen::VectorXd& full) const {
  for (int i = 0; i < num_free_; ++i) full(free_vertex_[i]) = reduced(i);
}

Eigen::SparseMatrix<double> FemSolver::reduce_matrix(const Eigen::SparseMatrix<double>& full) const {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(full.nonZeros());
  for (int col = 0; col < full.outerSize(); ++col) {
    int jc = free_index_[col];
    if (jc < 0) continue;
    for (Eigen::SparseMatrix<double>::InnerIterator it(full, col); it; ++it) {
      int ir = free_index_[it.row()];
      if (ir >= 0) trip.emplace_back(ir, jc, it.value());
    }
  }
  Eigen::SparseMatrix<double> m(num_free_, num_free_);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

NodalField FemSolver::solve_state(const ReluctivityModel& materials, const SourceField& source,
                                  const NodalField* initial_guess, double rel_tol,
                                  StateReport* report, int max_iterations) {
  NodalField u;
  u.values = Eigen::VectorXd::Zero(mesh_.num_vertices());
  if (initial_guess && initial_guess->values.size() == mesh_.num_vertices()) {
    u.values = initial_guess->values;
    for (int v = 0; v < mesh_.num_vertices(); ++v) {
      if (free_index_[v] < 0) u.values(v) = 0.0;
    }
  }

  Eigen::VectorXd f = assemble_load(mesh_, source);
  // relative tolerance keeps the solve scale-invariant in the source strength
  const double tol_abs = rel_tol * std::max(std::numeric_limits<double>::min(), f.norm());
  Eigen::VectorXd r = assemble_residual(mesh_, u, materials, source);
  double rnorm = r.norm();

  constexpr double kDampingFloor = 1e-4;
  for (int it = 0; it < max_iterations; ++it) {
    if (rnorm <= tol_abs) {
      if (report) *report = {it, rnorm, f.norm()};
      return u;
    }
    Eigen::SparseMatrix<double> k = reduce_matrix(assemble_tangent(mesh_, u, materials));
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(k);
    if (ldlt.info() != Eigen::Success) {
      throw SolveError("state tangent factorization failed", rnorm, it);
    }
    Eigen::VectorXd delta = ldlt.solve(-reduce(r));

    double s = 1.0;
    NodalField trial = u;
    while (true) {
      Eigen::VectorXd step = s * delta;
      Eigen::VectorXd u_free = reduce(u.values) + step;
      scatter(u_free, trial.values);
      Eigen::VectorXd r_trial = assemble_residual(mesh_, trial, materials, source);
      double rt = r_trial.norm();
      bool sufficient = rt <= (1.0 - 1e-4 * s) * rnorm || rt <= tol_abs;
      if (std::isfinite(rt) && sufficient) {
        u = trial;
        r = std::move(r_trial);
        rnorm = rt;
        break;
      }
      s *= 0.5;
      if (s < kDampingFloor) {
        throw SolveError("state line search stalled", rnorm, it);
      }
    }
  }
  if (rnorm <= tol_abs) {
    if (report) *report = {max_iterations, rnorm, f.norm()};
    return u;
  }
  throw SolveError("state Newton did not converge", rnorm, max_iterations);
}

NodalField FemSolver::solve_adjoint(const ReluctivityModel& materials, const NodalField& state,
                                    const Eigen::VectorXd& rhs_full) {
  // The tangent is symmetric, so the transposed system reuses the same matrix.
  Eigen::SparseMatrix<double> k = reduce_matrix(assemble_tangent(mesh_, state, materials));
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(k);
  if (ldlt.info() != Eigen::Success) {
    throw SolveError("adjoint factorization failed (singular tangent)", 0.0, 0);
  }
  Eigen::VectorXd p_free = ldlt.solve(-reduce(rhs_full));
  NodalField p;
  p.values = Eigen::VectorXd::Zero(mesh_.num_vertices());
  scatter(p_free, p.values);
  return p;
}

}  // namespace paretotrace
