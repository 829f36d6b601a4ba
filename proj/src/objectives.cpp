#include "paretotrace/objectives.hpp"

#include <cmath>
#include <set>

namespace paretotrace {

namespace {

Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

struct Element {
  std::array<int, 3> v;
  std::array<Vec2, 3> e;  // e_i = p_{i+2} - p_{i+1}
  double d;               // 2 * area
  Vec2 w;                 // sum u_i e_i; grad u = perp(w) / d
  double s;               // |grad u|
};

Element element_state(const Mesh& mesh, const NodalField& u, int t) {
  Element el;
  el.v = mesh.triangles[t].v;
  const std::array<Vec2, 3> p = {mesh.vertices[el.v[0]], mesh.vertices[el.v[1]],
                                 mesh.vertices[el.v[2]]};
  for (int i = 0; i < 3; ++i) el.e[i] = p[(i + 2) % 3] - p[(i + 1) % 3];
  el.d = p[1].x() * p[2].y() - p[2].x() * p[1].y() - p[0].x() * (p[2].y() - p[1].y()) +
         p[0].y() * (p[2].x() - p[1].x());
  el.w = Vec2::Zero();
  for (int i = 0; i < 3; ++i) el.w += u.values(el.v[i]) * el.e[i];
  el.s = el.w.norm() / el.d;
  return el;
}

}  // namespace

Eigen::Matrix2d q_matrix(double x1, double x2) {
  double r = std::hypot(x1, x2);
  if (r == 0.0) throw std::invalid_argument("q_matrix is singular at the origin");
  Eigen::Matrix2d q;
  double off = 0.5 * (x2 * x2 - x1 * x1);
  q << x1 * x2, off, off, -x1 * x2;
  return q / r;
}

double torque_arkkio(const Mesh& mesh, const NodalField& field, const GapGeometry& gap) {
  if (gap.r1 >= gap.r2) throw GeometryError("torque ring requires r1 < r2");
  double sum = 0.0;
  bool any = false;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.triangles[t].region != Region::gap_ring) continue;
    any = true;
    Element el = element_state(mesh, field, t);
    Vec2 gu = perp(el.w) / el.d;
    Vec2 c = (mesh.vertices[el.v[0]] + mesh.vertices[el.v[1]] + mesh.vertices[el.v[2]]) / 3.0;
    sum += 0.5 * el.d * gu.dot(q_matrix(c.x(), c.y()) * gu);
  }
  if (!any) throw GeometryError("mesh has no gap ring region");
  return -ReluctivityModel::nu0() * gap.axial_length / (gap.r2 - gap.r1) * sum;
}

double iron_volume(const Mesh& mesh, double axial_length) {
  double area = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.triangles[t].region == Region::iron && mesh.rotor_triangle[t]) {
      area += triangle_area(mesh, t);
    }
  }
  return axial_length * area;
}

Eigen::VectorXd torque_state_derivative(const Mesh& mesh, const NodalField& field,
                                        const GapGeometry& gap) {
  Eigen::VectorXd djdu = Eigen::VectorXd::Zero(mesh.num_vertices());
  const double scale = -ReluctivityModel::nu0() * gap.axial_length / (gap.r2 - gap.r1);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.triangles[t].region != Region::gap_ring) continue;
    Element el = element_state(mesh, field, t);
    Vec2 gu = perp(el.w) / el.d;
    Vec2 c = (mesh.vertices[el.v[0]] + mesh.vertices[el.v[1]] + mesh.vertices[el.v[2]]) / 3.0;
    Vec2 qgu = q_matrix(c.x(), c.y()) * gu;
    for (int i = 0; i < 3; ++i) {
      Vec2 grad_i = perp(el.e[i]) / el.d;
      djdu(el.v[i]) += scale * el.d * qgu.dot(grad_i);  // 0.5 * d * 2 * (Q gu . grad_i)
    }
  }
  return djdu;
}

void accumulate_residual_shape_derivative(const Mesh& mesh, const NodalField& state,
                                          const NodalField& adjoint,
                                          const ReluctivityModel& materials,
                                          const SourceField& source, std::vector<Vec2>& out) {
  if (static_cast<int>(out.size()) != mesh.num_vertices()) {
    throw std::invalid_argument("output covector size mismatch");
  }
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Triangle& tri = mesh.triangles[t];
    Element el = element_state(mesh, state, t);
    const bool iron = tri.region == Region::iron;
    double nu = iron ? materials.iron_nu(el.s) : ReluctivityModel::nu0();
    double dnu = iron ? el.s * materials.iron_dnu_ds_over_s(el.s) : 0.0;  // d(nu)/ds
    double j = source.per_triangle(t);

    const double inv_d = 1.0 / el.d;
    std::array<double, 3> du;  // d w / d p_k = du_k * I
    for (int k = 0; k < 3; ++k) {
      du[k] = state.values(el.v[(k + 1) % 3]) - state.values(el.v[(k + 2) % 3]);
    }
    Vec2 w_hat = el.s > 0.0 ? Vec2(el.w / el.w.norm()) : Vec2::Zero();

    for (int k = 0; k < 3; ++k) {
      Vec2 dd = perp(el.e[k]);  // d(2A)/dp_k
      // d s / d p_k
      Vec2 ds = du[k] * inv_d * w_hat - el.s * inv_d * dd;
      for (int i = 0; i < 3; ++i) {
        double pv = adjoint.values(el.v[i]);
        if (pv == 0.0) continue;
        double we_i = el.w.dot(el.e[i]);
        // d(w . e_i)/dp_k: du_k e_i plus w moved by de_i/dp_k
        Vec2 dwe = du[k] * el.e[i];
        if (k == (i + 2) % 3) dwe += el.w;
        if (k == (i + 1) % 3) dwe -= el.w;
        Vec2 dr = dnu * ds * (we_i * 0.5 * inv_d) + nu * 0.5 * inv_d * dwe -
                  nu * we_i * 0.5 * inv_d * inv_d * dd - (j / 6.0) * dd;
        out[el.v[k]] += pv * dr;
      }
    }
  }
}

void accumulate_iron_area_gradient(const Mesh& mesh, std::vector<Vec2>& out) {
  if (static_cast<int>(out.size()) != mesh.num_vertices()) {
    throw std::invalid_argument("output covector size mismatch");
  }
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Triangle& tri = mesh.triangles[t];
    if (tri.region != Region::iron || !mesh.rotor_triangle[t]) continue;
    const std::array<Vec2, 3> p = {mesh.vertices[tri.v[0]], mesh.vertices[tri.v[1]],
                                   mesh.vertices[tri.v[2]]};
    for (int k = 0; k < 3; ++k) {
      Vec2 e = p[(k + 2) % 3] - p[(k + 1) % 3];
      out[tri.v[k]] += 0.5 * perp(e);
    }
  }
}

ShapeGradient shape_gradient(const Mesh& mesh, const ReluctivityModel& materials,
                             const SourceField& source, const GapGeometry& gap,
                             Objective objective, const NodalField& state, FemSolver& solver) {
  ShapeGradient g;
  g.boundary = extract_design_boundary(mesh);

  std::vector<Vec2> full(mesh.num_vertices(), Vec2::Zero());
  if (objective == Objective::volume) {
    accumulate_iron_area_gradient(mesh, full);
    for (auto& v : full) v *= gap.axial_length;
  } else {
    Eigen::VectorXd rhs = torque_state_derivative(mesh, state, gap);
    NodalField p = solver.solve_adjoint(materials, state, rhs);
    accumulate_residual_shape_derivative(mesh, state, p, materials, source, full);
    // The ring carrying the torque integrand never touches design vertices,
    // so the explicit geometric term of J1 vanishes.
  }

  g.covector.reserve(g.boundary.size());
  g.normal_component.resize(static_cast<Eigen::Index>(g.boundary.size()));
  for (std::size_t k = 0; k < g.boundary.size(); ++k) {
    const DesignVertex& dv = g.boundary[k];
    g.covector.push_back(full[dv.vertex]);
    g.normal_component(static_cast<Eigen::Index>(k)) = full[dv.vertex].dot(dv.normal);
  }
  g.full_covector = std::move(full);
  return g;
}

}  // namespace paretotrace
