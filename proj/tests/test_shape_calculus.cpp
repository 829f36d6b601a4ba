#include <doctest.h>

#include "paretotrace/motor_problem.hpp"
#include "paretotrace/shape_calculus.hpp"

#include <random>

using namespace paretotrace;

namespace {

GeometryDescriptor coarse_geometry() {
  GeometryDescriptor g;
  g.mesh_size = 0.006;
  return g;
}

MotorSettings default_settings(const GeometryDescriptor& g) {
  MotorSettings s;
  s.gap = GapGeometry{g.gap_r1, g.gap_r2, 0.1};
  return s;
}

// Analytic reduced Hessian of the polygon area in normal-amplitude
// coordinates, including the rotation of the recomputed vertex normals. Serves
// as an independent oracle for the finite-difference Hessian at t = 1.
Eigen::MatrixXd analytic_area_reduced_hessian(const Mesh& mesh,
                                              const std::vector<DesignVertex>& bd,
                                              double axial_length) {
  const int n = static_cast<int>(bd.size());
  std::vector<int> pos(mesh.num_vertices(), -1);
  for (int k = 0; k < n; ++k) pos[bd[k].vertex] = k;

  // ordered polygon follows the bd sequence
  auto vertex = [&](int k) -> Vec2 { return mesh.vertices[bd[(k % n + n) % n].vertex]; };
  auto normal_of = [&](const Vec2& a, const Vec2& b) -> Vec2 {
    Vec2 d = b - a;
    return Vec2(d.y(), -d.x()) / d.norm();  // iron kept on the left
  };

  // g_k(alpha) = dA/dx_k . n_k(x); differentiate w.r.t. alpha_j numerically on
  // the *polygon* (cheap, exact up to 1e-8) -- an independent route from the
  // implementation's PDE-grade machinery.
  auto reduced_gradient = [&](const Eigen::VectorXd& alpha) {
    std::vector<Vec2> p(n);
    for (int k = 0; k < n; ++k) p[k] = vertex(k) + alpha(k) * bd[k].normal;
    Eigen::VectorXd g(n);
    for (int k = 0; k < n; ++k) {
      const Vec2& prev = p[(k + n - 1) % n];
      const Vec2& next = p[(k + 1) % n];
      Vec2 area_grad = 0.5 * Vec2((next - prev).y(), -(next - prev).x());
      // sign: polygon traversal keeps iron on the left of each edge
      Vec2 n1 = normal_of(prev, p[k]);
      Vec2 n2 = normal_of(p[k], next);
      Vec2 nk = (n1 + n2).normalized();
      g(k) = axial_length * area_grad.dot(nk);
    }
    return g;
  };

  const double h = 1e-4 * bd[0].lumped_length;
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd hess(n, n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd ap = zero, am = zero;
    ap(j) += h;
    am(j) -= h;
    hess.col(j) = (reduced_gradient(ap) - reduced_gradient(am)) / (2.0 * h);
  }
  return 0.5 * (hess + hess.transpose());
}

}  // namespace

TEST_CASE("descent direction: zero gradient gives the zero field") {
  Mesh mesh = build_reference_geometry(coarse_geometry());
  ShapeGradient g;
  g.boundary = extract_design_boundary(mesh);
  g.covector.assign(g.boundary.size(), Vec2::Zero());
  g.normal_component = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.boundary.size()));
  for (auto metric : {DeformationMetric::h1_elastic, DeformationMetric::h1_laplace}) {
    MetricConfig cfg{metric, 0.0, 1.0};
    auto v = descent_direction(mesh, g, cfg);
    for (const auto& w : v) CHECK(w.norm() == 0.0);
  }
}

TEST_CASE("descent direction: negative pairing with the gradient") {
  Mesh mesh = build_reference_geometry(coarse_geometry());
  ShapeGradient g;
  g.boundary = extract_design_boundary(mesh);
  std::mt19937 gen(41);
  std::normal_distribution<double> dist;
  g.covector.resize(g.boundary.size());
  for (auto& c : g.covector) c = Vec2(dist(gen), dist(gen));
  for (auto metric : {DeformationMetric::h1_elastic, DeformationMetric::h1_laplace}) {
    MetricConfig cfg{metric, 0.0, 1.0};
    auto v = descent_direction(mesh, g, cfg);
    double pairing = 0.0;
    for (std::size_t k = 0; k < g.boundary.size(); ++k) {
      pairing += g.covector[k].dot(v[g.boundary[k].vertex]);
    }
    CHECK(pairing < 0.0);
    // immovable vertices stay put
    for (int vert = 0; vert < mesh.num_vertices(); ++vert) {
      if (!mesh.movable[vert]) CHECK(v[vert].norm() == 0.0);
    }
  }
}

TEST_CASE("descent direction: volume gradient on a disk points inward") {
  GeometryDescriptor gd = coarse_geometry();
  gd.bar_style = GeometryDescriptor::BarStyle::floating;
  gd.bar_straight_length = 0.0;
  gd.bar_half_width = 0.02;
  Mesh mesh = build_reference_geometry(gd);
  MotorSettings settings = default_settings(gd);
  MotorProblem problem = MotorProblem::for_mesh(mesh, settings);
  MotorDesign design = problem.make_design(mesh);
  const auto& covs = problem.gradient_covectors(design);
  const auto& bd = problem.boundary(design);
  ShapeGradient g;
  g.boundary = bd;
  g.full_covector = covs.second;  // volume, per-vertex field
  auto v = descent_direction(mesh, g, MetricConfig{});
  for (const auto& dv : bd) {
    CHECK(v[dv.vertex].dot(dv.normal) < 0.0);  // shrinks the iron
  }
}

TEST_CASE("extension: exact on the interface data, zero on pinned vertices") {
  Mesh mesh = build_reference_geometry(coarse_geometry());
  auto bd = extract_design_boundary(mesh);
  std::mt19937 gen(43);
  std::normal_distribution<double> dist;
  Eigen::VectorXd alpha(static_cast<Eigen::Index>(bd.size()));
  for (Eigen::Index i = 0; i < alpha.size(); ++i) alpha(i) = 1e-4 * dist(gen);

  for (auto metric : {DeformationMetric::h1_laplace, DeformationMetric::h1_elastic}) {
    auto v = extend_to_interior(mesh, bd, alpha, MetricConfig{metric, 0.0, 1.0});
    for (std::size_t k = 0; k < bd.size(); ++k) {
      double a = alpha(static_cast<Eigen::Index>(k));
      CHECK((v[bd[k].vertex] - a * bd[k].normal).norm() == 0.0);
      // tangential motion is excluded by the parametrization; the dot with
      // the stored tangent is pure rounding of a * (n . tau) with n . tau = 0
      CHECK(bd[k].normal.dot(bd[k].tangent) == 0.0);
      CHECK(std::abs(v[bd[k].vertex].dot(bd[k].tangent)) <= 1e-15 * std::abs(a));
    }
    for (int vert = 0; vert < mesh.num_vertices(); ++vert) {
      if (!mesh.movable[vert]) CHECK(v[vert].norm() == 0.0);
    }
  }

  // zero data extends to zero
  auto v0 = extend_to_interior(mesh, bd, Eigen::VectorXd::Zero(alpha.size()), MetricConfig{});
  for (const auto& w : v0) CHECK(w.norm() == 0.0);
}

TEST_CASE("extension: harmonic extension obeys the maximum principle") {
  Mesh mesh = build_reference_geometry(coarse_geometry());
  auto bd = extract_design_boundary(mesh);
  std::mt19937 gen(47);
  std::normal_distribution<double> dist;
  Eigen::VectorXd alpha(static_cast<Eigen::Index>(bd.size()));
  for (Eigen::Index i = 0; i < alpha.size(); ++i) alpha(i) = 1e-4 * dist(gen);
  auto v = extend_to_interior(mesh, bd, alpha, MetricConfig{DeformationMetric::h1_laplace, 0, 1});
  double boundary_max = 0.0;
  for (std::size_t k = 0; k < bd.size(); ++k) {
    boundary_max = std::max(boundary_max, v[bd[k].vertex].norm());
  }
  for (int vert = 0; vert < mesh.num_vertices(); ++vert) {
    CHECK(v[vert].norm() <= boundary_max * (1.0 + 1e-12));
  }
}

TEST_CASE("stabilized solve: symmetrizes, preserves signs, floors tiny eigenvalues") {
  Eigen::MatrixXd h(3, 3);
  h << 4.0, 1.0, 0.0,
       1.0, -2.0, 0.0,
       0.0, 0.0, 1e-18;
  Eigen::VectorXd rhs(3);
  rhs << 1.0, 2.0, 3.0;
  ShapeHessian info;
  Eigen::VectorXd x = solve_stabilized(h, rhs, &info);
  CHECK(info.shift > 0.0);  // the near-null eigenvalue was floored
  CHECK(info.min_abs_eigenvalue >= 1e-10 * 4.0 * (1.0 - 1e-12));
  CHECK((info.matrix - info.matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(x.allFinite());
  // an indefinite but well-conditioned matrix is solved exactly
  Eigen::MatrixXd h2 = h.topLeftCorner(2, 2);
  Eigen::VectorXd rhs2 = rhs.head(2);
  Eigen::VectorXd x2 = solve_stabilized(h2, rhs2);
  CHECK((h2 * x2 - rhs2).norm() < 1e-12);
}

TEST_CASE("newton direction: descent for the merit when the operator is definite") {
  Eigen::MatrixXd h(2, 2);
  h << 3.0, 0.5, 0.5, 2.0;
  Eigen::VectorXd g(2);
  g << 0.3, -0.7;
  Eigen::VectorXd alpha = solve_stabilized(h, -g);
  CHECK(g.dot(-alpha) > 0.0);  // g^T H^{-1} g > 0
}

TEST_CASE("shape hessian: symmetric by construction and quadratic-model consistent") {
  GeometryDescriptor gd = coarse_geometry();
  Mesh mesh = build_reference_geometry(gd);
  MotorSettings settings = default_settings(gd);
  MotorProblem problem = MotorProblem::for_mesh(mesh, settings);
  MotorDesign design = problem.make_design(mesh);

  ShapeHessian sh = shape_hessian(problem, design, 0.3);
  CHECK((sh.matrix - sh.matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);

  // residual of g(alpha) ~ g(0) + H alpha is O(|alpha|^2) for the same
  // boundary-supported perturbation map the columns differentiate
  auto [h1, h2] = problem.hessians(design);
  Eigen::MatrixXd h = 0.7 * h1 + 0.3 * h2;
  Eigen::VectorXd g0 = homotopy_residual(problem, design, 0.3);
  const auto& bd = problem.boundary(design);
  std::mt19937 gen(53);
  std::normal_distribution<double> dist;
  Eigen::VectorXd dir(g0.size());
  for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = dist(gen);
  dir *= 1.0 / dir.norm();

  auto boundary_only = [&](const Eigen::VectorXd& alpha) {
    std::vector<Vec2> disp(design.mesh.num_vertices(), Vec2::Zero());
    for (std::size_t k = 0; k < bd.size(); ++k) {
      disp[bd[k].vertex] = alpha(static_cast<Eigen::Index>(k)) * bd[k].normal;
    }
    DeformResult moved = apply_deformation(design.mesh, disp, 1.0);
    REQUIRE(moved.ok);
    return problem.make_design(std::move(moved.mesh));
  };

  double err_prev = -1.0;
  for (double scale : {4e-4, 2e-4}) {
    Eigen::VectorXd alpha = scale * dir;
    MotorDesign moved = boundary_only(alpha);
    Eigen::VectorXd g1v = homotopy_residual(problem, moved, 0.3);
    double err = (g1v - g0 - h * alpha).norm();
    CHECK(err < 0.05 * (g1v - g0).norm());  // the linear model explains the change
    if (err_prev > 0.0) CHECK(err < 0.45 * err_prev);  // ~O(|alpha|^2)
    err_prev = err;
  }

  // the interior extension changes the map only at higher order: the same
  // model still explains most of the gradient change through try_step
  Eigen::VectorXd alpha = 2e-4 * dir;
  MotorDesign via_step;
  REQUIRE(problem.try_step(design, alpha, via_step));
  Eigen::VectorXd g_step = homotopy_residual(problem, via_step, 0.3);
  CHECK((g_step - g0 - h * alpha).norm() < 0.1 * (g_step - g0).norm());
}

TEST_CASE("shape hessian: volume Hessian matches the analytic polygon oracle") {
  GeometryDescriptor gd = coarse_geometry();
  gd.bar_style = GeometryDescriptor::BarStyle::floating;
  gd.bar_half_width = 0.015;
  gd.bar_straight_length = 0.04;
  Mesh mesh = build_reference_geometry(gd);
  MotorSettings settings = default_settings(gd);
  MotorProblem problem = MotorProblem::for_mesh(mesh, settings);
  MotorDesign design = problem.make_design(mesh);

  auto [h1, h2] = problem.hessians(design);
  const auto& bd = problem.boundary(design);
  Eigen::MatrixXd oracle = analytic_area_reduced_hessian(mesh, bd, settings.gap.axial_length);
  Eigen::MatrixXd fd = 0.5 * (h2 + h2.transpose());
  double scale = oracle.cwiseAbs().maxCoeff();
  CHECK((fd - oracle).cwiseAbs().maxCoeff() < 0.05 * scale);

  // rows touch only the vertex itself and its near neighbours along the loop
  const int n = static_cast<int>(bd.size());
  int far_violations = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      int dist_ring = std::min(std::abs(i - j), n - std::abs(i - j));
      if (dist_ring > 2 && std::abs(oracle(i, j)) > 1e-6 * scale) ++far_violations;
    }
  }
  CHECK(far_violations == 0);
}
