#include <doctest.h>

#include "paretotrace/fem.hpp"
#include "paretotrace/reference_geometry.hpp"
#include "test_support.hpp"

#include <random>

using namespace paretotrace;
using test_support::unit_square;

TEST_CASE("reluctivity: saturation law satisfies the material conditions") {
  ReluctivityModel m;  // defaults
  auto v = m.validate();
  CHECK(v.positive);
  CHECK(v.monotone_flux);
  CHECK(v.below_air);
  // limit of nu'(s)/s at s = 0
  CHECK(m.iron_dnu_ds_over_s(0.0) == doctest::Approx(2.0 * m.k2 * m.k3));
}

TEST_CASE("reluctivity: negative exponent with a dominant exponential breaks monotonicity") {
  ReluctivityModel m;
  m.law = ReluctivityModel::Law::brauer;
  m.k1 = 1.0;
  m.k2 = 1000.0;
  m.k3 = -2.0;
  auto v = m.validate();
  CHECK(v.positive);
  CHECK_FALSE(v.monotone_flux);
}

TEST_CASE("excitation: coil densities sum to zero current") {
  Mesh mesh = build_reference_geometry(GeometryDescriptor{});
  CurrentExcitation ex;
  for (auto unit : {CurrentExcitation::Unit::current_density, CurrentExcitation::Unit::total_current}) {
    ex.unit = unit;
    SourceField s = SourceField::from_excitation(mesh, ex);
    double net = 0.0;
    bool any = false;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      net += s.per_triangle(t) * triangle_area(mesh, t);
      any = any || s.per_triangle(t) != 0.0;
    }
    CHECK(any);
    CHECK(std::abs(net) < 1e-12 * ex.amplitude);
  }
}

TEST_CASE("residual: zero field and zero source give a zero residual") {
  Mesh mesh = unit_square(8);
  NodalField u;
  u.values = Eigen::VectorXd::Zero(mesh.num_vertices());
  ReluctivityModel m;
  auto r = assemble_residual(mesh, u, m, SourceField::zero(mesh));
  CHECK(r.norm() == 0.0);
}

TEST_CASE("residual: consistent with the linear system solution") {
  Mesh mesh = unit_square(12);
  ReluctivityModel m;
  m.law = ReluctivityModel::Law::linear;
  m.nu_linear = 7.5;
  SourceField src = test_support::manufactured_source(mesh, m.nu_linear);
  FemSolver solver(mesh);
  NodalField u = solver.solve_state(m, src, nullptr, 1e-13);
  auto r = assemble_residual(mesh, u, m, src);
  auto f = assemble_load(mesh, src);
  CHECK(r.norm() < 1e-12 * f.norm());
}

TEST_CASE("residual: interpolated manufactured solution gives O(h) residual") {
  ReluctivityModel m;
  m.law = ReluctivityModel::Law::linear;
  m.nu_linear = 1.0;
  double prev = 0.0;
  for (int n : {8, 16}) {
    Mesh mesh = unit_square(n);
    SourceField src = test_support::manufactured_source(mesh, m.nu_linear);
    NodalField u = test_support::interpolate(mesh, test_support::manufactured_u);
    double rn = assemble_residual(mesh, u, m, src).norm();
    if (prev > 0.0) CHECK(rn < 0.75 * prev);  // at least first-order decay
    prev = rn;
  }
}

TEST_CASE("tangent: linear law reproduces the stiffness matrix independent of the field") {
  Mesh mesh = unit_square(6);
  ReluctivityModel m;
  m.law = ReluctivityModel::Law::linear;
  m.nu_linear = 3.0;
  NodalField zero, rand_field;
  zero.values = Eigen::VectorXd::Zero(mesh.num_vertices());
  std::mt19937 gen(7);
  std::normal_distribution<double> dist;
  rand_field.values = Eigen::VectorXd::NullaryExpr(mesh.num_vertices(), [&](Eigen::Index) {
    return dist(gen);
  });
  auto k0 = assemble_tangent(mesh, zero, m);
  auto k1 = assemble_tangent(mesh, rand_field, m);
  CHECK((Eigen::MatrixXd(k0) - Eigen::MatrixXd(k1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tangent: symmetric and matches a finite-difference directional derivative") {
  Mesh mesh = unit_square(6);
  ReluctivityModel m;  // nonlinear defaults
  std::mt19937 gen(11);
  std::normal_distribution<double> dist;
  NodalField u;
  u.values.resize(mesh.num_vertices());
  Eigen::VectorXd w(mesh.num_vertices());
  FemSolver solver(mesh);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    bool fixed = solver.free_index()[v] < 0;
    u.values(v) = fixed ? 0.0 : 0.02 * dist(gen);
    w(v) = fixed ? 0.0 : dist(gen);
  }
  auto k = assemble_tangent(mesh, u, m);
  CHECK((Eigen::MatrixXd(k) - Eigen::MatrixXd(k).transpose()).cwiseAbs().maxCoeff() < 1e-12);

  SourceField src = SourceField::zero(mesh);
  auto r0 = assemble_residual(mesh, u, m, src);
  double err_prev = -1.0;
  for (double eps : {1e-4, 1e-5}) {
    NodalField up;
    up.values = u.values + eps * w;
    auto r1 = assemble_residual(mesh, up, m, src);
    Eigen::VectorXd fd = (r1 - r0) / eps;
    Eigen::VectorXd kw = k * w;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      if (solver.free_index()[v] < 0) kw(v) = 0.0;  // residual rows are eliminated
    }
    double err = (fd - kw).norm() / kw.norm();
    if (err_prev >= 0.0) CHECK(err < 0.2 * err_prev);  // O(eps)
    err_prev = err;
  }
}

TEST_CASE("tangent: random restriction is positive definite under the monotone law") {
  Mesh mesh = unit_square(10);
  ReluctivityModel m;
  std::mt19937 gen(3);
  std::normal_distribution<double> dist;
  NodalField u;
  u.values.resize(mesh.num_vertices());
  FemSolver solver(mesh);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    u.values(v) = solver.free_index()[v] < 0 ? 0.0 : 0.02 * dist(gen);
  }
  auto k = Eigen::MatrixXd(assemble_tangent(mesh, u, m));
  std::vector<int> free;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (solver.free_index()[v] >= 0) free.push_back(v);
  }
  std::shuffle(free.begin(), free.end(), gen);
  int nsel = std::min<int>(50, static_cast<int>(free.size()));
  Eigen::MatrixXd sub(nsel, nsel);
  for (int i = 0; i < nsel; ++i) {
    for (int j = 0; j < nsel; ++j) sub(i, j) = k(free[i], free[j]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sub);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("solve_state: zero source returns the zero field immediately") {
  Mesh mesh = unit_square(8);
  ReluctivityModel m;
  FemSolver solver(mesh);
  StateReport rep;
  NodalField u = solver.solve_state(m, SourceField::zero(mesh), nullptr, 1e-10, &rep);
  CHECK(u.values.norm() == 0.0);
  CHECK(rep.newton_iterations == 0);
}

TEST_CASE("solve_state: manufactured solution converges at second order in L2") {
  ReluctivityModel m;
  m.law = ReluctivityModel::Law::linear;
  m.nu_linear = 2.0;
  Mesh mesh = unit_square(8);
  double prev_err = -1.0;
  for (int level = 0; level < 3; ++level) {
    SourceField src = test_support::manufactured_source(mesh, m.nu_linear);
    FemSolver solver(mesh);
    NodalField u = solver.solve_state(m, src, nullptr, 1e-12);
    double err = test_support::l2_error(mesh, u, test_support::manufactured_u);
    if (prev_err > 0.0) CHECK(prev_err / err >= 3.6);
    prev_err = err;
    mesh = uniform_refine(mesh);
  }
}

TEST_CASE("solve_state: linear solution map scales with the source") {
  Mesh mesh = unit_square(10);
  ReluctivityModel m;
  m.law = ReluctivityModel::Law::linear;
  m.nu_linear = 4.0;
  SourceField src = test_support::manufactured_source(mesh, m.nu_linear);
  SourceField src3 = src;
  src3.per_triangle *= 3.0;
  FemSolver solver(mesh);
  NodalField u1 = solver.solve_state(m, src, nullptr, 1e-13);
  NodalField u3 = solver.solve_state(m, src3, nullptr, 1e-13);
  CHECK((u3.values - 3.0 * u1.values).norm() < 1e-9 * u3.values.norm());
}

TEST_CASE("solve_state: energy identity holds for the linear law") {
  Mesh mesh = unit_square(10);
  ReluctivityModel m;
  m.law = ReluctivityModel::Law::linear;
  m.nu_linear = 2.5;
  SourceField src = test_support::manufactured_source(mesh, m.nu_linear);
  FemSolver solver(mesh);
  NodalField u = solver.solve_state(m, src, nullptr, 1e-13);
  double energy = 0.0;
  Eigen::VectorXd b = flux_magnitude(mesh, u);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    energy += m.nu_linear * triangle_area(mesh, t) * b(t) * b(t);
  }
  double work = assemble_load(mesh, src).dot(u.values);
  CHECK(std::abs(energy - work) < 1e-10 * std::abs(work));
}

TEST_CASE("solve_state: weak saturation matches the small-field linearization") {
  // At low excitation the saturation law behaves like LINEAR(nu(0)).
  GeometryDescriptor g;
  Mesh mesh = build_reference_geometry(g);
  CurrentExcitation ex;
  ex.amplitude = 1e3;  // weak source, |B| far below saturation
  SourceField src = SourceField::from_excitation(mesh, ex);

  ReluctivityModel brauer;  // defaults
  ReluctivityModel lin;
  lin.law = ReluctivityModel::Law::linear;
  lin.nu_linear = brauer.iron_nu(0.0);

  FemSolver solver(mesh);
  NodalField ub = solver.solve_state(brauer, src, nullptr, 1e-12);
  NodalField ul = solver.solve_state(lin, src, nullptr, 1e-12);
  CHECK((ub.values - ul.values).norm() < 0.01 * ul.values.norm());
}

TEST_CASE("solve_adjoint: zero rhs gives a zero adjoint") {
  Mesh mesh = unit_square(8);
  ReluctivityModel m;
  FemSolver solver(mesh);
  NodalField u;
  u.values = Eigen::VectorXd::Zero(mesh.num_vertices());
  NodalField p = solver.solve_adjoint(m, u, Eigen::VectorXd::Zero(mesh.num_vertices()));
  CHECK(p.values.norm() == 0.0);
}
