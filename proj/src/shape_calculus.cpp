#include "paretotrace/shape_calculus.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>

namespace paretotrace {

namespace {

// Vector P1 operator on the rotor triangles: componentwise Laplacian or plane
// elasticity. Dof layout: (vertex, component) -> 2 * slot + component over a
// caller-provided vertex -> slot map (-1 marks a fixed vertex).
Eigen::SparseMatrix<double> assemble_vector_operator(const Mesh& mesh,
                                                     const std::vector<int>& slot,
                                                     int num_slots, const MetricConfig& metric,
                                                     std::vector<Eigen::Triplet<double>>* coupling,
                                                     const std::vector<int>& dirichlet_slot) {
  double mean_area = 0.0;
  int rotor_count = 0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.rotor_triangle[t]) {
      mean_area += triangle_area(mesh, t);
      ++rotor_count;
    }
  }
  mean_area = rotor_count > 0 ? mean_area / rotor_count : 1.0;

  // coupling (optional) collects entries K[free, dirichlet-data] for lifting.
  std::vector<Eigen::Triplet<double>> trip;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (!mesh.rotor_triangle[t]) continue;
    const auto& tri = mesh.triangles[t];
    const Vec2& p0 = mesh.vertices[tri.v[0]];
    const Vec2& p1 = mesh.vertices[tri.v[1]];
    const Vec2& p2 = mesh.vertices[tri.v[2]];
    double d = 2.0 * signed_area(p0, p1, p2);
    double area = 0.5 * d;
    if (metric.stiffening > 0.0) {
      area *= std::pow(mean_area / area, metric.stiffening);
    }
    const std::array<Vec2, 3> p = {p0, p1, p2};
    std::array<Vec2, 3> grad;
    for (int i = 0; i < 3; ++i) {
      Vec2 e = p[(i + 2) % 3] - p[(i + 1) % 3];
      grad[i] = Vec2(-e.y(), e.x()) / d;
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        Eigen::Matrix2d block;
        if (metric.metric == DeformationMetric::h1_laplace) {
          block = grad[i].dot(grad[j]) * Eigen::Matrix2d::Identity();
        } else {
          double gg = grad[i].dot(grad[j]);
          block = metric.lame_mu * gg * Eigen::Matrix2d::Identity();
          block += metric.lame_mu * grad[j] * grad[i].transpose();
          block += metric.lame_lambda * grad[i] * grad[j].transpose();
        }
        block *= area;
        int si = slot[tri.v[i]];
        int sj = slot[tri.v[j]];
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            double v = block(a, b);
            if (v == 0.0) continue;
            if (si >= 0 && sj >= 0) {
              trip.emplace_back(2 * si + a, 2 * sj + b, v);
            } else if (coupling && si >= 0 && dirichlet_slot[tri.v[j]] >= 0) {
              coupling->emplace_back(2 * si + a, 2 * dirichlet_slot[tri.v[j]] + b, v);
            }
          }
        }
      }
    }
  }
  Eigen::SparseMatrix<double> k(2 * num_slots, 2 * num_slots);
  k.setFromTriplets(trip.begin(), trip.end());
  return k;
}

}  // namespace

std::vector<Vec2> descent_direction(const Mesh& mesh, const ShapeGradient& gradient,
                                    const MetricConfig& metric) {
  std::vector<Vec2> field(mesh.num_vertices(), Vec2::Zero());

  std::vector<int> slot(mesh.num_vertices(), -1);
  int num_slots = 0;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (mesh.movable[v]) slot[v] = num_slots++;
  }
  if (num_slots == 0) return field;

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * num_slots);
  bool nonzero = false;
  if (!gradient.full_covector.empty()) {
    if (static_cast<int>(gradient.full_covector.size()) != mesh.num_vertices()) {
      throw std::invalid_argument("full covector size does not match the mesh");
    }
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      if (slot[v] < 0) continue;
      rhs(2 * slot[v]) = -gradient.full_covector[v].x();
      rhs(2 * slot[v] + 1) = -gradient.full_covector[v].y();
      nonzero = nonzero || gradient.full_covector[v].squaredNorm() > 0.0;
    }
  } else {
    for (std::size_t k = 0; k < gradient.boundary.size(); ++k) {
      int v = gradient.boundary[k].vertex;
      if (slot[v] < 0) continue;  // pinned by the rim closure
      rhs(2 * slot[v]) = -gradient.covector[k].x();
      rhs(2 * slot[v] + 1) = -gradient.covector[k].y();
      nonzero = nonzero || gradient.covector[k].squaredNorm() > 0.0;
    }
  }
  if (!nonzero) return field;  // stationary: zero descent field

  std::vector<int> no_dirichlet(mesh.num_vertices(), -1);
  Eigen::SparseMatrix<double> k =
      assemble_vector_operator(mesh, slot, num_slots, metric, nullptr, no_dirichlet);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(k);
  if (ldlt.info() != Eigen::Success) {
    throw SolveError("descent metric factorization failed", 0.0, 0);
  }
  Eigen::VectorXd x = ldlt.solve(rhs);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (slot[v] >= 0) field[v] = Vec2(x(2 * slot[v]), x(2 * slot[v] + 1));
  }
  return field;
}

std::vector<Vec2> extend_to_interior(const Mesh& mesh, const std::vector<DesignVertex>& boundary,
                                     const Eigen::VectorXd& alpha, const MetricConfig& metric) {
  if (alpha.size() != static_cast<Eigen::Index>(boundary.size())) {
    throw std::invalid_argument("amplitude count does not match the design boundary");
  }
  std::vector<Vec2> field(mesh.num_vertices(), Vec2::Zero());

  std::vector<int> data_slot(mesh.num_vertices(), -1);
  for (std::size_t k = 0; k < boundary.size(); ++k) {
    data_slot[boundary[k].vertex] = static_cast<int>(k);
    field[boundary[k].vertex] = alpha(static_cast<Eigen::Index>(k)) * boundary[k].normal;
  }

  std::vector<int> slot(mesh.num_vertices(), -1);
  int num_slots = 0;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (mesh.movable[v] && data_slot[v] < 0) slot[v] = num_slots++;
  }
  if (num_slots == 0) return field;

  std::vector<Eigen::Triplet<double>> coupling;
  Eigen::SparseMatrix<double> k =
      assemble_vector_operator(mesh, slot, num_slots, metric, &coupling, data_slot);

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * num_slots);
  for (const auto& c : coupling) {
    int bk = c.col() / 2;
    int comp = c.col() % 2;
    double data = field[boundary[bk].vertex](comp);
    rhs(c.row()) -= c.value() * data;
  }

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(k);
  if (ldlt.info() != Eigen::Success) {
    throw SolveError("extension factorization failed", 0.0, 0);
  }
  Eigen::VectorXd x = ldlt.solve(rhs);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (slot[v] >= 0) field[v] = Vec2(x(2 * slot[v]), x(2 * slot[v] + 1));
  }
  return field;
}

Eigen::VectorXd solve_stabilized(const Eigen::MatrixXd& h, const Eigen::VectorXd& rhs,
                                 ShapeHessian* info, double mu_floor) {
  Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd& lam = eig.eigenvalues();
  double floor = std::max(1e-10 * std::max(sym.cwiseAbs().maxCoeff(), 1e-300), mu_floor);
  Eigen::VectorXd lam_fixed(lam.size());
  double shift = 0.0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    double sign = lam(i) >= 0.0 ? 1.0 : -1.0;
    lam_fixed(i) = sign * std::max(std::abs(lam(i)), floor);
    shift = std::max(shift, std::abs(lam_fixed(i) - lam(i)));
  }
  if (info) {
    info->matrix = sym;
    info->shift = shift;
    info->min_abs_eigenvalue = lam_fixed.cwiseAbs().minCoeff();
  }
  Eigen::VectorXd y = eig.eigenvectors().transpose() * rhs;
  y.array() /= lam_fixed.array();
  return eig.eigenvectors() * y;
}

}  // namespace paretotrace
