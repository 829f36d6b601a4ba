#include "paretotrace/bench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace paretotrace {
namespace bench {

SurrogateProblem quad_pair(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("quad_pair centers must share a dimension");
  SurrogateProblem p;
  p.id = "quad_pair";
  p.dimension = static_cast<int>(a.size());
  p.f1 = [a](const Eigen::VectorXd& x) { return (x - a).squaredNorm(); };
  p.f2 = [b](const Eigen::VectorXd& x) { return (x - b).squaredNorm(); };
  p.grad1 = [a](const Eigen::VectorXd& x) { return Eigen::VectorXd(2.0 * (x - a)); };
  p.grad2 = [b](const Eigen::VectorXd& x) { return Eigen::VectorXd(2.0 * (x - b)); };
  auto ident = [n = p.dimension](const Eigen::VectorXd&) {
    return Eigen::MatrixXd(2.0 * Eigen::MatrixXd::Identity(n, n));
  };
  p.hess1 = ident;
  p.hess2 = ident;
  p.stationary_path = [a, b](double t) { return quad_pair_path(a, b, t); };
  return p;
}

Eigen::VectorXd quad_pair_path(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double t) {
  return (1.0 - t) * a + t * b;
}

SurrogateProblem nonconvex_front() {
  const double c = 1.0 / std::sqrt(2.0);
  Eigen::Vector2d a(c, c), b(-c, -c);
  SurrogateProblem p;
  p.id = "nonconvex_front";
  p.dimension = 2;
  p.trust_radius_value = 0.5;
  auto well = [](const Eigen::Vector2d& center) {
    return [center](const Eigen::VectorXd& x) {
      return 1.0 - std::exp(-(x - center).squaredNorm());
    };
  };
  auto well_grad = [](const Eigen::Vector2d& center) {
    return [center](const Eigen::VectorXd& x) {
      Eigen::VectorXd v = x - center;
      return Eigen::VectorXd(2.0 * std::exp(-v.squaredNorm()) * v);
    };
  };
  auto well_hess = [](const Eigen::Vector2d& center) {
    return [center](const Eigen::VectorXd& x) {
      Eigen::VectorXd v = x - center;
      double e = std::exp(-v.squaredNorm());
      Eigen::MatrixXd h = 2.0 * e * (Eigen::MatrixXd::Identity(2, 2) - 2.0 * v * v.transpose());
      return h;
    };
  };
  p.f1 = well(a);
  p.f2 = well(b);
  p.grad1 = well_grad(a);
  p.grad2 = well_grad(b);
  p.hess1 = well_hess(a);
  p.hess2 = well_hess(b);
  return p;
}

std::vector<FrontPoint> brute_force_front(const SurrogateProblem& problem,
                                          const Eigen::Vector2d& lo, const Eigen::Vector2d& hi,
                                          int n) {
  if (problem.dimension != 2) throw std::invalid_argument("grid oracle requires dimension 2");
  std::vector<FrontPoint> all;
  all.reserve(static_cast<std::size_t>(n) * n);
  Eigen::VectorXd x(2);
  for (int i = 0; i < n; ++i) {
    x(0) = lo.x() + (hi.x() - lo.x()) * i / (n - 1);
    for (int j = 0; j < n; ++j) {
      x(1) = lo.y() + (hi.y() - lo.y()) * j / (n - 1);
      FrontPoint p;
      p.f1 = problem.f1(x);
      p.f2 = problem.f2(x);
      p.x = x;
      all.push_back(p);
    }
  }
  std::sort(all.begin(), all.end(), [](const FrontPoint& p, const FrontPoint& q) {
    return p.f1 < q.f1 || (p.f1 == q.f1 && p.f2 < q.f2);
  });
  std::vector<FrontPoint> front;
  double best_f2 = std::numeric_limits<double>::max();
  for (const auto& p : all) {
    if (p.f2 < best_f2) {
      front.push_back(p);
      best_f2 = p.f2;
    }
  }
  return front;
}

std::vector<FrontPoint> weighted_sum_scan(const SurrogateProblem& problem,
                                          const Eigen::Vector2d& lo, const Eigen::Vector2d& hi,
                                          int n, int num_weights) {
  if (problem.dimension != 2) throw std::invalid_argument("grid oracle requires dimension 2");
  std::vector<FrontPoint> values;
  values.reserve(static_cast<std::size_t>(n) * n);
  Eigen::VectorXd x(2);
  for (int i = 0; i < n; ++i) {
    x(0) = lo.x() + (hi.x() - lo.x()) * i / (n - 1);
    for (int j = 0; j < n; ++j) {
      x(1) = lo.y() + (hi.y() - lo.y()) * j / (n - 1);
      FrontPoint p;
      p.f1 = problem.f1(x);
      p.f2 = problem.f2(x);
      p.x = x;
      values.push_back(p);
    }
  }
  std::vector<FrontPoint> result;
  result.reserve(num_weights);
  for (int k = 0; k < num_weights; ++k) {
    double w = static_cast<double>(k) / (num_weights - 1);
    const FrontPoint* best = nullptr;
    double best_value = std::numeric_limits<double>::max();
    for (const auto& p : values) {
      double v = w * p.f1 + (1.0 - w) * p.f2;
      if (v < best_value) {
        best_value = v;
        best = &p;
      }
    }
    result.push_back(*best);
  }
  return result;
}

std::vector<FrontPoint> missed_by_scan(const std::vector<FrontPoint>& front,
                                       const std::vector<FrontPoint>& scan, double min_distance) {
  std::vector<FrontPoint> missed;
  for (const auto& p : front) {
    double nearest = std::numeric_limits<double>::max();
    for (const auto& s : scan) {
      nearest = std::min(nearest, std::hypot(p.f1 - s.f1, p.f2 - s.f2));
    }
    if (nearest > min_distance) missed.push_back(p);
  }
  return missed;
}

}  // namespace bench
}  // namespace paretotrace
