#pragma once

#include "paretotrace/homotopy.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace paretotrace {
namespace bench {

struct BenchDesign {
  Eigen::VectorXd x;
};

// Finite-dimensional objective pair with analytic derivatives, driving the
// same predictor-corrector code path as the motor problem. A "design" here is
// a point of R^n and the reduced coordinates are the coordinates themselves.
class SurrogateProblem {
 public:
  using Design = BenchDesign;
  using Fn = std::function<double(const Eigen::VectorXd&)>;
  using GradFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using HessFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  std::string id;
  int dimension = 0;
  Fn f1, f2;
  GradFn grad1, grad2;
  HessFn hess1, hess2;
  // closed-form stationary point of the t-blend, when known
  std::function<Eigen::VectorXd(double)> stationary_path;

  EndpointGradients gradients(const Design& d) const { return {grad1(d.x), grad2(d.x)}; }
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> hessians(const Design& d) const {
    return {hess1(d.x), hess2(d.x)};
  }
  bool try_step(const Design& d, const Eigen::VectorXd& alpha, Design& out) const {
    out.x = d.x + alpha;
    return true;
  }
  std::pair<double, double> objectives(const Design& d) const { return {f1(d.x), f2(d.x)}; }
  DesignHealth health(const Design&) const { return DesignHealth::ok; }
  Design snapshot(const Design& d) const { return d; }
  double trust_radius(const Design&) const { return trust_radius_value; }
  bool relax(Design&) const { return false; }  // points need no mesh maintenance

  // Corrector step cap; finite for objectives that flatten far from their
  // wells, where the gradient norm alone cannot anchor the iteration.
  double trust_radius_value = std::numeric_limits<double>::infinity();
};

// f1 = |x-a|^2, f2 = |x-b|^2; the t-blend is stationary exactly on the
// segment between the two centers.
SurrogateProblem quad_pair(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

Eigen::VectorXd quad_pair_path(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double t);

// Two-variable pair with Gaussian wells at opposite centers; its front has a
// non-convex middle segment that no weighted-sum minimizer attains.
SurrogateProblem nonconvex_front();

struct FrontPoint {
  double f1 = 0.0;
  double f2 = 0.0;
  Eigen::Vector2d x;
};

// Dominance-filtered objective values over an n x n grid on [lo, hi]^2,
// sorted by f1.
std::vector<FrontPoint> brute_force_front(const SurrogateProblem& problem,
                                          const Eigen::Vector2d& lo, const Eigen::Vector2d& hi,
                                          int n);

// Global grid minimizers of w f1 + (1-w) f2 for uniformly spaced weights.
std::vector<FrontPoint> weighted_sum_scan(const SurrogateProblem& problem,
                                          const Eigen::Vector2d& lo, const Eigen::Vector2d& hi,
                                          int n, int num_weights);

// Front points farther than min_distance (in objective space) from every
// scan point.
std::vector<FrontPoint> missed_by_scan(const std::vector<FrontPoint>& front,
                                       const std::vector<FrontPoint>& scan, double min_distance);

}  // namespace bench
}  // namespace paretotrace
