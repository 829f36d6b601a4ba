#pragma once

#include "paretotrace/shape_calculus.hpp"

#include <chrono>
#include <limits>
#include <cstdio>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace paretotrace {

// Step-size policy and corrector limits for the continuation loop.
struct HomotopyConfig {
  double dt_init = 1e-3;
  double dt_min = 1e-9;
  double dt_max = 0.2;
  double grow = 1.5;
  double shrink = 0.5;
  int n_fast = 3;  // corrector iteration count considered "fast"
  double corrector_tol = 1e-10;
  int corrector_max_iter = 20;
  enum class Predictor { warm_start, euler };
  Predictor predictor = Predictor::warm_start;
  int max_points = 200;
  double line_search_floor = 1e-4;
  // Reuse the assembled Hessian for up to this many corrector iterations; the
  // damping loop absorbs the staleness. 1 = rebuild every iteration.
  int hessian_reuse = 1;
  // Ask the problem for mesh maintenance every this many corrector
  // iterations (0 = never); the residual is re-evaluated afterwards.
  int relax_stride = 0;

  void validate() const {
    if (!(0.0 < dt_min && dt_min <= dt_init && dt_init <= dt_max)) {
      throw std::invalid_argument("homotopy steps must satisfy 0 < dt_min <= dt_init <= dt_max");
    }
    if (!(grow > 1.0 && shrink < 1.0 && shrink > 0.0)) {
      throw std::invalid_argument("homotopy step factors must satisfy grow > 1 and 0 < shrink < 1");
    }
    if (corrector_tol <= 0.0 || corrector_max_iter < 1 || max_points < 1) {
      throw std::invalid_argument("corrector tolerance, iteration and point limits must be positive");
    }
  }
};

enum class Termination {
  reached_t1,
  dt_underflow,
  mesh_quality,
  topology_degenerate,
  max_points,
};

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::reached_t1: return "REACHED_T1";
    case Termination::dt_underflow: return "DT_UNDERFLOW";
    case Termination::mesh_quality: return "MESH_QUALITY";
    case Termination::topology_degenerate: return "TOPOLOGY_DEGENERATE";
    case Termination::max_points: return "MAX_POINTS";
  }
  return "UNKNOWN";
}

enum class DesignHealth { ok, mesh_quality, topology_degenerate };

struct EndpointGradients {
  Eigen::VectorXd g1, g2;  // reduced gradients of the two objectives
};

inline Eigen::VectorXd blend_gradient(const EndpointGradients& g, double t) {
  return (1.0 - t) * g.g1 + t * g.g2;
}

using LogFn = std::function<void(const std::string&)>;

struct TracePoint {
  int k = 0;
  double t = 0.0;
  double j1 = 0.0;
  double j2 = 0.0;
  double residual = 0.0;
  int corrector_iters = 0;
  long long wall_ms = 0;
};

enum class CorrectorStatus { converged, nonconverged, step_rejected };

template <class Problem>
struct CorrectorResult {
  CorrectorStatus status = CorrectorStatus::nonconverged;
  typename Problem::Design design;
  std::vector<double> residual_history;
  int iterations = 0;
  double final_residual = 0.0;
};

// A Problem provides:
//   using Design = ...;                                   (copyable)
//   EndpointGradients gradients(const Design&);           (may cache per design)
//   std::pair<Eigen::MatrixXd, Eigen::MatrixXd> hessians(const Design&);
//   bool try_step(const Design&, const Eigen::VectorXd&, Design& out);
//   std::pair<double, double> objectives(const Design&);
//   DesignHealth health(const Design&);
//   Design snapshot(const Design&);
//   double trust_radius(const Design&);    (cap on one corrector step; may be +inf)

// Newton corrector for the stationarity condition of the t-blend: solves
// H(design) alpha = -g with the stabilized spectrum, applies alpha through the
// problem, and backtracks on the reduced-gradient norm.
template <class Problem>
CorrectorResult<Problem> newton_correct(Problem& problem, typename Problem::Design design,
                                        double t, const HomotopyConfig& cfg,
                                        const LogFn& log = {}) {
  CorrectorResult<Problem> result;
  EndpointGradients grads = problem.gradients(design);
  Eigen::VectorXd g = blend_gradient(grads, t);
  double res = g.norm();
  result.residual_history.push_back(res);
  double mu = 0.0;  // Levenberg damping carried across iterations

  Eigen::MatrixXd h;
  int h_age = std::numeric_limits<int>::max();
  while (res > cfg.corrector_tol) {
    if (result.iterations >= cfg.corrector_max_iter) {
      result.status = CorrectorStatus::nonconverged;
      result.design = std::move(design);
      result.final_residual = res;
      return result;
    }
    if (cfg.relax_stride > 0 && result.iterations > 0 &&
        result.iterations % cfg.relax_stride == 0) {
      problem.relax(design);
      g = blend_gradient(problem.gradients(design), t);
      res = g.norm();
      h_age = std::numeric_limits<int>::max();
      if (res <= cfg.corrector_tol) break;
    }
    if (h_age >= cfg.hessian_reuse) {
      try {
        auto [h1, h2] = problem.hessians(design);
        h = (1.0 - t) * h1 + t * h2;
        h_age = 0;
      } catch (const std::exception& e) {
        if (log) log(std::string("corrector: hessian failed: ") + e.what());
        result.status = CorrectorStatus::nonconverged;
        result.design = std::move(design);
        result.final_residual = res;
        return result;
      }
    }
    ++h_age;
    const double h_scale = std::max(h.cwiseAbs().maxCoeff(), 1e-300);
    const double radius = problem.trust_radius(design);

    // Damping loop: a direction usable only at microscopic line-search scales
    // raises mu, bending toward (damped) steepest descent, which can slide
    // along mesh-validity walls where the pure Newton target is unreachable.
    // Only once damping is exhausted is a deep backtracking pass allowed.
    bool accepted = false;
    bool any_step_applied = false;
    ShapeHessian info;
    double step = 1.0;
    constexpr double kMuMax = 1e4;
    while (true) {
      Eigen::VectorXd alpha = solve_stabilized(h, -g, &info, mu * h_scale);
      double alpha_norm = alpha.norm();
      if (alpha_norm > radius) alpha *= radius / alpha_norm;

      double accept_floor = mu >= kMuMax ? cfg.line_search_floor : 0.0625;
      step = 1.0;
      while (step >= accept_floor) {
        typename Problem::Design candidate;
        if (!problem.try_step(design, step * alpha, candidate)) {
          step *= 0.5;
          continue;
        }
        double rc;
        Eigen::VectorXd gc;
        try {
          EndpointGradients cand_grads = problem.gradients(candidate);
          gc = blend_gradient(cand_grads, t);
          rc = gc.norm();
        } catch (const SolveError&) {
          step *= 0.5;  // unusable trial mesh
          continue;
        }
        any_step_applied = true;
        if (rc < res) {
          design = std::move(candidate);
          g = std::move(gc);
          res = rc;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (accepted) {
        mu = mu > 1e-8 ? mu / 3.0 : 0.0;
        break;
      }
      if (mu >= kMuMax) break;  // even damped descent cannot move
      mu = mu == 0.0 ? 1e-6 : 8.0 * mu;
    }

    ++result.iterations;
    if (log) {
      char line[160];
      std::snprintf(line, sizeof(line),
                    "corrector t=%.12g iter=%d res=%.6e step=%.3g mu=%.2e shift=%.3g", t,
                    result.iterations, res, accepted ? step : 0.0, mu, info.shift);
      log(line);
    }
    if (!accepted) {
      result.status =
          any_step_applied ? CorrectorStatus::nonconverged : CorrectorStatus::step_rejected;
      result.design = std::move(design);
      result.final_residual = res;
      return result;
    }
    result.residual_history.push_back(res);
  }

  result.status = CorrectorStatus::converged;
  result.design = std::move(design);
  result.final_residual = res;
  return result;
}

// Tangent predictor: differentiating the stationarity of the t-blend gives
// H dalpha/dt = -(g2 - g1). Falls back to the unchanged design when the
// tangent step cannot be applied.
template <class Problem>
typename Problem::Design predict(Problem& problem, const typename Problem::Design& design,
                                 double t, double dt, HomotopyConfig::Predictor mode,
                                 const LogFn& log = {}) {
  if (mode == HomotopyConfig::Predictor::warm_start || dt == 0.0) return design;
  try {
    EndpointGradients grads = problem.gradients(design);
    auto [h1, h2] = problem.hessians(design);
    Eigen::MatrixXd h = (1.0 - t) * h1 + t * h2;
    Eigen::VectorXd rhs = -dt * (grads.g2 - grads.g1);
    Eigen::VectorXd alpha = solve_stabilized(h, rhs);
    typename Problem::Design out;
    if (problem.try_step(design, alpha, out)) return out;
    if (log) log("predictor: tangent step rejected, warm start");
  } catch (const std::exception& e) {
    if (log) log(std::string("predictor: ") + e.what() + ", warm start");
  }
  return design;
}

template <class Problem>
struct TraceResult {
  std::vector<TracePoint> points;
  std::vector<typename Problem::Design> snapshots;
  Termination termination = Termination::reached_t1;
  double final_t = 0.0;
};

// Continuation loop. `start` must already satisfy the t = 0 stationarity to
// corrector tolerance; it is recorded as point k = 0.
template <class Problem>
TraceResult<Problem> trace_homotopy(Problem& problem, typename Problem::Design start,
                                    const HomotopyConfig& cfg, const LogFn& log = {}) {
  cfg.validate();
  using Clock = std::chrono::steady_clock;
  TraceResult<Problem> result;

  auto record = [&](const typename Problem::Design& design, double t, double residual, int iters,
                    Clock::time_point began) {
    auto [j1, j2] = problem.objectives(design);
    TracePoint p;
    p.k = static_cast<int>(result.points.size());
    p.t = t;
    p.j1 = j1;
    p.j2 = j2;
    p.residual = residual;
    p.corrector_iters = iters;
    p.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - began).count();
    result.points.push_back(p);
    result.snapshots.push_back(problem.snapshot(design));
  };

  auto t0_clock = Clock::now();
  typename Problem::Design design = start;
  double residual0 = blend_gradient(problem.gradients(design), 0.0).norm();
  record(design, 0.0, residual0, 0, t0_clock);

  double t = 0.0;
  double dt = cfg.dt_init;
  bool maintained_here = false;  // at most one mesh-maintenance round per point
  while (true) {
    if (t >= 1.0) {
      result.termination = Termination::reached_t1;
      break;
    }
    if (static_cast<int>(result.points.size()) >= cfg.max_points) {
      result.termination = Termination::max_points;
      break;
    }

    double t_next = t + dt;
    if (t_next >= 1.0 - 1e-12) t_next = 1.0;  // absorb accumulated rounding
    auto began = Clock::now();
    typename Problem::Design guess = predict(problem, design, t, t_next - t, cfg.predictor, log);
    CorrectorResult<Problem> corrected = newton_correct(problem, std::move(guess), t_next, cfg, log);

    if (corrected.status == CorrectorStatus::converged) {
      design = std::move(corrected.design);
      t = t_next;
      maintained_here = false;
      record(design, t, corrected.final_residual, corrected.iterations, began);
      DesignHealth health = problem.health(design);
      if (health == DesignHealth::mesh_quality) {
        result.termination = Termination::mesh_quality;
        break;
      }
      if (health == DesignHealth::topology_degenerate) {
        result.termination = Termination::topology_degenerate;
        break;
      }
      if (corrected.iterations <= cfg.n_fast) dt = std::min(dt * cfg.grow, cfg.dt_max);
      continue;
    }

    // Failure recovery: one mesh-maintenance round, re-converged at the
    // current t with a deep budget, then the same dt is retried.
    if (!maintained_here) {
      maintained_here = true;
      typename Problem::Design maintained = design;
      if (problem.relax(maintained)) {
        if (log) log("trace: mesh maintenance, re-converging at current t");
        HomotopyConfig deep = cfg;
        deep.corrector_max_iter = 10 * cfg.corrector_max_iter;
        deep.hessian_reuse = std::max(cfg.hessian_reuse, 3);
        CorrectorResult<Problem> recovered =
            newton_correct(problem, std::move(maintained), t, deep, log);
        if (recovered.status == CorrectorStatus::converged) {
          design = std::move(recovered.design);
          continue;
        }
      }
    }

    dt *= cfg.shrink;
    if (log) {
      char line[120];
      std::snprintf(line, sizeof(line), "step to t=%.12g failed (%s), dt -> %.3e", t_next,
                    corrected.status == CorrectorStatus::step_rejected ? "step rejected"
                                                                       : "no convergence",
                    dt);
      log(line);
    }
    if (dt < cfg.dt_min) {
      result.termination = Termination::dt_underflow;
      break;
    }
  }
  result.final_t = t;
  return result;
}

}  // namespace paretotrace
