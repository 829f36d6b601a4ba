#include "paretotrace/motor_problem.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <string>
#include <thread>

namespace paretotrace {

MotorDesign MotorProblem::make_design(Mesh mesh) const {
  MotorDesign d;
  d.mesh = std::move(mesh);
  return d;
}

void MotorProblem::ensure_state(const Design& design) {
  MotorCache& cache = *design.cache;
  if (cache.state) return;
  FemSolver solver(design.mesh);
  SourceField src = SourceField::from_excitation(design.mesh, settings_.excitation);
  const NodalField* seed = cache.state_seed ? &*cache.state_seed : nullptr;
  StateReport rep;
  cache.state = solver.solve_state(settings_.materials, src, seed, settings_.state_tol, &rep);
  pde_solves_.fetch_add(1 + rep.newton_iterations, std::memory_order_relaxed);
}

const NodalField& MotorProblem::state(const Design& design) {
  ensure_state(design);
  return *design.cache->state;
}

const std::vector<DesignVertex>& MotorProblem::boundary(const Design& design) {
  MotorCache& cache = *design.cache;
  if (!cache.boundary) cache.boundary = extract_design_boundary(design.mesh);
  return *cache.boundary;
}

int MotorProblem::reduced_dim(const Design& design) {
  return static_cast<int>(boundary(design).size());
}

void MotorProblem::ensure_gradients(const Design& design) {
  MotorCache& cache = *design.cache;
  if (cache.reduced) return;
  ensure_state(design);
  const auto& bd = boundary(design);

  FemSolver solver(design.mesh);
  SourceField src = SourceField::from_excitation(design.mesh, settings_.excitation);
  ShapeGradient g1 = shape_gradient(design.mesh, settings_.materials, src, settings_.gap,
                                    Objective::torque, *cache.state, solver);
  pde_solves_.fetch_add(1, std::memory_order_relaxed);  // adjoint
  ShapeGradient g2 = shape_gradient(design.mesh, settings_.materials, src, settings_.gap,
                                    Objective::volume, *cache.state, solver);

  EndpointGradients red;
  red.g1 = g1.normal_component;
  red.g2 = g2.normal_component;
  cache.reduced = std::move(red);
  cache.covectors = std::make_pair(std::move(g1.full_covector), std::move(g2.full_covector));
  (void)bd;
}

EndpointGradients MotorProblem::gradients(const Design& design) {
  ensure_gradients(design);
  return *design.cache->reduced;
}

const std::pair<std::vector<Vec2>, std::vector<Vec2>>& MotorProblem::gradient_covectors(
    const Design& design) {
  ensure_gradients(design);
  return *design.cache->covectors;
}

int MotorProblem::thread_budget(int columns) const {
  int budget = settings_.threads;
  if (budget <= 0) budget = static_cast<int>(std::thread::hardware_concurrency());
  if (budget <= 0) budget = 1;
  if (const char* env = std::getenv("PARETO_TRACE_THREADS")) {
    int cap = std::atoi(env);
    if (cap > 0) budget = std::min(budget, cap);
  }
  return std::max(1, std::min(budget, columns));
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> MotorProblem::hessians(const Design& design) {
  ensure_gradients(design);
  const auto& bd = boundary(design);
  const int n = static_cast<int>(bd.size());
  const EndpointGradients base = *design.cache->reduced;

  Eigen::MatrixXd h1(n, n), h2(n, n);
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mutex;

  auto column_worker = [&]() {
    for (int j = next.fetch_add(1); j < n; j = next.fetch_add(1)) {
      if (failed.load()) return;
      try {
        double step = settings_.hessian_step_rel * bd[j].lumped_length;
        std::vector<Vec2> disp(design.mesh.num_vertices(), Vec2::Zero());
        disp[bd[j].vertex] = bd[j].normal;
        DeformResult moved = apply_deformation(design.mesh, disp, step);
        if (!moved.ok) {
          throw std::runtime_error("hessian column " + std::to_string(j) +
                                   ": perturbation inverted the mesh");
        }
        Design perturbed;
        perturbed.mesh = std::move(moved.mesh);
        perturbed.cache->state_seed = design.cache->state;
        ensure_gradients(perturbed);
        const EndpointGradients& g = *perturbed.cache->reduced;
        h1.col(j) = (g.g1 - base.g1) / step;
        h2.col(j) = (g.g2 - base.g2) / step;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failed.exchange(true)) {
          failure = "hessian column " + std::to_string(j) + ": " + e.what();
        }
      }
    }
  };

  int workers = thread_budget(n);
  if (workers <= 1) {
    column_worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(column_worker);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) throw SolveError(failure, 0.0, 0);
  return {std::move(h1), std::move(h2)};
}

bool MotorProblem::mesh_quality_ok(const MeshQualityReport& q) const {
  return q.inverted_count == 0 && q.min_angle_deg >= settings_.min_angle_floor_deg &&
         q.min_area_ratio >= settings_.min_area_ratio_floor;
}

bool MotorProblem::step_quality_acceptable(const Design& design,
                                           const MeshQualityReport& candidate,
                                           double floor_scale) {
  if (candidate.inverted_count > 0) return false;
  if (candidate.min_angle_deg >= floor_scale * settings_.min_angle_floor_deg &&
      candidate.min_area_ratio >= std::min(1.0, floor_scale * settings_.min_area_ratio_floor)) {
    return true;
  }
  // below the floor: allowed only while not degrading the current mesh
  if (!design.cache->quality) design.cache->quality = mesh_quality(design.mesh);
  const MeshQualityReport& cur = *design.cache->quality;
  return candidate.min_angle_deg >= 0.995 * cur.min_angle_deg &&
         candidate.min_area_ratio >= 0.995 * cur.min_area_ratio;
}

bool MotorProblem::try_step(const Design& design, const Eigen::VectorXd& alpha, Design& out) {
  const auto& bd = boundary(design);
  MotorCache& cache = *design.cache;
  std::vector<Vec2> disp;
  bool reused = false;
  if (cache.ext_alpha && cache.ext_alpha->size() == alpha.size()) {
    double denom = cache.ext_alpha->squaredNorm();
    if (denom > 0.0) {
      double c = cache.ext_alpha->dot(alpha) / denom;
      if ((alpha - c * *cache.ext_alpha).norm() <= 1e-13 * alpha.norm()) {
        disp.resize(cache.ext_disp.size());
        for (std::size_t i = 0; i < disp.size(); ++i) disp[i] = c * cache.ext_disp[i];
        reused = true;
      }
    }
  }
  if (!reused) {
    disp = extend_to_interior(design.mesh, bd, alpha, settings_.extension_metric);
    cache.ext_alpha = alpha;
    cache.ext_disp = disp;
  }
  DeformResult moved = apply_deformation(design.mesh, disp, 1.0);
  if (!moved.ok || !step_quality_acceptable(design, moved.quality)) return false;
  out = Design{};
  out.mesh = std::move(moved.mesh);
  out.cache->quality = moved.quality;
  if (design.cache->state) out.cache->state_seed = design.cache->state;
  return true;
}

std::pair<double, double> MotorProblem::objectives(const Design& design) {
  ensure_state(design);
  double j1 = torque_arkkio(design.mesh, *design.cache->state, settings_.gap);
  double j2 = iron_volume(design.mesh, settings_.gap.axial_length);
  return {j1, j2};
}

DesignHealth MotorProblem::health(const Design& design) {
  double iron = iron_volume(design.mesh, 1.0);
  if (iron < settings_.iron_area_floor_rel * initial_iron_area_) {
    return DesignHealth::topology_degenerate;
  }
  MeshQualityReport q = mesh_quality(design.mesh);
  if (q.inverted_count > 0 || q.min_angle_deg < settings_.health_min_angle_deg ||
      q.min_area_ratio < settings_.health_area_ratio) {
    return DesignHealth::mesh_quality;
  }
  return DesignHealth::ok;
}

MotorDesign MotorProblem::snapshot(const Design& design) const {
  MotorDesign trimmed;
  trimmed.mesh = design.mesh;
  return trimmed;
}

double MotorProblem::trust_radius(const Design& design) {
  const auto& bd = boundary(design);
  double sum = 0.0;
  for (const auto& dv : bd) sum += dv.lumped_length * dv.lumped_length;
  return std::sqrt(sum);
}

bool MotorProblem::relax(Design& design) {
  if (settings_.relax_sweeps <= 0) return false;
  // Maintenance only when needed: redistribution cuts interface corners at
  // the vertex scale, which would knock a converged design off stationarity.
  const auto& bd = boundary(design);
  double lmin = std::numeric_limits<double>::max(), lmax = 0.0;
  for (const auto& dv : bd) {
    lmin = std::min(lmin, dv.lumped_length);
    lmax = std::max(lmax, dv.lumped_length);
  }
  bool spacing_bad = lmin < 0.35 * lmax;
  if (!design.cache->quality) design.cache->quality = mesh_quality(design.mesh);
  const MeshQualityReport& q = *design.cache->quality;
  bool quality_bad = q.min_angle_deg < 2.0 * settings_.min_angle_floor_deg ||
                     q.min_area_ratio < 2.0 * settings_.min_area_ratio_floor;
  if (!spacing_bad && !quality_bad) return false;

  Design relaxed;
  relaxed.mesh = design.mesh;
  if (spacing_bad) redistribute_interface(relaxed.mesh, 0.5);
  relax_interior(relaxed.mesh, settings_.relax_sweeps);
  if (design.cache->state) relaxed.cache->state_seed = design.cache->state;
  design = std::move(relaxed);
  return true;
}

Eigen::VectorXd homotopy_residual(MotorProblem& problem, const MotorDesign& design, double t) {
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("homotopy parameter must lie in [0, 1]");
  return blend_gradient(problem.gradients(design), t);
}

ShapeHessian shape_hessian(MotorProblem& problem, const MotorDesign& design, double t) {
  auto [h1, h2] = problem.hessians(design);
  Eigen::MatrixXd h = (1.0 - t) * h1 + t * h2;
  ShapeHessian info;
  Eigen::VectorXd probe = Eigen::VectorXd::Zero(h.rows());
  solve_stabilized(h, probe, &info);
  return info;
}

InitReport optimize_at_t(MotorProblem& problem, MotorDesign& design, double t, const GdConfig& gd,
                         const HomotopyConfig& corrector_cfg, const LogFn& log) {
  InitReport report;

  auto blended_objective = [&](const MotorDesign& d) {
    auto [j1, j2] = problem.objectives(d);
    return (1.0 - t) * j1 + t * j2;
  };

  double step = 1.0;
  double j_current = blended_objective(design);
  report.j_history.push_back(j_current);

  std::vector<MotorDesign> checkpoints;
  std::vector<double> recent_best;

  for (int it = 0; it < gd.max_iterations; ++it) {
    EndpointGradients grads = problem.gradients(design);
    Eigen::VectorXd g_red = blend_gradient(grads, t);
    report.gd_final_residual = g_red.norm();
    if (report.gd_final_residual <= gd.tol) {
      report.gd_hit_tolerance = true;
      break;
    }
    double best_now = recent_best.empty()
                          ? report.gd_final_residual
                          : std::min(recent_best.back(), report.gd_final_residual);
    recent_best.push_back(best_now);
    int window = std::max(2, gd.stall_window);
    if (static_cast<int>(recent_best.size()) > window) {
      double before = recent_best[recent_best.size() - 1 - window];
      if (best_now > gd.stall_factor * before) {
        if (log) log("descent: residual stagnated, handing over to the corrector");
        break;
      }
    }
    if (it % std::max(1, gd.checkpoint_stride) == 0) {
      checkpoints.push_back(problem.snapshot(design));
    }
    report.gd_iterations = it + 1;

    const auto& covs = problem.gradient_covectors(design);
    const auto& bd = problem.boundary(design);
    ShapeGradient blended;
    blended.boundary = bd;
    blended.full_covector.resize(design.mesh.num_vertices());
    for (int v = 0; v < design.mesh.num_vertices(); ++v) {
      blended.full_covector[v] = (1.0 - t) * covs.first[v] + t * covs.second[v];
    }
    std::vector<Vec2> v = descent_direction(design.mesh, blended, problem.settings().descent_metric);

    double slope = 0.0;
    double vmax = 0.0;
    double hmin = std::numeric_limits<double>::max();
    for (int vert = 0; vert < design.mesh.num_vertices(); ++vert) {
      slope += blended.full_covector[vert].dot(v[vert]);
    }
    for (const auto& dv : bd) hmin = std::min(hmin, dv.lumped_length);
    for (const auto& w : v) vmax = std::max(vmax, w.norm());
    if (vmax == 0.0 || slope >= 0.0) break;  // no usable descent direction

    double cap = gd.max_move_fraction * hmin / vmax;
    double s = std::min(2.0 * step, cap);
    bool accepted = false;
    while (s > gd.step_floor) {
      DeformResult moved = apply_deformation(design.mesh, v, s);
      if (moved.ok && problem.step_quality_acceptable(design, moved.quality, 2.0)) {
        MotorDesign candidate;
        candidate.mesh = std::move(moved.mesh);
        if (design.cache->state) candidate.cache->state_seed = design.cache->state;
        bool usable = true;
        double j_cand = 0.0;
        try {
          j_cand = blended_objective(candidate);
        } catch (const SolveError&) {
          usable = false;  // trial mesh too distorted for the state solve
        }
        if (usable && j_cand <= j_current + gd.armijo_c * s * slope) {
          // interior relaxation keeps the mesh usable across large cumulative
          // deformations; kept only when it does not raise the objective
          if (problem.settings().relax_sweeps > 0) {
            MotorDesign relaxed = candidate;
            problem.relax(relaxed);
            try {
              double j_relaxed = blended_objective(relaxed);
              if (j_relaxed <= j_cand) {
                candidate = std::move(relaxed);
                j_cand = j_relaxed;
              }
            } catch (const SolveError&) {
            }
          }
          design = std::move(candidate);
          j_current = j_cand;
          report.j_history.push_back(j_current);
          step = s;
          accepted = true;
          break;
        }
      }
      s *= 0.5;
    }
    if (!accepted) break;  // line search underflow: hand over to the corrector
    if (log && (it % 10 == 0)) {
      char line[160];
      std::snprintf(line, sizeof(line), "descent t=%.6g iter=%d res=%.6e J=%.9e step=%.3g", t,
                    it + 1, report.gd_final_residual, j_current, step);
      log(line);
    }
  }

  HomotopyConfig init_cfg = corrector_cfg;
  init_cfg.corrector_max_iter = std::max(corrector_cfg.corrector_max_iter,
                                         gd.corrector_max_iterations);
  init_cfg.hessian_reuse = 3;  // the wall-sliding phase tolerates stale operators
  CorrectorResult<MotorProblem> corrected =
      newton_correct(problem, design, t, init_cfg, log);
  report.corrector_status = corrected.status;
  report.final_residual = corrected.final_residual;
  report.corrector_iterations = corrected.iterations;
  design = std::move(corrected.design);

  // Basin recovery: the descent endpoint can sit against the mesh-quality
  // wall outside the corrector's reach. Earlier checkpoints carry a larger
  // residual with a healthier mesh, so retry from the most recent backwards.
  if (report.corrector_status != CorrectorStatus::converged && !checkpoints.empty()) {
    // geometrically spread retry points, most recent first
    std::vector<int> picks;
    int back = 1;
    while (static_cast<int>(picks.size()) < gd.max_basin_retries &&
           back <= static_cast<int>(checkpoints.size())) {
      picks.push_back(static_cast<int>(checkpoints.size()) - back);
      back *= 3;
    }
    for (int index : picks) {
      ++report.basin_retries;
      if (log) {
        log("corrector: basin miss, retrying from descent checkpoint " +
            std::to_string(index));
      }
      MotorDesign candidate = checkpoints[index];
      problem.relax(candidate);
      CorrectorResult<MotorProblem> retry =
          newton_correct(problem, candidate, t, init_cfg, log);
      if (retry.status == CorrectorStatus::converged) {
        report.corrector_status = retry.status;
        report.final_residual = retry.final_residual;
        report.corrector_iterations = retry.iterations;
        design = std::move(retry.design);
        break;
      }
    }
  }
  return report;
}

RefineOutcome refine_and_reoptimize(MotorProblem& problem, const Mesh& snapshot, double t_star,
                                    int levels, const GdConfig& gd,
                                    const HomotopyConfig& corrector_cfg, const LogFn& log) {
  Mesh fine = snapshot;
  for (int l = 0; l < levels; ++l) fine = uniform_refine(fine);

  RefineOutcome outcome;
  outcome.t = t_star;
  outcome.levels = levels;
  outcome.design = problem.make_design(std::move(fine));
  outcome.report = optimize_at_t(problem, outcome.design, t_star, gd, corrector_cfg, log);
  outcome.converged = outcome.report.corrector_status == CorrectorStatus::converged;
  outcome.residual = outcome.report.final_residual;
  auto [j1, j2] = problem.objectives(outcome.design);
  outcome.j1 = j1;
  outcome.j2 = j2;
  return outcome;
}

}  // namespace paretotrace
