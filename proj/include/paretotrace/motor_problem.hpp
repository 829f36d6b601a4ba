#pragma once

#include "paretotrace/homotopy.hpp"
#include "paretotrace/objectives.hpp"
#include "paretotrace/reference_geometry.hpp"
#include "paretotrace/shape_calculus.hpp"

#include <atomic>
#include <memory>
#include <optional>

namespace paretotrace {

// Everything the motor instantiation of the homotopy needs besides the mesh.
struct MotorSettings {
  ReluctivityModel materials;
  CurrentExcitation excitation;
  GapGeometry gap;
  double state_tol = 1e-12;
  double hessian_step_rel = 1e-5;  // of the local interface spacing
  MetricConfig descent_metric{DeformationMetric::h1_elastic, 0.0, 1.0};
  MetricConfig extension_metric{DeformationMetric::h1_laplace, 0.0, 1.0};
  int threads = 0;  // 0 = hardware concurrency; PARETO_TRACE_THREADS caps it
  // Step guard: candidate meshes below these floors are rejected unless they
  // do not degrade the current mesh (stationary designs may legitimately
  // carry slivers where the boundary hugs the rim).
  double min_angle_floor_deg = 1.5;
  double min_area_ratio_floor = 1e-3;
  // Termination floors: the trace stops once a converged design's mesh falls
  // this far.
  double health_min_angle_deg = 0.15;
  double health_area_ratio = 1e-4;
  double iron_area_floor_rel = 1e-3;  // of the initial iron area
  int relax_sweeps = 4;               // interior smoothing between outer steps
};

// Lazily filled per-design data; copies of a design share nothing.
struct MotorCache {
  std::optional<NodalField> state;
  std::optional<MeshQualityReport> quality;
  // last extension direction and its interior displacement; the extension is
  // linear in the amplitudes, so colinear requests rescale the cached field
  std::optional<Eigen::VectorXd> ext_alpha;
  std::vector<Vec2> ext_disp;
  std::optional<NodalField> state_seed;  // warm start carried from the parent design
  std::optional<std::vector<DesignVertex>> boundary;
  std::optional<EndpointGradients> reduced;
  // full dJ/dX fields over all vertices, (J1, J2)
  std::optional<std::pair<std::vector<Vec2>, std::vector<Vec2>>> covectors;
};

struct MotorDesign {
  Mesh mesh;
  std::shared_ptr<MotorCache> cache = std::make_shared<MotorCache>();
};

// Engine adapter for the machine problem: reduced coordinates are normal
// amplitudes on the ordered design-interface vertices.
class MotorProblem {
 public:
  using Design = MotorDesign;

  MotorProblem(MotorSettings settings, double initial_iron_area)
      : settings_(std::move(settings)), initial_iron_area_(initial_iron_area) {}

  static MotorProblem for_mesh(const Mesh& mesh, MotorSettings settings) {
    return MotorProblem(std::move(settings), iron_volume(mesh, 1.0));
  }

  Design make_design(Mesh mesh) const;

  const MotorSettings& settings() const { return settings_; }

  int reduced_dim(const Design& design);
  const std::vector<DesignVertex>& boundary(const Design& design);
  const NodalField& state(const Design& design);

  EndpointGradients gradients(const Design& design);
  // Full 2D gradient covectors at the design vertices, (J1, J2).
  const std::pair<std::vector<Vec2>, std::vector<Vec2>>& gradient_covectors(const Design& design);

  // Forward differences of the reduced endpoint gradients, one perturbed
  // state/adjoint solve per design vertex; columns run in parallel.
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> hessians(const Design& design);

  bool try_step(const Design& design, const Eigen::VectorXd& alpha, Design& out);
  std::pair<double, double> objectives(const Design& design);
  DesignHealth health(const Design& design);
  Design snapshot(const Design& design) const;
  // One corrector step moves each interface vertex by at most about one local
  // edge length (root-sum-square over the amplitude vector).
  double trust_radius(const Design& design);

  bool mesh_quality_ok(const MeshQualityReport& quality) const;
  // Inversion-free and either above floor_scale times the quality floors or
  // not degrading the current design's quality: lateral motion stays possible
  // at the floor. The descent phase uses a stricter scale than the corrector,
  // which leaves the corrector slack to work in.
  bool step_quality_acceptable(const Design& design, const MeshQualityReport& candidate,
                               double floor_scale = 1.0);

  // Mesh maintenance (interface redistribution when spacing degrades plus
  // interior smoothing); returns false when the mesh needed nothing. Knocks a
  // stationary design slightly off its optimum, so the caller must re-correct.
  bool relax(Design& design);

  long long pde_solves() const { return pde_solves_.load(); }

 private:
  MotorSettings settings_;
  double initial_iron_area_ = 0.0;
  std::atomic<long long> pde_solves_{0};

  void ensure_state(const Design& design);
  void ensure_gradients(const Design& design);
  int thread_budget(int columns) const;
};

// Reduced blended optimality residual at homotopy parameter t.
Eigen::VectorXd homotopy_residual(MotorProblem& problem, const MotorDesign& design, double t);

// Blended reduced Hessian with the stabilization report.
ShapeHessian shape_hessian(MotorProblem& problem, const MotorDesign& design, double t);

struct GdConfig {
  double tol = 1e-4;  // on the reduced gradient norm
  int max_iterations = 800;
  double armijo_c = 1e-4;
  double max_move_fraction = 0.3;  // of the local interface spacing, per step
  double step_floor = 1e-12;
  // Stagnation stop: give up when the best residual has not improved by
  // stall_factor over the last stall_window accepted steps.
  int stall_window = 25;
  double stall_factor = 0.98;
  int checkpoint_stride = 10;  // snapshot spacing for basin-recovery retries
  int max_basin_retries = 4;
  // The cold-start corrector may need to slide along mesh-quality walls
  // before the quadratic phase; give it far more iterations than the
  // warm-started continuation corrector.
  int corrector_max_iterations = 250;
};

struct InitReport {
  int gd_iterations = 0;
  double gd_final_residual = 0.0;
  bool gd_hit_tolerance = false;
  std::vector<double> j_history;  // objective at accepted steps
  CorrectorStatus corrector_status = CorrectorStatus::nonconverged;
  double final_residual = 0.0;
  int corrector_iterations = 0;
  int basin_retries = 0;  // corrector restarts from earlier descent checkpoints
};

// Gradient-descent polish of the blended objective followed by the Newton
// corrector at the same t. With t = 0 this is the torque-only initialization.
InitReport optimize_at_t(MotorProblem& problem, MotorDesign& design, double t,
                         const GdConfig& gd, const HomotopyConfig& corrector_cfg,
                         const LogFn& log = {});

inline InitReport initialize_t0(MotorProblem& problem, MotorDesign& design, const GdConfig& gd,
                                const HomotopyConfig& corrector_cfg, const LogFn& log = {}) {
  return optimize_at_t(problem, design, 0.0, gd, corrector_cfg, log);
}

struct RefineOutcome {
  MotorDesign design;
  double t = 0.0;
  int levels = 0;
  double j1 = 0.0;
  double j2 = 0.0;
  double residual = 0.0;
  bool converged = false;
  InitReport report;
};

// Uniformly refines a stored design and re-optimizes the blend at its t.
RefineOutcome refine_and_reoptimize(MotorProblem& problem, const Mesh& snapshot, double t_star,
                                    int levels, const GdConfig& gd,
                                    const HomotopyConfig& corrector_cfg, const LogFn& log = {});

}  // namespace paretotrace
