#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace paretotrace {

using Vec2 = Eigen::Vector2d;

// Thrown when the iron/air interface disappears or becomes unusable.
struct TopologyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown for inconsistent geometry descriptors and malformed mesh files.
struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Region : std::uint8_t { iron = 0, air = 1, gap_ring = 2, coil = 3 };

enum class EdgeMarker : std::uint8_t {
  outer_dirichlet = 0,
  rotor_rim = 1,
  design_interface = 2,
};

struct Triangle {
  std::array<int, 3> v;  // counterclockwise
  Region region = Region::air;
  std::int8_t coil = -1;  // index into the excitation's coil table, -1 if none
};

struct MarkedEdge {
  int a = -1;
  int b = -1;
  EdgeMarker marker = EdgeMarker::outer_dirichlet;
};

struct MeshQualityReport {
  double min_angle_deg = 0.0;
  double min_area_ratio = 0.0;  // min element area / initial min element area
  int inverted_count = 0;
};

// Triangulated machine cross-section. Treated as immutable once built:
// every operation below returns a new mesh.
struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<Triangle> triangles;
  std::vector<MarkedEdge> marked_edges;

  // Derived flags, recomputed by finalize(): a vertex is movable when it lies
  // strictly inside the rotor rim loop and is not itself on a marked edge.
  std::vector<std::uint8_t> movable;
  std::vector<std::uint8_t> rotor_triangle;  // centroid inside the rim loop
  double initial_min_area = 0.0;             // quality baseline for min_area_ratio

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  // Recomputes movable/rotor_triangle flags and, if reset_baseline is set,
  // the initial_min_area quality baseline. Validates orientation.
  void finalize(bool reset_baseline);
};

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c);
double triangle_area(const Mesh& mesh, int t);
Vec2 centroid(const Mesh& mesh, int t);
double min_angle_deg(const Mesh& mesh, int t);

MeshQualityReport mesh_quality(const Mesh& mesh);

double region_area(const Mesh& mesh, Region region);

struct DeformResult {
  bool ok = false;
  Mesh mesh;                  // valid only when ok
  MeshQualityReport quality;  // of the deformed mesh when ok
  int first_inverted = -1;    // triangle index when !ok
};

// Moves every vertex by step * displacement. Rejects the step (ok = false)
// if any triangle's signed area drops to <= 1e-14 of its undeformed area.
// Displacements must vanish on immovable vertices.
DeformResult apply_deformation(const Mesh& mesh, std::span<const Vec2> displacement,
                               double step);

// Splits every triangle into four through the edge midpoints. Region tags and
// edge markers are inherited; the quality baseline is reset at the new level.
Mesh uniform_refine(const Mesh& mesh);

struct DesignVertex {
  int vertex = -1;
  Vec2 normal;           // unit, pointing from iron into air
  Vec2 tangent;          // unit, orthogonal to normal
  double lumped_length;  // half the length of the two adjacent interface edges
};

// Ordered design-interface vertices (open chains anchored on pinned vertices
// first, then closed loops, in deterministic order). Throws TopologyError when
// no interface edge exists.
std::vector<DesignVertex> extract_design_boundary(const Mesh& mesh);

// Smart Laplacian smoothing of vertices strictly interior to one region: a
// vertex moves to its one-ring average only when that improves the worst
// incident angle. Marked curves and region boundaries stay in place, so
// region areas are untouched; only the interior discretization relaxes.
void relax_interior(Mesh& mesh, int sweeps);

// Slides design-interface vertices along their own polyline toward uniform
// arclength spacing (damping in (0, 1] scales the move). The interface as a
// curve is preserved up to corner cutting at the vertex scale; moves that
// would invert an incident triangle are skipped.
void redistribute_interface(Mesh& mesh, double damping);

}  // namespace paretotrace
