#include <doctest.h>

#include "paretotrace/mesh.hpp"
#include "paretotrace/mesh_io.hpp"
#include "paretotrace/reference_geometry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace paretotrace;

namespace {

// Two triangles forming a unit square, no markers: every vertex movable.
Mesh unit_square_patch() {
  Mesh m;
  m.vertices = {Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)};
  m.triangles.resize(2);
  m.triangles[0].v = {0, 1, 2};
  m.triangles[1].v = {0, 2, 3};
  for (auto& t : m.triangles) t.region = Region::iron;
  m.finalize(true);
  return m;
}

GeometryDescriptor default_geometry() { return GeometryDescriptor{}; }

}  // namespace

TEST_CASE("reference geometry: stadium iron area matches the analytic value") {
  GeometryDescriptor g = default_geometry();
  g.bar_style = GeometryDescriptor::BarStyle::floating;
  g.bar_half_width = 0.015;
  g.stator_yoke = false;  // rotor iron only for the analytic comparison
  g.mesh_size = g.bar_half_width / 4.0;
  Mesh mesh = build_reference_geometry(g);
  double expected = stadium_area(g.bar_half_width, g.bar_straight_length);
  double actual = region_area(mesh, Region::iron);
  CHECK(std::abs(actual - expected) / expected < 0.02);
}

TEST_CASE("reference geometry: degenerate gap ring is rejected") {
  GeometryDescriptor g = default_geometry();
  g.gap_r2 = g.gap_r1;
  CHECK_THROWS_AS(build_reference_geometry(g), GeometryError);
  g = default_geometry();
  g.rotor_radius = g.stator_inner;
  CHECK_THROWS_AS(build_reference_geometry(g), GeometryError);
}

TEST_CASE("reference geometry: default mesh quality baseline") {
  // regression baselines measured on the shipped defaults
  Mesh mesh = build_reference_geometry(default_geometry());
  MeshQualityReport q = mesh_quality(mesh);
  CHECK(q.inverted_count == 0);
  CHECK(q.min_angle_deg >= 10.0);  // wide spanning bar narrows the lune wedges
  CHECK(q.min_area_ratio == doctest::Approx(1.0));

  GeometryDescriptor slim = default_geometry();
  slim.bar_half_width = 0.015;
  MeshQualityReport qs = mesh_quality(build_reference_geometry(slim));
  CHECK(qs.inverted_count == 0);
  CHECK(qs.min_angle_deg >= 10.0);
}

TEST_CASE("reference geometry: region structure") {
  GeometryDescriptor g = default_geometry();
  Mesh mesh = build_reference_geometry(g);
  // gap ring area matches the annulus
  double ring = region_area(mesh, Region::gap_ring);
  double exact = std::numbers::pi * (g.gap_r2 * g.gap_r2 - g.gap_r1 * g.gap_r1);
  CHECK(std::abs(ring - exact) / exact < 0.02);
  // two coil sectors with equal areas and net-zero signed area sum
  double a0 = 0.0, a1 = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.triangles[t].region != Region::coil) continue;
    (mesh.triangles[t].coil == 0 ? a0 : a1) += triangle_area(mesh, t);
  }
  CHECK(a0 > 0.0);
  CHECK(a0 == doctest::Approx(a1).epsilon(1e-12));
}

TEST_CASE("apply_deformation: zero step returns an identical mesh") {
  Mesh mesh = build_reference_geometry(default_geometry());
  std::vector<Vec2> disp(mesh.num_vertices(), Vec2(1.0, -2.0));
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (!mesh.movable[v]) disp[v] = Vec2(0, 0);
  }
  auto result = apply_deformation(mesh, disp, 0.0);
  REQUIRE(result.ok);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    CHECK(result.mesh.vertices[v] == mesh.vertices[v]);
  }
}

TEST_CASE("apply_deformation: rigid translation preserves areas") {
  Mesh mesh = unit_square_patch();
  std::vector<Vec2> disp(mesh.num_vertices(), Vec2(0.3, -0.7));
  auto result = apply_deformation(mesh, disp, 1.0);
  REQUIRE(result.ok);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    CHECK(triangle_area(result.mesh, t) == doctest::Approx(triangle_area(mesh, t)).epsilon(1e-14));
  }
}

TEST_CASE("apply_deformation: collapsing a triangle is rejected") {
  Mesh mesh = unit_square_patch();
  std::vector<Vec2> disp(mesh.num_vertices(), Vec2(0, 0));
  disp[1] = Vec2(-1.0, 1.0);  // moves (1,0) onto the 0-2 diagonal and beyond
  auto result = apply_deformation(mesh, disp, 1.5);
  CHECK_FALSE(result.ok);
  CHECK(result.first_inverted == 0);
  // and a small step with the same direction passes
  auto small = apply_deformation(mesh, disp, 0.1);
  CHECK(small.ok);
}

TEST_CASE("apply_deformation: displacement on immovable vertices is a contract violation") {
  Mesh mesh = build_reference_geometry(default_geometry());
  std::vector<Vec2> disp(mesh.num_vertices(), Vec2(0, 0));
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (!mesh.movable[v]) {
      disp[v] = Vec2(1e-3, 0);
      break;
    }
  }
  CHECK_THROWS_AS(apply_deformation(mesh, disp, 1.0), std::invalid_argument);
}

TEST_CASE("uniform_refine: quadruples triangles and preserves region areas exactly") {
  Mesh mesh = build_reference_geometry(default_geometry());
  Mesh fine = uniform_refine(mesh);
  CHECK(fine.num_triangles() == 4 * mesh.num_triangles());
  for (Region r : {Region::iron, Region::air, Region::gap_ring, Region::coil}) {
    CHECK(region_area(fine, r) == doctest::Approx(region_area(mesh, r)).epsilon(1e-13));
  }
  MeshQualityReport q = mesh_quality(fine);
  CHECK(q.inverted_count == 0);
}

TEST_CASE("extract_design_boundary: disk normals are radial and orthonormal") {
  GeometryDescriptor g = default_geometry();
  g.bar_style = GeometryDescriptor::BarStyle::floating;
  g.bar_half_width = 0.015;
  g.bar_straight_length = 0.0;  // stadium degenerates to a disk
  Mesh mesh = build_reference_geometry(g);
  auto boundary = extract_design_boundary(mesh);
  REQUIRE(boundary.size() > 10);
  double total_length = 0.0;
  for (const auto& dv : boundary) {
    Vec2 radial = mesh.vertices[dv.vertex].normalized();
    CHECK((dv.normal - radial).norm() < 1e-12);
    CHECK(std::abs(dv.normal.norm() - 1.0) < 1e-14);
    CHECK(dv.normal.dot(dv.tangent) == 0.0);  // orthogonal by construction
    total_length += dv.lumped_length;
  }
  // lumped lengths partition the interface polyline
  double perimeter = 0.0;
  int n = static_cast<int>(boundary.size());
  for (int i = 0; i < n; ++i) {
    perimeter +=
        (mesh.vertices[boundary[i].vertex] - mesh.vertices[boundary[(i + 1) % n].vertex]).norm();
  }
  CHECK(total_length == doctest::Approx(perimeter).epsilon(1e-12));
}

TEST_CASE("extract_design_boundary: normals flip when iron and air swap") {
  Mesh mesh = build_reference_geometry(default_geometry());
  auto base = extract_design_boundary(mesh);
  Mesh swapped = mesh;
  for (auto& t : swapped.triangles) {
    if (t.region == Region::iron) {
      t.region = Region::air;
    } else if (t.region == Region::air) {
      t.region = Region::iron;
    }
  }
  auto flipped = extract_design_boundary(swapped);
  REQUIRE(base.size() == flipped.size());
  // same vertex set; orientation of traversal may differ, so compare by vertex id
  std::vector<Vec2> normal_by_vertex(mesh.num_vertices(), Vec2(0, 0));
  for (const auto& dv : base) normal_by_vertex[dv.vertex] = dv.normal;
  for (const auto& dv : flipped) {
    CHECK((dv.normal + normal_by_vertex[dv.vertex]).norm() < 1e-12);
  }
}

TEST_CASE("extract_design_boundary: all-air rotor reports degenerate topology") {
  Mesh mesh = build_reference_geometry(default_geometry());
  for (auto& t : mesh.triangles) {
    if (t.region == Region::iron) t.region = Region::air;
  }
  Mesh stripped = mesh;
  stripped.marked_edges.erase(
      std::remove_if(stripped.marked_edges.begin(), stripped.marked_edges.end(),
                     [](const MarkedEdge& e) { return e.marker == EdgeMarker::design_interface; }),
      stripped.marked_edges.end());
  CHECK_THROWS_AS(extract_design_boundary(stripped), TopologyError);
}

TEST_CASE("mesh text format: save/load round trip is exact") {
  Mesh mesh = build_reference_geometry(default_geometry());
  std::stringstream ss;
  save_mesh_text(mesh, ss);
  Mesh loaded = load_mesh_text(ss);
  REQUIRE(loaded.num_vertices() == mesh.num_vertices());
  REQUIRE(loaded.num_triangles() == mesh.num_triangles());
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    CHECK(loaded.vertices[v] == mesh.vertices[v]);  // %.17g round trips doubles
    CHECK(loaded.movable[v] == mesh.movable[v]);
  }
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    CHECK(loaded.triangles[t].v == mesh.triangles[t].v);
    CHECK(loaded.triangles[t].region == mesh.triangles[t].region);
    CHECK(loaded.triangles[t].coil == mesh.triangles[t].coil);
  }
}
