#include "paretotrace/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <numbers>

namespace paretotrace {

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

double triangle_area(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  return signed_area(mesh.vertices[tri.v[0]], mesh.vertices[tri.v[1]],
                     mesh.vertices[tri.v[2]]);
}

Vec2 centroid(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  return (mesh.vertices[tri.v[0]] + mesh.vertices[tri.v[1]] + mesh.vertices[tri.v[2]]) / 3.0;
}

double min_angle_deg(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  double worst = std::numbers::pi;
  for (int i = 0; i < 3; ++i) {
    const Vec2& p = mesh.vertices[tri.v[i]];
    Vec2 u = mesh.vertices[tri.v[(i + 1) % 3]] - p;
    Vec2 w = mesh.vertices[tri.v[(i + 2) % 3]] - p;
    double cosang = u.dot(w) / (u.norm() * w.norm());
    cosang = std::clamp(cosang, -1.0, 1.0);
    worst = std::min(worst, std::acos(cosang));
  }
  return worst * 180.0 / std::numbers::pi;
}

namespace {

// Winding number of point p around the closed loop formed by rim edges.
// Rim edges are unordered, so accumulate the signed angle per edge using the
// iron-free convention: each marked edge contributes its subtended angle with
// the orientation stored in the edge.
bool inside_rim_loop(const Mesh& mesh, const Vec2& p) {
  double angle = 0.0;
  for (const auto& e : mesh.marked_edges) {
    if (e.marker != EdgeMarker::rotor_rim) continue;
    Vec2 u = mesh.vertices[e.a] - p;
    Vec2 w = mesh.vertices[e.b] - p;
    double cross = u.x() * w.y() - u.y() * w.x();
    double dot = u.dot(w);
    angle += std::atan2(cross, dot);
  }
  return std::abs(angle) > std::numbers::pi;  // |winding| >= 1 up to fp noise
}

}  // namespace

void Mesh::finalize(bool reset_baseline) {
  const int nv = num_vertices();
  movable.assign(nv, 1);
  for (const auto& e : marked_edges) {
    if (e.marker == EdgeMarker::design_interface) continue;  // design vertices move
    movable[e.a] = 0;
    movable[e.b] = 0;
  }

  bool has_rim = std::any_of(marked_edges.begin(), marked_edges.end(), [](const MarkedEdge& e) {
    return e.marker == EdgeMarker::rotor_rim;
  });

  rotor_triangle.assign(triangles.size(), has_rim ? 0 : 1);
  if (has_rim) {
    for (int v = 0; v < nv; ++v) {
      if (movable[v] && !inside_rim_loop(*this, vertices[v])) movable[v] = 0;
    }
    for (int t = 0; t < num_triangles(); ++t) {
      if (inside_rim_loop(*this, centroid(*this, t))) rotor_triangle[t] = 1;
    }
  }

  double amin = std::numeric_limits<double>::max();
  for (int t = 0; t < num_triangles(); ++t) {
    double a = triangle_area(*this, t);
    if (a <= 0.0) {
      throw GeometryError("mesh has non-positive triangle " + std::to_string(t));
    }
    amin = std::min(amin, a);
  }
  if (reset_baseline || initial_min_area <= 0.0) initial_min_area = amin;
}

MeshQualityReport mesh_quality(const Mesh& mesh) {
  MeshQualityReport rep;
  rep.min_angle_deg = 180.0;
  double amin = std::numeric_limits<double>::max();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    double a = triangle_area(mesh, t);
    if (a <= 0.0) ++rep.inverted_count;
    amin = std::min(amin, a);
    rep.min_angle_deg = std::min(rep.min_angle_deg, min_angle_deg(mesh, t));
  }
  rep.min_area_ratio = mesh.initial_min_area > 0.0 ? amin / mesh.initial_min_area : 1.0;
  return rep;
}

double region_area(const Mesh& mesh, Region region) {
  double total = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.triangles[t].region == region) total += triangle_area(mesh, t);
  }
  return total;
}

DeformResult apply_deformation(const Mesh& mesh, std::span<const Vec2> displacement,
                               double step) {
  if (static_cast<int>(displacement.size()) != mesh.num_vertices()) {
    throw std::invalid_argument("displacement size does not match vertex count");
  }
  if (step < 0.0) throw std::invalid_argument("deformation step must be >= 0");
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (!mesh.movable[v] && displacement[v].squaredNorm() != 0.0) {
      throw std::invalid_argument("displacement must vanish on immovable vertex " +
                                  std::to_string(v));
    }
  }

  DeformResult result;
  result.mesh = mesh;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    result.mesh.vertices[v] += step * displacement[v];
  }

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    double before = triangle_area(mesh, t);
    double after = triangle_area(result.mesh, t);
    if (after <= 1e-14 * before) {
      result.ok = false;
      result.first_inverted = t;
      return result;
    }
  }
  result.ok = true;
  result.quality = mesh_quality(result.mesh);
  return result;
}

Mesh uniform_refine(const Mesh& mesh) {
  Mesh fine;
  fine.vertices = mesh.vertices;

  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    int id = fine.num_vertices();
    fine.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
    midpoint.emplace(key, id);
    return id;
  };

  fine.triangles.reserve(mesh.triangles.size() * 4);
  for (const auto& tri : mesh.triangles) {
    int m01 = mid(tri.v[0], tri.v[1]);
    int m12 = mid(tri.v[1], tri.v[2]);
    int m20 = mid(tri.v[2], tri.v[0]);
    for (auto child : {std::array<int, 3>{tri.v[0], m01, m20},
                       std::array<int, 3>{tri.v[1], m12, m01},
                       std::array<int, 3>{tri.v[2], m20, m12},
                       std::array<int, 3>{m01, m12, m20}}) {
      Triangle c;
      c.v = child;
      c.region = tri.region;
      c.coil = tri.coil;
      fine.triangles.push_back(c);
    }
  }

  fine.marked_edges.reserve(mesh.marked_edges.size() * 2);
  for (const auto& e : mesh.marked_edges) {
    int m = mid(e.a, e.b);
    fine.marked_edges.push_back({e.a, m, e.marker});
    fine.marked_edges.push_back({m, e.b, e.marker});
  }

  fine.finalize(true);
  return fine;
}

std::vector<DesignVertex> extract_design_boundary(const Mesh& mesh) {
  // Edge -> adjacent triangle lookup.
  std::map<std::pair<int, int>, std::array<int, 2>> edge_tris;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) {
      auto key = std::minmax(tri.v[i], tri.v[(i + 1) % 3]);
      auto [it, inserted] = edge_tris.try_emplace(key, std::array<int, 2>{t, -1});
      if (!inserted) it->second[1] = t;
    }
  }

  // Orient each interface edge a->b with iron on the left, so the outward
  // normal (iron -> air) is the right-hand perpendicular.
  struct OrientedEdge {
    int a, b;
    double length;
    Vec2 normal;
  };
  std::vector<OrientedEdge> edges;
  for (const auto& e : mesh.marked_edges) {
    if (e.marker != EdgeMarker::design_interface) continue;
    auto it = edge_tris.find(std::minmax(e.a, e.b));
    if (it == edge_tris.end() || it->second[1] < 0) {
      throw TopologyError("design interface edge is not shared by two triangles");
    }
    int t0 = it->second[0];
    int t1 = it->second[1];
    Region r0 = mesh.triangles[t0].region;
    Region r1 = mesh.triangles[t1].region;
    int iron_tri;
    if (r0 == Region::iron && r1 == Region::air) {
      iron_tri = t0;
    } else if (r1 == Region::iron && r0 == Region::air) {
      iron_tri = t1;
    } else {
      throw TopologyError("design interface edge does not separate iron from air");
    }

    OrientedEdge oe;
    oe.a = e.a;
    oe.b = e.b;
    Vec2 d = mesh.vertices[oe.b] - mesh.vertices[oe.a];
    oe.length = d.norm();
    Vec2 n(d.y(), -d.x());  // right-hand perpendicular of a->b
    Vec2 to_iron = centroid(mesh, iron_tri) - 0.5 * (mesh.vertices[oe.a] + mesh.vertices[oe.b]);
    if (n.dot(to_iron) > 0.0) {  // iron must lie on the left
      std::swap(oe.a, oe.b);
      n = -n;
    }
    oe.normal = n / oe.length;
    edges.push_back(oe);
  }
  if (edges.empty()) throw TopologyError("mesh has no design interface");

  // Chain edges into open chains (ends anchored on pinned vertices, e.g. the
  // rotor rim) and closed loops. A vertex between two interface edges becomes
  // a design vertex; chain endpoints carry no degree of freedom.
  std::map<int, int> next_edge;  // start vertex -> edge index
  std::map<int, int> in_degree;
  for (int i = 0; i < static_cast<int>(edges.size()); ++i) {
    if (!next_edge.emplace(edges[i].a, i).second) {
      throw TopologyError("design interface is not a simple curve");
    }
    ++in_degree[edges[i].b];
  }

  std::vector<DesignVertex> out;
  std::vector<std::uint8_t> used(edges.size(), 0);
  auto emit = [&](const OrientedEdge& cur, const OrientedEdge& nxt) {
    DesignVertex dv;
    dv.vertex = cur.b;
    Vec2 n = cur.normal + nxt.normal;
    double len = n.norm();
    if (len == 0.0) throw TopologyError("degenerate corner on design interface");
    dv.normal = n / len;
    dv.tangent = Vec2(-dv.normal.y(), dv.normal.x());
    dv.lumped_length = 0.5 * (cur.length + nxt.length);
    out.push_back(dv);
  };

  // open chains first, in order of their start vertex ids
  for (auto [start_vertex, start_edge] : next_edge) {
    if (in_degree.count(start_vertex)) continue;  // not a chain start
    int e = start_edge;
    while (true) {
      used[e] = 1;
      const OrientedEdge& cur = edges[e];
      auto it = next_edge.find(cur.b);
      if (it == next_edge.end()) break;  // chain end: no design vertex there
      emit(cur, edges[it->second]);
      e = it->second;
    }
  }
  // remaining edges form closed loops
  for (auto [start_vertex, start_edge] : next_edge) {
    if (used[start_edge]) continue;
    int e = start_edge;
    do {
      used[e] = 1;
      const OrientedEdge& cur = edges[e];
      auto it = next_edge.find(cur.b);
      if (it == next_edge.end()) throw TopologyError("design interface loop is open");
      emit(cur, edges[it->second]);
      e = it->second;
    } while (e != start_edge);
  }
  if (out.empty()) throw TopologyError("design interface has no movable vertices");
  return out;
}

void redistribute_interface(Mesh& mesh, double damping) {
  // undirected interface adjacency
  std::map<int, std::vector<int>> nbr;
  for (const auto& e : mesh.marked_edges) {
    if (e.marker != EdgeMarker::design_interface) continue;
    nbr[e.a].push_back(e.b);
    nbr[e.b].push_back(e.a);
  }
  if (nbr.empty()) return;

  std::vector<std::vector<int>> star(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    for (int v : mesh.triangles[t].v) star[v].push_back(t);
  }
  auto local_ok = [&](int v) {
    for (int t : star[v]) {
      if (triangle_area(mesh, t) <= 0.0) return false;
    }
    return true;
  };

  std::set<int> visited;
  auto walk = [&](int start, int second) {
    std::vector<int> chain = {start, second};
    visited.insert(start);
    visited.insert(second);
    while (true) {
      int cur = chain.back(), prev = chain[chain.size() - 2];
      const auto& adj = nbr[cur];
      if (adj.size() != 2) break;            // chain end (anchored vertex)
      int next = adj[0] == prev ? adj[1] : adj[0];
      if (next == chain.front()) {           // closed loop
        chain.push_back(next);
        break;
      }
      chain.push_back(next);
      visited.insert(next);
    }
    return chain;
  };

  std::vector<std::vector<int>> chains;
  for (const auto& [v, adj] : nbr) {   // open chains start at degree-1 vertices
    if (adj.size() == 1 && !visited.count(v)) chains.push_back(walk(v, adj[0]));
  }
  for (const auto& [v, adj] : nbr) {   // remaining closed loops
    if (!visited.count(v)) chains.push_back(walk(v, adj[0]));
  }

  for (const auto& chain : chains) {
    const int n = static_cast<int>(chain.size());
    if (n < 3) continue;
    std::vector<double> s(n, 0.0);
    std::vector<Vec2> old_pos(n);
    for (int i = 0; i < n; ++i) old_pos[i] = mesh.vertices[chain[i]];
    for (int i = 1; i < n; ++i) s[i] = s[i - 1] + (old_pos[i] - old_pos[i - 1]).norm();
    double total = s[n - 1];
    if (total <= 0.0) continue;

    auto point_at = [&](double target) {
      int seg = 0;
      while (seg + 2 < n && s[seg + 1] < target) ++seg;
      double len = s[seg + 1] - s[seg];
      double f = len > 0.0 ? (target - s[seg]) / len : 0.0;
      return Vec2(old_pos[seg] + f * (old_pos[seg + 1] - old_pos[seg]));
    };

    // interior vertices only; endpoints (or the loop seam) stay anchored
    for (int i = 1; i < n - 1; ++i) {
      double target = s[i] + damping * (total * i / (n - 1) - s[i]);
      Vec2 saved = mesh.vertices[chain[i]];
      mesh.vertices[chain[i]] = point_at(std::clamp(target, 0.0, total));
      if (!local_ok(chain[i])) mesh.vertices[chain[i]] = saved;
    }
  }
}

void relax_interior(Mesh& mesh, int sweeps) {
  const int nv = mesh.num_vertices();
  std::vector<std::vector<int>> star(nv);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    for (int v : mesh.triangles[t].v) star[v].push_back(t);
  }
  std::vector<std::uint8_t> candidate(nv, 1);
  for (const auto& e : mesh.marked_edges) {
    candidate[e.a] = 0;
    candidate[e.b] = 0;
  }
  for (int v = 0; v < nv; ++v) {
    if (!candidate[v] || star[v].empty()) {
      candidate[v] = 0;
      continue;
    }
    const Triangle& first = mesh.triangles[star[v][0]];
    for (int t : star[v]) {
      const Triangle& tri = mesh.triangles[t];
      if (tri.region != first.region || tri.coil != first.coil) {
        candidate[v] = 0;
        break;
      }
    }
  }

  auto local_min_angle = [&](int v) {
    double worst = 180.0;
    for (int t : star[v]) worst = std::min(worst, min_angle_deg(mesh, t));
    return worst;
  };
  auto local_areas_ok = [&](int v) {
    for (int t : star[v]) {
      if (triangle_area(mesh, t) <= 0.0) return false;
    }
    return true;
  };

  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int v = 0; v < nv; ++v) {
      if (!candidate[v]) continue;
      Vec2 sum(0, 0);
      int count = 0;
      for (int t : star[v]) {
        for (int u : mesh.triangles[t].v) {
          if (u != v) {
            sum += mesh.vertices[u];
            ++count;
          }
        }
      }
      Vec2 old = mesh.vertices[v];
      double before = local_min_angle(v);
      mesh.vertices[v] = sum / count;
      if (!local_areas_ok(v) || local_min_angle(v) <= before) mesh.vertices[v] = old;
    }
  }
}

}  // namespace paretotrace
