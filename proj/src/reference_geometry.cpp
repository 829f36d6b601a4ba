#include "paretotrace/reference_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace paretotrace {

namespace {

constexpr double kPi = std::numbers::pi;

// Point on the stadium boundary at arclength s, counterclockwise from (w, 0).
Vec2 stadium_point(double w, double l, double s) {
  const double half = 0.5 * l;
  const double cap = kPi * w;
  // piece lengths: right side up, top cap, left side down, bottom cap, right side up
  const double c1 = half, c2 = c1 + cap, c3 = c2 + l, c4 = c3 + cap;
  if (s < c1) return {w, s};
  if (s < c2) {
    double a = (s - c1) / w;  // 0..pi
    return {w * std::cos(a), half + w * std::sin(a)};
  }
  if (s < c3) return {-w, half - (s - c2)};
  if (s < c4) {
    double a = kPi + (s - c3) / w;  // pi..2pi
    return {w * std::cos(a), -half + w * std::sin(a)};
  }
  return {w, -half + (s - c4)};
}

double wrap_angle(double a) {
  while (a < 0.0) a += 2.0 * kPi;
  while (a >= 2.0 * kPi) a -= 2.0 * kPi;
  return a;
}

struct Builder {
  Mesh mesh;

  int add_vertex(const Vec2& p) {
    mesh.vertices.push_back(p);
    return mesh.num_vertices() - 1;
  }

  void add_triangle(int a, int b, int c, Region region, std::int8_t coil = -1) {
    Triangle t;
    t.v = {a, b, c};
    t.region = region;
    t.coil = coil;
    mesh.triangles.push_back(t);
  }
};

using RegionOf = std::function<std::pair<Region, std::int8_t>(const Vec2&)>;

// Band between rings with equal vertex counts; quads split along the shorter
// diagonal. Ring order is counterclockwise and rings are closed loops.
void band_same(Builder& b, const std::vector<int>& inner, const std::vector<int>& outer,
               const RegionOf& region_of) {
  const int c = static_cast<int>(inner.size());
  for (int k = 0; k < c; ++k) {
    int i0 = inner[k], i1 = inner[(k + 1) % c];
    int o0 = outer[k], o1 = outer[(k + 1) % c];
    const auto& v = b.mesh.vertices;
    Vec2 mid = 0.25 * (v[i0] + v[i1] + v[o0] + v[o1]);
    auto [region, coil] = region_of(mid);
    double d1 = (v[i0] - v[o1]).norm();
    double d2 = (v[o0] - v[i1]).norm();
    if (d1 <= d2) {
      b.add_triangle(i0, o0, o1, region, coil);
      b.add_triangle(i0, o1, i1, region, coil);
    } else {
      b.add_triangle(i0, o0, i1, region, coil);
      b.add_triangle(o0, o1, i1, region, coil);
    }
  }
}

// Band between closed rings with arbitrary vertex counts: merges the two
// angular sequences like sorted lists, fanning triangles between them.
void band_zip(Builder& b, const std::vector<int>& inner, const std::vector<int>& outer,
              const RegionOf& region_of) {
  auto angle_of = [&](int v) {
    return wrap_angle(std::atan2(b.mesh.vertices[v].y(), b.mesh.vertices[v].x()));
  };
  const int ni = static_cast<int>(inner.size());
  const int no = static_cast<int>(outer.size());
  // rotate the outer start index next to the inner start angle
  double a0 = angle_of(inner[0]);
  int o0 = 0;
  double best = 10.0;
  for (int m = 0; m < no; ++m) {
    double d = std::abs(wrap_angle(angle_of(outer[m]) - a0 + kPi) - kPi);
    if (d < best) {
      best = d;
      o0 = m;
    }
  }
  int i = 0, o = 0;
  auto inner_at = [&](int k) { return inner[(k) % ni]; };
  auto outer_at = [&](int k) { return outer[(o0 + k) % no]; };
  auto unwrapped = [&](double base, double a) {
    while (a < base - 1e-12) a += 2.0 * kPi;
    return a;
  };
  double ia = angle_of(inner_at(0));
  double oa = unwrapped(ia - kPi, angle_of(outer_at(0)));
  double inext = unwrapped(ia, angle_of(inner_at(1)));
  double onext = unwrapped(oa, angle_of(outer_at(1)));
  while (i < ni || o < no) {
    bool advance_inner = (o >= no) || (i < ni && inext <= onext);
    if (advance_inner) {
      int v0 = inner_at(i), v1 = inner_at(i + 1), w = outer_at(o);
      Vec2 mid = (b.mesh.vertices[v0] + b.mesh.vertices[v1] + b.mesh.vertices[w]) / 3.0;
      auto [region, coil] = region_of(mid);
      b.add_triangle(v0, w, v1, region, coil);
      ++i;
      ia = inext;
      inext = i < ni ? unwrapped(ia, angle_of(inner_at(i + 1))) : 100.0;
    } else {
      int w0 = outer_at(o), w1 = outer_at(o + 1), v = inner_at(i);
      Vec2 mid = (b.mesh.vertices[w0] + b.mesh.vertices[w1] + b.mesh.vertices[v]) / 3.0;
      auto [region, coil] = region_of(mid);
      b.add_triangle(w0, w1, v, region, coil);
      ++o;
      oa = onext;
      onext = o < no ? unwrapped(oa, angle_of(outer_at(o + 1))) : 100.0;
    }
  }
}

// Band between an inner ring of c vertices and an outer ring of 2c vertices.
void band_double(Builder& b, const std::vector<int>& inner, const std::vector<int>& outer,
                 const RegionOf& region_of) {
  const int c = static_cast<int>(inner.size());
  for (int k = 0; k < c; ++k) {
    int i0 = inner[k], i1 = inner[(k + 1) % c];
    int o0 = outer[2 * k], om = outer[2 * k + 1], o1 = outer[(2 * k + 2) % (2 * c)];
    const auto& v = b.mesh.vertices;
    Vec2 mid = (v[i0] + v[i1] + v[om]) / 3.0;
    auto [region, coil] = region_of(mid);
    b.add_triangle(i0, o0, om, region, coil);
    b.add_triangle(i0, om, o1, region, coil);
    b.add_triangle(i0, o1, i1, region, coil);
  }
}

}  // namespace

double stadium_area(double half_width, double straight_length) {
  return 2.0 * half_width * straight_length + kPi * half_width * half_width;
}

double spanning_bar_area(double half_width, double rotor_radius) {
  double w = half_width, r = rotor_radius;
  return 2.0 * (w * std::sqrt(r * r - w * w) + r * r * std::asin(w / r));
}

namespace {

// Rotor interior for the floating stadium: scaled bar polygon, then blended
// air rings out to the rim. Returns the rim ring (uniform angles).
std::vector<int> build_floating_rotor(Builder& b, const GeometryDescriptor& g, int n, int n0,
                                      int K, const std::vector<double>& theta_s,
                                      const std::vector<double>& rho) {
  auto iron_of = [](const Vec2&) { return std::pair<Region, std::int8_t>{Region::iron, -1}; };
  auto air_of = [](const Vec2&) { return std::pair<Region, std::int8_t>{Region::air, -1}; };
  const double h = g.mesh_size;

  double rho_mean = 0.0;
  for (double r : rho) rho_mean += r;
  rho_mean /= n;
  const int m_iron = std::max(K + 1, static_cast<int>(std::lround(rho_mean / h)));

  double rho_geo = 0.0;
  for (double r : rho) rho_geo += std::log(r);
  rho_geo = std::exp(rho_geo / n);

  int center = b.add_vertex({0.0, 0.0});
  std::vector<std::vector<int>> iron_rings(m_iron);
  for (int j = 1; j <= m_iron; ++j) {
    double f = static_cast<double>(j) / m_iron;
    int count = n0 << std::min(j - 1, K);
    int stride = n / count;
    auto& ring = iron_rings[j - 1];
    ring.resize(count);
    for (int m = 0; m < count; ++m) {
      int ray = m * stride;
      double a = theta_s[ray];
      double r = f * rho_geo * std::pow(rho[ray] / rho_geo, f);
      ring[m] = b.add_vertex({r * std::cos(a), r * std::sin(a)});
    }
  }
  for (int m = 0; m < n0; ++m) {
    b.add_triangle(center, iron_rings[0][m], iron_rings[0][(m + 1) % n0], Region::iron);
  }
  for (int j = 1; j < m_iron; ++j) {
    if (iron_rings[j].size() == iron_rings[j - 1].size()) {
      band_same(b, iron_rings[j - 1], iron_rings[j], iron_of);
    } else {
      band_double(b, iron_rings[j - 1], iron_rings[j], iron_of);
    }
  }

  const std::vector<int>& stadium_ring = iron_rings[m_iron - 1];
  for (int i = 0; i < n; ++i) {
    b.mesh.marked_edges.push_back({stadium_ring[i], stadium_ring[(i + 1) % n],
                                   EdgeMarker::design_interface});
  }

  // air zone: blend stadium angles to uniform rim angles, doubling the ray
  // count once so the thin bands outside the rotor see matching chords
  double gap_mean = 0.0;
  for (double r : rho) gap_mean += g.rotor_radius - r;
  gap_mean /= n;
  const int m_air = std::max(1, static_cast<int>(std::lround(gap_mean / h)));

  const int n2 = 2 * n;
  std::vector<double> theta_fine(n2), rho_fine(n2);
  for (int i = 0; i < n; ++i) {
    theta_fine[2 * i] = theta_s[i];
    rho_fine[2 * i] = rho[i];
    double next_theta = (i + 1 < n) ? theta_s[i + 1] : theta_s[0] + 2.0 * kPi;
    theta_fine[2 * i + 1] = 0.5 * (theta_s[i] + next_theta);
    rho_fine[2 * i + 1] = 0.5 * (rho[i] + rho[(i + 1) % n]);
  }

  const int j_double = std::max(1, (m_air + 1) / 2);
  std::vector<int> prev_ring = stadium_ring;
  for (int j = 1; j <= m_air; ++j) {
    double f = static_cast<double>(j) / m_air;
    int count = j >= j_double ? n2 : n;
    int stride = n2 / count;
    std::vector<int> ring(count);
    for (int m = 0; m < count; ++m) {
      int ray = m * stride;
      double theta_u = 2.0 * kPi * ray / n2;
      double a = (1.0 - f) * theta_fine[ray] + f * theta_u;
      double r = rho_fine[ray] + f * (g.rotor_radius - rho_fine[ray]);
      ring[m] = b.add_vertex({r * std::cos(a), r * std::sin(a)});
    }
    if (ring.size() == prev_ring.size()) {
      band_same(b, prev_ring, ring, air_of);
    } else {
      band_double(b, prev_ring, ring, air_of);
    }
    prev_ring = std::move(ring);
  }
  return prev_ring;
}

// Rotor interior for the spanning bar: structured iron grid between the two
// rim arcs, plus transfinite air lunes on both sides. Returns the rim ring.
std::vector<int> build_spanning_rotor(Builder& b, const GeometryDescriptor& g) {
  const double w = g.bar_half_width;
  const double r = g.rotor_radius;
  const double h = g.mesh_size;
  const double y_c = std::sqrt(r * r - w * w);
  const double theta_c = std::atan2(y_c, w);

  const double hi = std::max(g.interface_size, h);
  const int nx = std::max(2, static_cast<int>(std::lround(2.0 * w / hi)));
  const int ny = std::max(6, static_cast<int>(std::lround(2.0 * theta_c * r / hi)));

  // Bar rows sit at uniform heights while the rim arcs are sampled uniformly
  // in arclength; the per-row zip below absorbs the resulting tilt.
  std::vector<double> station(ny + 1), arc_theta(ny + 1);
  for (int j = 0; j <= ny; ++j) {
    station[j] = 2.0 * j / ny - 1.0;
    arc_theta[j] = -theta_c + 2.0 * theta_c * j / ny;
  }

  auto add_tri_ccw = [&](int a, int c, int d, Region region) {
    if (a == c || c == d || d == a) return;
    double area = signed_area(b.mesh.vertices[a], b.mesh.vertices[c], b.mesh.vertices[d]);
    if (area > 0.0) {
      b.add_triangle(a, c, d, region);
    } else {
      b.add_triangle(a, d, c, region);
    }
  };

  // iron bar grid: columns x_i, rows filling the disk height at that column
  std::vector<std::vector<int>> bar(nx + 1, std::vector<int>(ny + 1));
  for (int i = 0; i <= nx; ++i) {
    double x = -w + 2.0 * w * i / nx;
    double height = std::sqrt(r * r - x * x);
    for (int j = 0; j <= ny; ++j) {
      bar[i][j] = b.add_vertex({x, height * station[j]});
    }
  }
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      int a = bar[i][j], bb = bar[i + 1][j], c = bar[i + 1][j + 1], d = bar[i][j + 1];
      double d1 = (b.mesh.vertices[a] - b.mesh.vertices[c]).norm();
      double d2 = (b.mesh.vertices[bb] - b.mesh.vertices[d]).norm();
      if (d1 <= d2) {
        add_tri_ccw(a, bb, c, Region::iron);
        add_tri_ccw(a, c, d, Region::iron);
      } else {
        add_tri_ccw(a, bb, d, Region::iron);
        add_tri_ccw(bb, c, d, Region::iron);
      }
    }
  }
  for (int j = 0; j < ny; ++j) {
    b.mesh.marked_edges.push_back({bar[0][j], bar[0][j + 1], EdgeMarker::design_interface});
    b.mesh.marked_edges.push_back({bar[nx][j], bar[nx][j + 1], EdgeMarker::design_interface});
  }

  // Air lunes between each straight side and its rim arc. Each row holds as
  // many points as its local gap supports, and consecutive rows are merged by
  // a fraction-sorted zip, so the wedge tips end in a couple of fat triangles
  // rather than a collapsed fan.
  auto strip_zip = [&](const std::vector<int>& a, const std::vector<int>& bb) {
    const int na = static_cast<int>(a.size()) - 1;
    const int nb = static_cast<int>(bb.size()) - 1;
    int i = 0, k = 0;
    while (i < na || k < nb) {
      double fa = i < na ? static_cast<double>(i + 1) / std::max(1, na) : 2.0;
      double fb = k < nb ? static_cast<double>(k + 1) / std::max(1, nb) : 2.0;
      if (fa <= fb) {
        add_tri_ccw(a[i], a[i + 1], bb[k], Region::air);
        ++i;
      } else {
        add_tri_ccw(a[i], bb[k], bb[k + 1], Region::air);
        ++k;
      }
    }
  };

  auto build_lune = [&](int side_col, bool right) -> std::vector<int> {
    std::vector<std::vector<int>> rows(ny + 1);
    rows[0] = {bar[side_col][0]};
    rows[ny] = {bar[side_col][ny]};
    for (int j = 1; j < ny; ++j) {
      Vec2 side = b.mesh.vertices[bar[side_col][j]];
      double theta = right ? arc_theta[j] : kPi - arc_theta[j];
      Vec2 arc(r * std::cos(theta), r * std::sin(theta));
      int cols = std::max(1, static_cast<int>(std::lround((arc - side).norm() / hi)));
      rows[j].resize(cols + 1);
      rows[j][0] = bar[side_col][j];
      for (int k = 1; k <= cols; ++k) {
        rows[j][k] = b.add_vertex(side + (arc - side) * k / cols);
      }
    }
    for (int j = 0; j < ny; ++j) strip_zip(rows[j], rows[j + 1]);
    std::vector<int> arc_ids(ny + 1);
    for (int j = 0; j <= ny; ++j) arc_ids[j] = rows[j].back();
    return arc_ids;
  };
  auto right_arc = build_lune(nx, true);
  auto left_arc = build_lune(0, false);

  // rim ring counterclockwise from the bottom-right contact point
  std::vector<int> rim;
  rim.reserve(2 * nx + 2 * ny);
  for (int j = 0; j <= ny; ++j) rim.push_back(right_arc[j]);    // -theta_c .. theta_c
  for (int i = nx - 1; i >= 0; --i) rim.push_back(bar[i][ny]);  // top arc
  for (int j = ny - 1; j >= 0; --j) rim.push_back(left_arc[j]);  // pi-theta_c .. pi+theta_c
  for (int i = 1; i < nx; ++i) rim.push_back(bar[i][0]);        // bottom arc
  return rim;
}

}  // namespace

void validate_geometry(const GeometryDescriptor& g) {
  auto fail = [](const std::string& msg) { throw GeometryError("geometry: " + msg); };
  if (g.mesh_size <= 0.0) fail("mesh_size must be positive");
  if (g.rotor_radius <= 0.0) fail("rotor_radius must be positive");
  if (g.gap_r1 >= g.gap_r2) fail("gap ring requires r1 < r2");
  if (g.rotor_radius >= g.gap_r1) fail("gap ring must lie outside the rotor (rotor_radius < r1)");
  if (g.gap_r2 >= g.stator_inner) fail("gap ring must lie inside the stator bore (r2 < stator_inner)");
  if (g.rotor_radius >= g.stator_inner) fail("rotor_radius must be smaller than stator_inner");
  if (g.stator_inner >= g.stator_outer) fail("stator_inner must be smaller than stator_outer");
  if (g.coil_inner < g.stator_inner || g.coil_outer > g.stator_outer || g.coil_inner >= g.coil_outer) {
    fail("coil annulus must satisfy stator_inner <= coil_inner < coil_outer <= stator_outer");
  }
  if (g.coil_span_deg <= 0.0 || g.coil_span_deg > 180.0) fail("coil_span_deg must be in (0, 180]");
  if (g.bar_half_width <= 0.0) fail("bar_half_width must be positive");
  if (g.bar_style == GeometryDescriptor::BarStyle::floating) {
    if (g.bar_straight_length < 0.0) fail("bar_straight_length must be >= 0");
    double tip = 0.5 * g.bar_straight_length + g.bar_half_width;
    if (tip >= 0.95 * g.rotor_radius) fail("floating bar must leave a margin inside the rotor rim");
  } else {
    if (g.bar_half_width >= 0.75 * g.rotor_radius) {
      fail("spanning bar must be narrower than 3/4 of the rotor radius");
    }
  }
}

Mesh build_reference_geometry(const GeometryDescriptor& g) {
  validate_geometry(g);
  const double h = g.mesh_size;

  Builder b;
  std::vector<int> rim_ring;
  bool rim_uniform = false;

  if (g.bar_style == GeometryDescriptor::BarStyle::floating) {
    const double w = g.bar_half_width;
    const double l = g.bar_straight_length;
    const double perimeter = 2.0 * l + 2.0 * kPi * w;

    // Angular resolution: n = n0 * 2^K rays with a coarse hub fan of n0 and K
    // count-doubling rings near the center. n divisible by 4 keeps the coil
    // sector boundaries exactly on mesh rays.
    int n_target = std::max(24, static_cast<int>(std::lround(perimeter / h)));
    int K = 2;
    while ((n_target + (1 << K) - 1) / (1 << K) > 19) ++K;
    int n0 = std::max(10, (n_target + (1 << K) - 1) / (1 << K));
    const int n = n0 << K;

    // stadium boundary samples, uniform in arclength starting at (w, 0)
    std::vector<double> theta_s(n), rho(n);
    for (int i = 0; i < n; ++i) {
      Vec2 p = stadium_point(w, l, perimeter * i / n);
      rho[i] = p.norm();
      theta_s[i] = wrap_angle(std::atan2(p.y(), p.x()));
    }
    theta_s[0] = 0.0;
    for (int i = 1; i < n; ++i) {
      if (theta_s[i] <= theta_s[i - 1]) throw GeometryError("stadium sampling is not star-shaped");
    }
    rim_ring = build_floating_rotor(b, g, n, n0, K, theta_s, rho);
    rim_uniform = true;
  } else {
    rim_ring = build_spanning_rotor(b, g);
  }

  const int n_rim = static_cast<int>(rim_ring.size());
  for (int i = 0; i < n_rim; ++i) {
    b.mesh.marked_edges.push_back({rim_ring[i], rim_ring[(i + 1) % n_rim], EdgeMarker::rotor_rim});
  }

  // --- annular bands outside the rotor ---
  const double span = g.coil_span_deg * kPi / 180.0;
  const double axis = 0.5 * kPi + g.field_angle_deg * kPi / 180.0;  // flux axis, polar
  const double center_plus = wrap_angle(axis + 0.5 * kPi);
  const double center_minus = wrap_angle(axis - 0.5 * kPi);
  auto in_sector = [&](double ang, double ctr) {
    double d = std::abs(wrap_angle(ang - ctr));
    d = std::min(d, 2.0 * kPi - d);
    return d < 0.5 * span;
  };
  auto region_of = [&](const Vec2& p) -> std::pair<Region, std::int8_t> {
    double r = p.norm();
    if (r > g.gap_r1 && r < g.gap_r2) return {Region::gap_ring, -1};
    if (r > g.coil_inner && r < g.coil_outer) {
      double ang = wrap_angle(std::atan2(p.y(), p.x()));
      if (in_sector(ang, center_plus)) return {Region::coil, 0};
      if (in_sector(ang, center_minus)) return {Region::coil, 1};
    }
    if (g.stator_yoke && r > g.coil_outer) return {Region::iron, -1};
    return {Region::air, -1};
  };

  std::vector<double> ladder = {g.rotor_radius, g.gap_r1, g.gap_r2, g.stator_inner,
                                g.coil_inner, g.coil_outer, g.stator_outer};
  std::sort(ladder.begin(), ladder.end());
  ladder.erase(std::unique(ladder.begin(), ladder.end()), ladder.end());

  std::vector<int> cur_ring = rim_ring;
  double cur_r = g.rotor_radius;
  bool need_zip = !rim_uniform;  // first outer ring re-uniformizes the angles
  for (std::size_t seg = 0; seg + 1 < ladder.size(); ++seg) {
    double r_hi = ladder[seg + 1];
    int nsub = std::max(1, static_cast<int>(std::lround((r_hi - cur_r) / h)));
    double radial_step = (r_hi - cur_r) / nsub;
    for (int k = 1; k <= nsub; ++k) {
      double r = cur_r + (r_hi - cur_r) * k / nsub;
      int c = static_cast<int>(cur_ring.size());
      if (need_zip) {
        int c_new = std::max(8, 4 * static_cast<int>(std::lround(c / 4.0)));
        std::vector<int> ring(c_new);
        for (int m = 0; m < c_new; ++m) {
          double a = 2.0 * kPi * m / c_new;
          ring[m] = b.add_vertex({r * std::cos(a), r * std::sin(a)});
        }
        band_zip(b, cur_ring, ring, region_of);
        cur_ring = std::move(ring);
        need_zip = false;
        continue;
      }
      bool dbl = (2.0 * kPi * r / c) > 1.9 * radial_step;
      int c_new = dbl ? 2 * c : c;
      std::vector<int> ring(c_new);
      for (int m = 0; m < c_new; ++m) {
        double a = 2.0 * kPi * m / c_new;
        ring[m] = b.add_vertex({r * std::cos(a), r * std::sin(a)});
      }
      if (dbl) {
        band_double(b, cur_ring, ring, region_of);
      } else {
        band_same(b, cur_ring, ring, region_of);
      }
      cur_ring = std::move(ring);
    }
    cur_r = r_hi;
  }

  int c_out = static_cast<int>(cur_ring.size());
  for (int m = 0; m < c_out; ++m) {
    b.mesh.marked_edges.push_back({cur_ring[m], cur_ring[(m + 1) % c_out],
                                   EdgeMarker::outer_dirichlet});
  }

  relax_interior(b.mesh, 15);
  b.mesh.finalize(true);
  return b.mesh;
}

}  // namespace paretotrace
