#include "paretotrace/mesh_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace paretotrace {

namespace {

int encode_region(const Triangle& t) {
  switch (t.region) {
    case Region::iron: return 0;
    case Region::air: return 1;
    case Region::gap_ring: return 2;
    case Region::coil: return 3 + t.coil;
  }
  return 1;
}

void decode_region(int tag, Triangle& t) {
  if (tag == 0) {
    t.region = Region::iron;
    t.coil = -1;
  } else if (tag == 1) {
    t.region = Region::air;
    t.coil = -1;
  } else if (tag == 2) {
    t.region = Region::gap_ring;
    t.coil = -1;
  } else if (tag >= 3) {
    t.region = Region::coil;
    t.coil = static_cast<std::int8_t>(tag - 3);
  } else {
    throw GeometryError("mesh file: unknown region tag " + std::to_string(tag));
  }
}

void print_double(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

}  // namespace

void save_mesh_text(const Mesh& mesh, std::ostream& out) {
  out << "mesh-v1\n";
  out << mesh.num_vertices() << ' ' << mesh.num_triangles() << ' ' << mesh.marked_edges.size()
      << '\n';
  for (const auto& p : mesh.vertices) {
    print_double(out, p.x());
    out << ' ';
    print_double(out, p.y());
    out << '\n';
  }
  for (const auto& t : mesh.triangles) {
    out << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << ' ' << encode_region(t) << '\n';
  }
  for (const auto& e : mesh.marked_edges) {
    out << e.a << ' ' << e.b << ' ' << static_cast<int>(e.marker) << '\n';
  }
}

void save_mesh_text(const Mesh& mesh, const std::string& path) {
  std::ostringstream ss;
  save_mesh_text(mesh, ss);
  atomic_write_file(path, ss.str());
}

Mesh load_mesh_text(std::istream& in) {
  std::string magic;
  in >> magic;
  if (magic != "mesh-v1") throw GeometryError("mesh file: bad magic '" + magic + "'");
  int nv = 0, nt = 0, ne = 0;
  in >> nv >> nt >> ne;
  if (!in || nv <= 0 || nt <= 0 || ne < 0) throw GeometryError("mesh file: bad header counts");

  Mesh mesh;
  mesh.vertices.resize(nv);
  for (auto& p : mesh.vertices) in >> p.x() >> p.y();
  mesh.triangles.resize(nt);
  for (auto& t : mesh.triangles) {
    int tag = 0;
    in >> t.v[0] >> t.v[1] >> t.v[2] >> tag;
    decode_region(tag, t);
  }
  mesh.marked_edges.resize(ne);
  for (auto& e : mesh.marked_edges) {
    int m = 0;
    in >> e.a >> e.b >> m;
    if (m < 0 || m > 2) throw GeometryError("mesh file: unknown edge marker " + std::to_string(m));
    e.marker = static_cast<EdgeMarker>(m);
  }
  if (!in) throw GeometryError("mesh file: truncated");

  for (const auto& t : mesh.triangles) {
    for (int v : t.v) {
      if (v < 0 || v >= nv) throw GeometryError("mesh file: triangle vertex out of range");
    }
  }
  for (const auto& e : mesh.marked_edges) {
    if (e.a < 0 || e.a >= nv || e.b < 0 || e.b >= nv) {
      throw GeometryError("mesh file: edge vertex out of range");
    }
  }
  mesh.finalize(true);
  return mesh;
}

Mesh load_mesh_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GeometryError("cannot open mesh file: " + path);
  return load_mesh_text(in);
}

void write_vtk(const Mesh& mesh, const std::string& path, const Eigen::VectorXd* point_u,
               const Eigen::VectorXd* cell_bmag) {
  std::ostringstream out;
  out << "# vtk DataFile Version 3.0\n";
  out << "pareto-trace design snapshot\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (const auto& p : mesh.vertices) {
    print_double(out, p.x());
    out << ' ';
    print_double(out, p.y());
    out << " 0\n";
  }
  out << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << '\n';
  for (const auto& t : mesh.triangles) {
    out << "3 " << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << '\n';
  }
  out << "CELL_TYPES " << mesh.num_triangles() << '\n';
  for (int t = 0; t < mesh.num_triangles(); ++t) out << "5\n";

  out << "CELL_DATA " << mesh.num_triangles() << '\n';
  out << "SCALARS region int 1\nLOOKUP_TABLE default\n";
  for (const auto& t : mesh.triangles) out << encode_region(t) << '\n';
  if (cell_bmag && cell_bmag->size() == mesh.num_triangles()) {
    out << "SCALARS B_mag double 1\nLOOKUP_TABLE default\n";
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      print_double(out, (*cell_bmag)(t));
      out << '\n';
    }
  }
  if (point_u && point_u->size() == mesh.num_vertices()) {
    out << "POINT_DATA " << mesh.num_vertices() << '\n';
    out << "SCALARS u double 1\nLOOKUP_TABLE default\n";
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      print_double(out, (*point_u)(v));
      out << '\n';
    }
  }
  atomic_write_file(path, out.str());
}

void atomic_write_file(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out << contents;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace paretotrace
