#pragma once

#include "paretotrace/mesh.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace paretotrace {

// Plain-text mesh format:
//   mesh-v1
//   nv nt ne
//   nv lines: x y
//   nt lines: i j k region_tag        (region_tag: 0 iron, 1 air, 2 gap ring, 3+k coil k)
//   ne lines: i j marker              (marker: 0 outer dirichlet, 1 rotor rim, 2 design interface)
void save_mesh_text(const Mesh& mesh, std::ostream& out);
void save_mesh_text(const Mesh& mesh, const std::string& path);
Mesh load_mesh_text(std::istream& in);
Mesh load_mesh_text(const std::string& path);

// Legacy ASCII VTK with region tags as cell data; optionally nodal values "u"
// and per-cell flux magnitude "|B|".
void write_vtk(const Mesh& mesh, const std::string& path,
               const Eigen::VectorXd* point_u = nullptr,
               const Eigen::VectorXd* cell_bmag = nullptr);

// Writes through a temporary file in the same directory, then renames.
void atomic_write_file(const std::string& path, const std::string& contents);

}  // namespace paretotrace
