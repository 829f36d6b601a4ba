#pragma once

#include "paretotrace/mesh.hpp"

namespace paretotrace {

// Synthetic annular machine cross-section. Lengths in meters, angles in
// degrees. The rotor carries a single iron bar aligned with the y-axis; two
// opposing coil sectors in a non-magnetic stator produce a one-pole-pair
// field whose axis is field_angle_deg away from the y-axis.
//
// Bar styles:
//   spanning  -- straight sides |x| = w, top and bottom rounded by the rotor
//                rim itself; the iron touches the rim and is pinned there, so
//                the design interface is the two straight sides (open chains).
//   floating  -- free stadium (straight sides plus half-disk caps of radius w)
//                strictly inside the rotor; the interface is one closed loop.
struct GeometryDescriptor {
  enum class BarStyle { spanning, floating };

  double rotor_radius = 0.05;
  double gap_r1 = 0.052;  // torque ring, inner
  double gap_r2 = 0.058;  // torque ring, outer
  double stator_inner = 0.060;
  double stator_outer = 0.090;
  double coil_inner = 0.062;
  double coil_outer = 0.082;
  double coil_span_deg = 90.0;
  double field_angle_deg = 45.0;
  BarStyle bar_style = BarStyle::spanning;
  double bar_half_width = 0.0265;     // w
  double bar_straight_length = 0.05;  // floating style only; 0 gives a disk
  bool stator_yoke = true;            // iron return ring outside the coils
  double mesh_size = 0.0035;   // target edge length outside the rotor
  // Design-interface spacing (spanning style). The rotor is deliberately
  // coarser than the rest of the machine: few design handles behave far
  // better under large shape changes, in the spirit of multi-resolution
  // optimization, while the torque ring keeps its fine quadrature.
  double interface_size = 0.01;
};

// Validates the descriptor, throwing GeometryError with a description of the
// first inconsistency found.
void validate_geometry(const GeometryDescriptor& g);

Mesh build_reference_geometry(const GeometryDescriptor& g);

// Area of the exact stadium: 2*w*l + pi*w^2.
double stadium_area(double half_width, double straight_length);

// Area of the spanning bar: the strip |x| <= w intersected with the rotor disk.
double spanning_bar_area(double half_width, double rotor_radius);

}  // namespace paretotrace
