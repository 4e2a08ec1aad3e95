#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ptrap {

using Vec3 = Eigen::Vector3d;

/// Parametric two-layer segmented trap. All lengths in metres.
///
/// Layout: x is the trap axis, the inner faces of the two wafers sit on the
/// planes z = +s/2 and z = -s/2. Each layer carries one RF rail and a row of
/// DC segments on opposite sides of a slit of width g. The layers are
/// crossed, so the top RF rail (y > 0) faces the bottom DC row and vice
/// versa. Electrodes are the inner face plus the slit wall of height t.
struct TrapGeometryParams {
  double layer_thickness = 125e-6;   // t
  double layer_separation = 125e-6;  // s
  double electrode_length = 600e-6;  // w, axial length of the RF rails
  double rf_dc_gap = 126e-6;         // g, slit width
  double segment_width = 45e-6;      // k
  double segment_gap = 15e-6;        // h_gap
  int n_segments = 10;
  double axial_extent = 600e-6;      // room reserved for the DC row
  double lateral_width = 400e-6;     // y-extent of every electrode strip

  double segment_pitch() const { return segment_width + segment_gap; }
  /// Axial centre of segment j (0-based), row centred on x = 0.
  double segment_center(int j) const;

  /// Throws ConfigError when any invariant is violated.
  void validate() const;
};

/// Controls the panel size of build_two_layer; lengths in metres.
struct MeshOptions {
  double base_panel = 15e-6;  // interior edge length at refinement 1
  double edge_band = 30e-6;   // strip along each slit edge meshed at half size
  bool slit_walls = true;     // mesh the slit-facing side wall of each wafer
};

/// Flat quadrilateral boundary element.
struct Panel {
  std::array<Vec3, 4> vertices;
  Vec3 centroid = Vec3::Zero();
  double area = 0.0;

  // Local frame, valid when `rectangular` is set: centroid + a*u + b*v with
  // |a| <= half_u, |b| <= half_v.
  bool rectangular = false;
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
  Vec3 normal = Vec3::UnitZ();
  double half_u = 0.0;
  double half_v = 0.0;

  static Panel rectangle(const Vec3& center, const Vec3& u_axis, const Vec3& v_axis,
                         double half_u, double half_v);
  static Panel quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

  /// Longest edge length.
  double size() const;
};

struct ElectrodeMesh {
  std::vector<Panel> panels;
  std::vector<int> electrode_of;            // per panel
  std::vector<std::string> electrode_names;  // per electrode

  // Trap meshes only: electrode ids of the (top, bottom) DC pair forming
  // axial segment j, and the axial centre of that segment.
  std::vector<std::array<int, 2>> segment_electrodes;
  std::vector<double> segment_centers;

  int electrode_count() const { return static_cast<int>(electrode_names.size()); }
  int panel_count() const { return static_cast<int>(panels.size()); }
  int electrode_id(std::string_view name) const;
  std::vector<int> panels_of(int electrode) const;
  double electrode_area(int electrode) const;
  double total_area() const;
  /// Smallest distance from `p` to any panel surface minus that panel's size;
  /// negative when `p` is within one panel size of an electrode.
  double clearance(const Vec3& p) const;
  /// Distance from `p` to the nearest panel surface.
  double surface_distance(const Vec3& p) const;
};

/// Panelize the two-layer trap. Electrodes: RF1 (top), RF2 (bottom), then
/// DC1..DCn on the top layer and DC(n+1)..DC(2n) on the bottom layer, both
/// ordered by increasing x.
ElectrodeMesh build_two_layer(const TrapGeometryParams& params, int refinement,
                              const MeshOptions& options = {});

/// Cube-projected sphere with 6*(4*refinement)^2 panels, single electrode "S".
ElectrodeMesh build_sphere(double radius, int refinement);

/// Analytic surface area of the parametric electrodes.
double analytic_electrode_area(const TrapGeometryParams& params, bool slit_walls = true);

/// One record per value with the named field replaced. Names: g, k, h_gap,
/// s, t, w. Values in metres.
std::vector<TrapGeometryParams> sweep_parameter(const TrapGeometryParams& base,
                                                std::string_view name,
                                                const std::vector<double>& values);

/// Panel list, one panel per line: 12 vertex coordinates in um, then the label.
void write_mesh_dump(std::ostream& out, const ElectrodeMesh& mesh);

}  // namespace ptrap
