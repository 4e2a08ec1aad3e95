#include "ptrap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "ptrap/constants.hpp"
#include "ptrap/error.hpp"

namespace ptrap {

double TrapGeometryParams::segment_center(int j) const {
  return (static_cast<double>(j) - 0.5 * (n_segments - 1)) * segment_pitch();
}

void TrapGeometryParams::validate() const {
  const std::pair<const char*, double> lengths[] = {
      {"layer_thickness", layer_thickness}, {"layer_separation", layer_separation},
      {"electrode_length", electrode_length}, {"rf_dc_gap", rf_dc_gap},
      {"segment_width", segment_width},     {"segment_gap", segment_gap},
      {"axial_extent", axial_extent},       {"lateral_width", lateral_width}};
  for (const auto& [name, value] : lengths) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw ConfigError(std::string("geometry: ") + name + " must be positive");
    }
  }
  if (n_segments < 2) throw ConfigError("geometry: n_segments must be >= 2");
  // Relative slack so that a row of exactly axial_extent is accepted.
  if (axial_extent * (1.0 + 1e-12) < n_segments * segment_pitch()) {
    throw ConfigError("geometry: axial_extent too small to host " +
                      std::to_string(n_segments) + " segments");
  }
}

Panel Panel::rectangle(const Vec3& center, const Vec3& u_axis, const Vec3& v_axis,
                       double hu, double hv) {
  Panel p;
  p.rectangular = true;
  p.u = u_axis.normalized();
  p.v = v_axis.normalized();
  p.normal = p.u.cross(p.v);
  p.half_u = hu;
  p.half_v = hv;
  p.centroid = center;
  p.area = 4.0 * hu * hv;
  p.vertices = {center - hu * p.u - hv * p.v, center + hu * p.u - hv * p.v,
                center + hu * p.u + hv * p.v, center - hu * p.u + hv * p.v};
  return p;
}

Panel Panel::quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  Panel p;
  p.vertices = {a, b, c, d};
  p.centroid = 0.25 * (a + b + c + d);
  const Vec3 vector_area = 0.5 * (c - a).cross(d - b);
  p.area = vector_area.norm();
  p.normal = p.area > 0.0 ? Vec3(vector_area / p.area) : Vec3::UnitZ();
  p.u = (b - a).normalized();
  p.v = p.normal.cross(p.u);
  return p;
}

double Panel::size() const {
  if (rectangular) return 2.0 * std::max(half_u, half_v);
  double longest = 0.0;
  for (int i = 0; i < 4; ++i) {
    longest = std::max(longest, (vertices[(i + 1) % 4] - vertices[i]).norm());
  }
  return longest;
}

int ElectrodeMesh::electrode_id(std::string_view name) const {
  for (int i = 0; i < electrode_count(); ++i) {
    if (electrode_names[i] == name) return i;
  }
  throw ConfigError("unknown electrode '" + std::string(name) + "'");
}

std::vector<int> ElectrodeMesh::panels_of(int electrode) const {
  std::vector<int> out;
  for (int i = 0; i < panel_count(); ++i) {
    if (electrode_of[i] == electrode) out.push_back(i);
  }
  return out;
}

double ElectrodeMesh::electrode_area(int electrode) const {
  double a = 0.0;
  for (int i = 0; i < panel_count(); ++i) {
    if (electrode_of[i] == electrode) a += panels[i].area;
  }
  return a;
}

double ElectrodeMesh::total_area() const {
  double a = 0.0;
  for (const auto& p : panels) a += p.area;
  return a;
}

namespace {

double distance_to_panel(const Panel& p, const Vec3& x) {
  if (!p.rectangular) return (x - p.centroid).norm();
  const Vec3 d = x - p.centroid;
  const double a = std::clamp(d.dot(p.u), -p.half_u, p.half_u);
  const double b = std::clamp(d.dot(p.v), -p.half_v, p.half_v);
  return (d - a * p.u - b * p.v).norm();
}

// Cell edges of [lo, hi] split into n equal cells, generated about the
// midpoint so that mirrored intervals give bitwise mirrored edges.
std::vector<double> uniform_edges(double lo, double hi, int n) {
  const double mid = 0.5 * (lo + hi);
  const double step = (hi - lo) / n;
  std::vector<double> e(n + 1);
  for (int i = 0; i <= n; ++i) e[i] = mid + (i - 0.5 * n) * step;
  e.front() = lo;
  e.back() = hi;
  return e;
}

// Lateral edges of a strip that starts at the slit edge (offset 0) and runs
// outward to `width`: a band at half the panel size, then the interior.
std::vector<double> graded_offsets_to(double width, const MeshOptions& opt, int refinement) {
  const double band = std::min(opt.edge_band, width);
  const int n_band =
      std::max(1, static_cast<int>(std::ceil(band / (0.5 * opt.base_panel) - 1e-9))) * refinement;
  std::vector<double> e = uniform_edges(0.0, band, n_band);
  if (width > band) {
    const int n_rest =
        std::max(1, static_cast<int>(std::ceil((width - band) / opt.base_panel - 1e-9))) *
        refinement;
    auto rest = uniform_edges(band, width, n_rest);
    e.insert(e.end(), rest.begin() + 1, rest.end());
  }
  return e;
}

int axial_cells(double length, const MeshOptions& opt, int refinement) {
  return std::max(1, static_cast<int>(std::ceil(length / opt.base_panel - 1e-9))) * refinement;
}

// Top-layer rectangle [x0,x1] x (slit edge .. outward) meshed into panels.
// `side` = +1 for the strip at y >= g/2, -1 for the strip at y <= -g/2.
void add_strip(ElectrodeMesh& mesh, int electrode, double x0, double x1, int side,
               const TrapGeometryParams& g, const MeshOptions& opt, int refinement) {
  const double z = 0.5 * g.layer_separation;
  const double y_edge = 0.5 * g.rf_dc_gap;
  const auto xs = uniform_edges(x0, x1, axial_cells(x1 - x0, opt, refinement));
  const auto ys = graded_offsets_to(g.lateral_width, opt, refinement);
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
      const double xc = 0.5 * (xs[i] + xs[i + 1]);
      const double yc = side * (y_edge + 0.5 * (ys[j] + ys[j + 1]));
      mesh.panels.push_back(Panel::rectangle(Vec3(xc, yc, z), Vec3::UnitX(), Vec3::UnitY(),
                                             0.5 * (xs[i + 1] - xs[i]),
                                             0.5 * (ys[j + 1] - ys[j])));
      mesh.electrode_of.push_back(electrode);
    }
  }
  if (!opt.slit_walls) return;
  // Metallized slit wall, running from the inner face outward through the wafer.
  const auto zs = graded_offsets_to(g.layer_thickness, opt, refinement);
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    for (std::size_t j = 0; j + 1 < zs.size(); ++j) {
      const double xc = 0.5 * (xs[i] + xs[i + 1]);
      const double zc = z + 0.5 * (zs[j] + zs[j + 1]);
      mesh.panels.push_back(Panel::rectangle(Vec3(xc, side * y_edge, zc), Vec3::UnitX(),
                                             Vec3::UnitZ(), 0.5 * (xs[i + 1] - xs[i]),
                                             0.5 * (zs[j + 1] - zs[j])));
      mesh.electrode_of.push_back(electrode);
    }
  }
}

}  // namespace

double ElectrodeMesh::clearance(const Vec3& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& panel : panels) {
    best = std::min(best, distance_to_panel(panel, p) - panel.size());
  }
  return best;
}

double ElectrodeMesh::surface_distance(const Vec3& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& panel : panels) best = std::min(best, distance_to_panel(panel, p));
  return best;
}

ElectrodeMesh build_two_layer(const TrapGeometryParams& params, int refinement,
                              const MeshOptions& options) {
  params.validate();
  if (refinement < 1) throw ConfigError("geometry: refinement must be >= 1");
  if (!(options.base_panel > 0.0) || !(options.edge_band >= 0.0)) {
    throw ConfigError("geometry: invalid mesh options");
  }

  const int n = params.n_segments;
  ElectrodeMesh mesh;
  mesh.electrode_names.push_back("RF1");
  mesh.electrode_names.push_back("RF2");
  for (int j = 0; j < 2 * n; ++j) mesh.electrode_names.push_back("DC" + std::to_string(j + 1));

  // Top layer: RF1 at y > 0, DC1..DCn at y < 0.
  const double half_w = 0.5 * params.electrode_length;
  add_strip(mesh, 0, -half_w, half_w, +1, params, options, refinement);
  for (int j = 0; j < n; ++j) {
    const double c = params.segment_center(j);
    const double hk = 0.5 * params.segment_width;
    add_strip(mesh, 2 + j, c - hk, c + hk, -1, params, options, refinement);
  }

  // Bottom layer is the image of the top layer under (y, z) -> (-y, -z).
  const std::size_t top_count = mesh.panels.size();
  for (std::size_t i = 0; i < top_count; ++i) {
    const Panel p = mesh.panels[i];
    const Vec3 c(p.centroid.x(), -p.centroid.y(), -p.centroid.z());
    mesh.panels.push_back(Panel::rectangle(c, p.u, p.v, p.half_u, p.half_v));
    const int e = mesh.electrode_of[i];
    mesh.electrode_of.push_back(e == 0 ? 1 : e + n);
  }

  for (int j = 0; j < n; ++j) {
    mesh.segment_electrodes.push_back({2 + j, 2 + n + j});
    mesh.segment_centers.push_back(params.segment_center(j));
  }
  return mesh;
}

ElectrodeMesh build_sphere(double radius, int refinement) {
  if (!(radius > 0.0)) throw ConfigError("sphere radius must be positive");
  if (refinement < 1) throw ConfigError("sphere refinement must be >= 1");
  const int n = 4 * refinement;
  ElectrodeMesh mesh;
  mesh.electrode_names = {"S"};

  // Equiangular cube-sphere grid.
  auto node = [&](const Vec3& normal, const Vec3& t1, const Vec3& t2, int i, int j) {
    const double a = std::tan(-0.25 * constants::pi + 0.5 * constants::pi * i / n);
    const double b = std::tan(-0.25 * constants::pi + 0.5 * constants::pi * j / n);
    return Vec3((normal + a * t1 + b * t2).normalized() * radius);
  };
  const Vec3 axes[3] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  for (int f = 0; f < 3; ++f) {
    for (int sign : {1, -1}) {
      const Vec3 normal = sign * axes[f];
      const Vec3 t1 = axes[(f + 1) % 3];
      const Vec3 t2 = sign * axes[(f + 2) % 3];
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          mesh.panels.push_back(Panel::quad(node(normal, t1, t2, i, j),
                                            node(normal, t1, t2, i + 1, j),
                                            node(normal, t1, t2, i + 1, j + 1),
                                            node(normal, t1, t2, i, j + 1)));
          mesh.electrode_of.push_back(0);
        }
      }
    }
  }
  return mesh;
}

double analytic_electrode_area(const TrapGeometryParams& p, bool slit_walls) {
  const double face = slit_walls ? p.lateral_width + p.layer_thickness : p.lateral_width;
  const double rf = p.electrode_length * face;
  const double dc = p.n_segments * p.segment_width * face;
  return 2.0 * (rf + dc);
}

std::vector<TrapGeometryParams> sweep_parameter(const TrapGeometryParams& base,
                                                std::string_view name,
                                                const std::vector<double>& values) {
  double TrapGeometryParams::*field = nullptr;
  if (name == "g") field = &TrapGeometryParams::rf_dc_gap;
  else if (name == "k") field = &TrapGeometryParams::segment_width;
  else if (name == "h_gap") field = &TrapGeometryParams::segment_gap;
  else if (name == "s") field = &TrapGeometryParams::layer_separation;
  else if (name == "t") field = &TrapGeometryParams::layer_thickness;
  else if (name == "w") field = &TrapGeometryParams::electrode_length;
  else throw ConfigError("sweep: unknown parameter '" + std::string(name) + "'");

  if (values.empty()) throw ConfigError("sweep: empty value list");
  std::vector<TrapGeometryParams> out;
  out.reserve(values.size());
  for (double v : values) {
    if (!(v > 0.0)) throw ConfigError("sweep: values must be positive");
    TrapGeometryParams p = base;
    p.*field = v;
    out.push_back(p);
  }
  return out;
}

void write_mesh_dump(std::ostream& out, const ElectrodeMesh& mesh) {
  out << "# x0 y0 z0 x1 y1 z1 x2 y2 z2 x3 y3 z3 [um] label\n";
  out << std::setprecision(10);
  for (int i = 0; i < mesh.panel_count(); ++i) {
    for (const auto& v : mesh.panels[i].vertices) {
      out << v.x() * 1e6 << ' ' << v.y() * 1e6 << ' ' << v.z() * 1e6 << ' ';
    }
    out << mesh.electrode_names[mesh.electrode_of[i]] << '\n';
  }
}

}  // namespace ptrap
