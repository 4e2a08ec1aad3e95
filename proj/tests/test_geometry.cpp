#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "ptrap/error.hpp"
#include "ptrap/geometry.hpp"

using namespace ptrap;

namespace {

TrapGeometryParams small_trap() {
  TrapGeometryParams p;
  p.n_segments = 3;
  p.axial_extent = 180e-6;
  p.electrode_length = 240e-6;
  p.lateral_width = 150e-6;
  return p;
}

}  // namespace

TEST_CASE("mesh area matches the analytic electrode area") {
  const auto p = small_trap();
  for (int refinement : {1, 2}) {
    const auto mesh = build_two_layer(p, refinement);
    CHECK(mesh.total_area() == doctest::Approx(analytic_electrode_area(p)).epsilon(1e-12));
  }
  MeshOptions no_walls;
  no_walls.slit_walls = false;
  const auto flat = build_two_layer(p, 1, no_walls);
  CHECK(flat.total_area() == doctest::Approx(analytic_electrode_area(p, false)).epsilon(1e-12));
}

TEST_CASE("electrode labels and segment pairs") {
  const auto p = small_trap();
  const auto mesh = build_two_layer(p, 1);
  REQUIRE(mesh.electrode_count() == 2 + 2 * p.n_segments);
  CHECK(mesh.electrode_names[0] == "RF1");
  CHECK(mesh.electrode_names[1] == "RF2");
  for (int j = 0; j < 2 * p.n_segments; ++j) {
    CHECK(mesh.electrode_names[2 + j] == "DC" + std::to_string(j + 1));
  }
  REQUIRE(mesh.segment_electrodes.size() == 3);
  for (int j = 0; j < p.n_segments; ++j) {
    CHECK(mesh.electrode_names[mesh.segment_electrodes[j][0]] == "DC" + std::to_string(j + 1));
    CHECK(mesh.electrode_names[mesh.segment_electrodes[j][1]] ==
          "DC" + std::to_string(p.n_segments + j + 1));
    CHECK(mesh.segment_centers[j] == doctest::Approx(p.segment_center(j)));
  }
  for (int e = 0; e < mesh.electrode_count(); ++e) CHECK(!mesh.panels_of(e).empty());
}

TEST_CASE("segment row is centred on the origin") {
  const auto p = small_trap();
  CHECK(p.segment_center(1) == doctest::Approx(0.0));
  CHECK(p.segment_center(0) == doctest::Approx(-p.segment_pitch()));
  CHECK(p.segment_center(2) - p.segment_center(1) == doctest::Approx(60e-6));
}

TEST_CASE("trap mesh is symmetric under a half turn about the axis") {
  const auto mesh = build_two_layer(small_trap(), 1);
  int unmatched = 0;
  for (const auto& a : mesh.panels) {
    const Vec3 image(a.centroid.x(), -a.centroid.y(), -a.centroid.z());
    bool found = false;
    for (const auto& b : mesh.panels) {
      if ((b.centroid - image).norm() < 1e-12 && std::abs(b.area - a.area) < 1e-20) {
        found = true;
        break;
      }
    }
    if (!found) ++unmatched;
  }
  CHECK(unmatched == 0);
}

TEST_CASE("geometry validation") {
  auto p = small_trap();
  p.segment_width = -1e-6;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = small_trap();
  p.n_segments = 10;  // does not fit in the axial extent
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = small_trap();
  p.n_segments = 1;
  CHECK_THROWS_AS(build_two_layer(p, 1), ConfigError);
}

TEST_CASE("parameter sweeps replace one field") {
  const auto p = small_trap();
  const auto pts = sweep_parameter(p, "g", {100e-6, 150e-6});
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].rf_dc_gap == 100e-6);
  CHECK(pts[1].rf_dc_gap == 150e-6);
  CHECK(pts[1].segment_width == p.segment_width);
  CHECK_THROWS_AS(sweep_parameter(p, "bogus", {1e-6}), ConfigError);
  CHECK_THROWS_AS(sweep_parameter(p, "k", {}), ConfigError);
  CHECK_THROWS_AS(sweep_parameter(p, "k", {-1e-6}), ConfigError);
}

TEST_CASE("mesh dump writes one line per panel") {
  const auto mesh = build_two_layer(small_trap(), 1);
  std::ostringstream out;
  write_mesh_dump(out, mesh);
  std::istringstream in(out.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') ++lines;
  }
  CHECK(lines == mesh.panel_count());
}

TEST_CASE("sphere mesh is closed and close to the true area") {
  const double r = 1e-3;
  const auto s = build_sphere(r, 3);
  CHECK(s.panel_count() == 6 * 12 * 12);
  CHECK(s.total_area() == doctest::Approx(4.0 * 3.14159265358979 * r * r).epsilon(0.01));
}

TEST_CASE("mesh construction is deterministic") {
  const auto a = build_two_layer(small_trap(), 2);
  const auto b = build_two_layer(small_trap(), 2);
  REQUIRE(a.panel_count() == b.panel_count());
  bool same = true;
  for (int i = 0; i < a.panel_count(); ++i) {
    for (int v = 0; v < 4; ++v) same = same && a.panels[i].vertices[v] == b.panels[i].vertices[v];
  }
  CHECK(same);
  CHECK(a.electrode_of == b.electrode_of);
}
