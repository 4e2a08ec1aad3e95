#pragma once

#include "ptrap/geometry.hpp"

namespace ptrap {

/// Integral of 1/|p - r'| over the panel surface and its gradient with
/// respect to the observation point p. Multiply by sigma/(4 pi eps0) to get
/// potential and potential gradient of a uniformly charged panel.
struct PanelIntegral {
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();
};

/// Closed-form integral for rectangular panels, valid at any p not on the
/// panel itself.
PanelIntegral rectangle_integral(const Panel& panel, const Vec3& p);

/// Integral for arbitrary quadrilaterals by distance-graded Gauss quadrature
/// over the bilinear patch.
PanelIntegral quad_integral(const Panel& panel, const Vec3& p);

/// Integral evaluated at the panel's own centroid. Exact for flat panels
/// (triangle fan about the centroid).
double self_integral(const Panel& panel);

/// Dispatch: rectangle formula when available, quadrature otherwise.
PanelIntegral panel_integral(const Panel& panel, const Vec3& p);

/// Value only, with the self term used when p is the panel's centroid.
double influence(const Panel& source, const Vec3& p, bool self);

}  // namespace ptrap
