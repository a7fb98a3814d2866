#pragma once

#include <string>
#include <vector>

#include "finsler/metric.hpp"
#include "finsler/tensor.hpp"

// The standard metric set used by the verification suite and the CLI.
// Each entry carries a sampling envelope: a box or ball the checks draw
// base points from (kept away from chart boundaries and, on the sphere
// chart, away from the antipode blow-up), plus flag-norm bounds.

namespace finsler {

struct SampleRegion {
  double x_radius = 1.0;     // base points drawn with |x| <= x_radius
  double flag_lo = 0.3;      // flag norms F(x,y) drawn in [flag_lo, flag_hi]
  double flag_hi = 1.2;
  double ball_epsilon = 0.5; // radius used by ball-based checks at the origin
};

struct ZooEntry {
  std::string id;
  nlohmann::json spec;
  SampleRegion region;
};

inline std::vector<ZooEntry> standard_zoo() {
  std::vector<ZooEntry> z;
  z.push_back({"euclidean",
               {{"kind", "euclidean"}, {"dim", 2}, {"name", "euclidean"}},
               {1.2, 0.3, 1.5, 0.8}});
  z.push_back({"poincare_disk",
               {{"kind", "riemannian_conformal"},
                {"dim", 2},
                {"name", "poincare_disk"},
                {"factor", "2/(1-x1^2-x2^2)"},
                {"domain", {{"type", "ball"}, {"radius", 1.0}}}},
               {0.55, 0.2, 0.9, 0.5}});
  z.push_back({"stereographic_sphere",
               {{"kind", "riemannian_conformal"},
                {"dim", 2},
                {"name", "stereographic_sphere"},
                {"factor", "2/(1+x1^2+x2^2)"}},
               {0.8, 0.2, 1.2, 0.6}});
  z.push_back({"randers_flat",
               {{"kind", "randers"},
                {"dim", 2},
                {"name", "randers_flat"},
                {"alpha", {{1.0, 0.0}, {0.0, 1.0}}},
                {"beta", {0.5, 0.0}}},
               {1.2, 0.3, 1.5, 0.8}});
  z.push_back({"randers_expression",
               {{"kind", "expression"},
                {"dim", 2},
                {"name", "randers_expression"},
                {"F", "sqrt(y1^2+y2^2)+0.5*y1"}},
               {1.2, 0.3, 1.5, 0.8}});
  return z;
}

inline ZooEntry zoo_entry(const std::string& id) {
  for (ZooEntry& e : standard_zoo())
    if (e.id == id) return e;
  throw InputError("unknown zoo metric '" + id + "'");
}

inline Metric zoo_metric(const std::string& id) { return load_metric(zoo_entry(id).spec); }

// 1-homogeneous but with a fundamental tensor that degenerates on the
// coordinate axes; construction must reject it.
inline nlohmann::json degenerate_quartic_spec() {
  return {{"kind", "expression"}, {"dim", 2}, {"name", "quartic_axes"}, {"F", "(y1^4+y2^4)^0.25"}};
}

}  // namespace finsler
