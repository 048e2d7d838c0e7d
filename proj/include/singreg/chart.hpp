#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "singreg/calculus.hpp"

namespace singreg::atlas {

// Interior charts map onto subsets of the open cube Q^m = (-1,1)^m;
// boundary charts onto Q^m with the first coordinate restricted to [0,1).
enum class ChartKind { Interior, Boundary };

struct Chart {
  std::string id;
  int m = 1;
  ChartKind kind = ChartKind::Interior;

  // fwd: smooth extension of the chart map near its patch, carrier -> R^m.
  // inv: the parametrization, chart coordinates -> carrier. Transitions are
  // fwd_other o inv_this, which stays on the patch, so the extension of fwd
  // is never evaluated off the manifold.
  calculus::MapPtr fwd;
  calculus::MapPtr inv;

  Box codomain;                      // chart image, subset of the normalized cube
  std::optional<Box> carrier_box;    // patch as a carrier-coordinate box, when it is one
  int cofinal_index = 0;             // 0 = fixed part; j >= 1 orders nested windows
  VectorXd anchor;                   // chart-coordinate anchor for weight constants
  std::vector<int> neighbors;        // indices of possibly-overlapping charts

  Box normalized_cube() const {
    Box b = Box::cube(m, -1.0, 1.0);
    if (kind == ChartKind::Boundary) b.lo[0] = 0.0;
    return b;
  }
  std::vector<bool> closed_low_faces() const {
    std::vector<bool> f(m, false);
    if (kind == ChartKind::Boundary) f[0] = (codomain.lo[0] == 0.0);
    return f;
  }
};

struct Atlas {
  int m = 0;
  int carrier_dim = 0;
  std::vector<Chart> charts;
  double shrink_radius = 0.0;               // constructional, 0 when unknown
  std::optional<int> exact_multiplicity;    // constructional annotation
  std::optional<long long> population;      // true chart count when subsampled

  // Closed-form coverage test for constructions that materialize only part of
  // the family: does some chart of the full family with cofinal index <= J
  // map p into the r-shrunk normalized cube? Empty when unavailable.
  std::function<bool(const VectorXd& p, double r, int J)> cover_hook;

  std::vector<int> window(int J) const {
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(charts.size()); ++i)
      if (charts[i].cofinal_index <= J) idx.push_back(i);
    return idx;
  }

  int max_cofinal() const {
    int J = 0;
    for (const auto& c : charts) J = std::max(J, c.cofinal_index);
    return J;
  }

  const Chart& at(int i) const {
    if (i < 0 || i >= static_cast<int>(charts.size()))
      throw IndexError("chart index out of range");
    return charts[i];
  }

  // neighbor candidates of chart i (all other charts when no list was built)
  std::vector<int> neighbor_ids(int i) const {
    if (!charts[i].neighbors.empty()) return charts[i].neighbors;
    std::vector<int> all;
    for (int j = 0; j < static_cast<int>(charts.size()); ++j)
      if (j != i) all.push_back(j);
    return all;
  }
};

// Subset of the carrier on which certification is required.
struct Region {
  std::function<bool(const VectorXd&)> member;
  std::string desc;

  static Region all() {
    return Region{[](const VectorXd&) { return true; }, "everything"};
  }
  bool contains(const VectorXd& p) const { return member ? member(p) : true; }
};

}  // namespace singreg::atlas
