#pragma once

#include "singreg/chart.hpp"
#include "singreg/report.hpp"

namespace singreg::atlas {

// membership via the forward map; evaluation failures count as "outside"
bool chart_contains(const Chart& c, const VectorXd& p, double shrink_tol = -1e-9);

// sample nodes of the chart codomain, pulled in by margin, closed faces kept
std::vector<VectorXd> chart_grid(const Chart& c, int resolution, double margin = 1e-3);

// Domain for lattice construction: an open box in R^m, or in the halfspace
// {x1 >= 0} when halfspace is set (the box must then start at x1 = 0).
// Faces at +-unbounded_extent are treated as reaching infinity for the
// safe-step computation.
struct LatticeDomain {
  Box X;
  bool halfspace = false;
  static constexpr double unbounded_extent = 1e18;
};

// Cubic charts x -> x/delta - z at every lattice site whose delta-cube meets
// X. Sites on the halfspace face get half-cube boundary charts. The core
// region S (a sub-box of X) fixes the safe bound delta <= dist(S, edge)/sqrt(m).
Atlas lattice_atlas(double delta, const LatticeDomain& X, const Box& S);

// Composite charts (lattice of step delta over each parent codomain) o parent.
// Requires parent shrink radius r with delta < (1-r)/sqrt(m).
// keep_per_axis > 0 materializes only that many lattice offsets per axis
// (extremes plus center), recording the true population.
Atlas refine_atlas(double delta, const Atlas& K, const Region& S, int keep_per_axis = 0);

struct MultiplicityResult {
  int value = 0;
  bool exact = false;   // interval arithmetic on carrier boxes
  std::string witness;  // cell or sample point attaining the max
};

MultiplicityResult multiplicity(const Atlas& A, const Region& S, int resolution = 0);

struct ShrinkResult {
  bool covered = false;
  double r = 0.0;
  std::vector<std::string> witnesses;  // uncovered sample points
};

ShrinkResult shrink_check(const Atlas& A, const Region& S, double r, int resolution = 0);

// per-order sups of transition maps over overlapping chart pairs in the window
struct TransitionTable {
  std::vector<double> c;  // index k: sup over pairs of max_{|alpha|=k} |d^alpha|
  std::string witness;
};

TransitionTable transition_norms(const Atlas& A, const std::vector<int>& window_ids,
                                 const Region& S, int kmax, int resolution = 0);

struct CertOptions {
  int kmax = 4;
  double tol = 0.05;
  std::vector<int> windows = {16, 32, 64};
  int resolution = 0;   // 0 = auto by dimension
  double margin = 1e-3;
};

// chart-normalization, finite-multiplicity, shrinkability, transition-bounds;
// constants must plateau across the nested windows
CertReport certify_uniformly_regular(const Atlas& A, const Region& S, const CertOptions& opt);

// overlap cardinality between the two families plus two-sided transition norms
CertReport atlases_equivalent(const Atlas& K, const Atlas& Kt, const Region& S,
                              const CertOptions& opt);

int auto_resolution(int m);

}  // namespace singreg::atlas
