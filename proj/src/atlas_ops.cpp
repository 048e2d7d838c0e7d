#include "singreg/atlas_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

namespace singreg::atlas {
namespace {

using calculus::AffineMap;
using calculus::MapPtr;

constexpr double kUnboundedCut = 1e17;

std::string fmt_point(const VectorXd& v) {
  std::ostringstream os;
  os.precision(10);
  os << "(";
  for (int i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ")";
  return os.str();
}

std::string fmt_site(const std::vector<long long>& z) {
  std::ostringstream os;
  os << "z=(";
  for (std::size_t i = 0; i < z.size(); ++i) os << (i ? "," : "") << z[i];
  os << ")";
  return os.str();
}

bool lex_less(const VectorXd& a, const VectorXd& b) {
  for (int i = 0; i < a.size() && i < b.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

// Inclusive per-axis site bounds for the cubes delta*(z+Q) meeting the open
// box X. Exact at rational face/step ratios: a cube touching X only along a
// face is excluded.
struct SiteRange {
  std::vector<long long> zmin, zmax;
  bool halfspace = false;

  long long count() const {
    long long n = 1;
    for (std::size_t i = 0; i < zmin.size(); ++i) {
      if (zmax[i] < zmin[i]) return 0;
      n *= zmax[i] - zmin[i] + 1;
    }
    return n;
  }
};

SiteRange site_range(double delta, const Box& X, bool halfspace) {
  int m = X.dim();
  SiteRange r;
  r.halfspace = halfspace;
  r.zmin.resize(m);
  r.zmax.resize(m);
  for (int i = 0; i < m; ++i) {
    double v = X.lo[i] / delta - 1.0;  // need z > v
    double u = X.hi[i] / delta + 1.0;  // need z < u
    r.zmin[i] = static_cast<long long>(std::floor(v + 1e-9)) + 1;
    r.zmax[i] = static_cast<long long>(std::ceil(u - 1e-9)) - 1;
  }
  if (halfspace) r.zmin[0] = std::max(r.zmin[0], 0LL);
  return r;
}

// Is y (carrier point in lattice coordinates p/delta) strictly inside the
// r-shrunk cube of some admissible site? Half-cube sites keep [0, r) on the
// first axis.
bool site_covers(const SiteRange& rng, const VectorXd& y, double r) {
  int m = static_cast<int>(y.size());
  std::vector<std::vector<long long>> cand(m);
  for (int i = 0; i < m; ++i) {
    long long base = static_cast<long long>(std::floor(y[i]));
    for (long long z : {base, base + 1})
      if (z >= rng.zmin[i] && z <= rng.zmax[i]) cand[i].push_back(z);
    if (cand[i].empty()) return false;
  }
  std::vector<std::size_t> pick(m, 0);
  while (true) {
    bool inside = true;
    for (int i = 0; i < m && inside; ++i) {
      double d = y[i] - static_cast<double>(cand[i][pick[i]]);
      if (rng.halfspace && i == 0 && cand[0][pick[0]] == 0)
        inside = (d >= -1e-12 && d < r);
      else
        inside = (std::abs(d) < r);
    }
    if (inside) return true;
    int axis = 0;
    while (axis < m && ++pick[axis] == cand[axis].size()) pick[axis++] = 0;
    if (axis == m) return false;
  }
}

// y inside the r-shrunk normalized cube of chart c (open, except the closed
// boundary face)
bool inside_shrunk(const Chart& c, const VectorXd& y, double r) {
  for (int i = 0; i < c.m; ++i) {
    if (c.kind == ChartKind::Boundary && i == 0) {
      if (y[0] < -1e-12 || y[0] >= r) return false;
    } else {
      if (std::abs(y[i]) >= r) return false;
    }
  }
  return true;
}

Box scaled_codomain(const Box& cube, const Box& X, double delta,
                    const std::vector<long long>& z) {
  int m = cube.dim();
  VectorXd lo(m), hi(m);
  for (int i = 0; i < m; ++i) {
    double zi = static_cast<double>(z[i]);
    lo[i] = std::max(cube.lo[i], X.lo[i] / delta - zi);
    hi[i] = std::min(cube.hi[i], X.hi[i] / delta - zi);
  }
  return Box(lo, hi);
}

VectorXd site_vector(const std::vector<long long>& z) {
  VectorXd v(static_cast<int>(z.size()));
  for (std::size_t i = 0; i < z.size(); ++i) v[static_cast<int>(i)] = static_cast<double>(z[i]);
  return v;
}

VectorXd pick_anchor(const Box& codomain) {
  VectorXd zero = VectorXd::Zero(codomain.dim());
  return codomain.contains(zero, 1e-12) ? zero : codomain.center();
}

// per-axis offsets to materialize: everything, or adjacent pairs at
// keep_per_axis stations (extremes plus evenly spaced interior)
std::vector<long long> axis_offsets(long long zmin, long long zmax, int keep) {
  std::vector<long long> out;
  long long n = zmax - zmin + 1;
  if (n <= 0) return out;
  if (keep <= 0 || n <= 2 * static_cast<long long>(keep)) {
    for (long long z = zmin; z <= zmax; ++z) out.push_back(z);
    return out;
  }
  std::vector<long long> stations;
  for (int t = 0; t < keep; ++t) {
    long long s = zmin + static_cast<long long>(
        std::llround(static_cast<double>(t) * static_cast<double>(n - 1) /
                     static_cast<double>(keep - 1)));
    stations.push_back(s);
    if (s + 1 <= zmax) stations.push_back(s + 1);
  }
  std::sort(stations.begin(), stations.end());
  stations.erase(std::unique(stations.begin(), stations.end()), stations.end());
  return stations;
}

std::vector<Chart> build_lattice_charts(double delta, const Box& X, const SiteRange& rng,
                                        int keep_per_axis, const std::string& id_prefix,
                                        std::vector<std::vector<long long>>& sites) {
  int m = X.dim();
  std::vector<std::vector<long long>> per_axis(m);
  for (int i = 0; i < m; ++i) per_axis[i] = axis_offsets(rng.zmin[i], rng.zmax[i], keep_per_axis);
  std::vector<Chart> charts;
  for (int i = 0; i < m; ++i)
    if (per_axis[i].empty()) return charts;

  std::vector<std::size_t> pick(m, 0);
  Eigen::MatrixXd Afwd = Eigen::MatrixXd::Identity(m, m) / delta;
  Eigen::MatrixXd Ainv = Eigen::MatrixXd::Identity(m, m) * delta;
  while (true) {
    std::vector<long long> z(m);
    for (int i = 0; i < m; ++i) z[i] = per_axis[i][pick[i]];
    bool boundary = rng.halfspace && z[0] == 0;

    Chart c;
    c.id = id_prefix + fmt_site(z);
    c.m = m;
    c.kind = boundary ? ChartKind::Boundary : ChartKind::Interior;
    Box cube = Box::cube(m, -1.0, 1.0);
    if (boundary) cube.lo[0] = 0.0;
    c.codomain = scaled_codomain(cube, X, delta, z);
    if (!c.codomain.empty()) {
      VectorXd zv = site_vector(z);
      c.fwd = std::make_shared<AffineMap>(Afwd, -zv);
      c.inv = std::make_shared<AffineMap>(Ainv, delta * zv);
      VectorXd blo(m), bhi(m);
      for (int i = 0; i < m; ++i) {
        blo[i] = std::max(delta * (zv[i] + cube.lo[i]), X.lo[i]);
        bhi[i] = std::min(delta * (zv[i] + cube.hi[i]), X.hi[i]);
      }
      c.carrier_box = Box(blo, bhi);
      c.anchor = pick_anchor(c.codomain);
      c.cofinal_index = 0;
      charts.push_back(std::move(c));
      sites.push_back(std::move(z));
    }

    int axis = 0;
    while (axis < m && ++pick[axis] == per_axis[axis].size()) pick[axis++] = 0;
    if (axis == m) break;
  }
  return charts;
}

void wire_neighbors_by_site(std::vector<Chart>& charts,
                            const std::vector<std::vector<long long>>& sites, int base) {
  std::map<std::vector<long long>, int> index;
  for (std::size_t i = 0; i < sites.size(); ++i)
    index[sites[i]] = base + static_cast<int>(i);
  int m = sites.empty() ? 0 : static_cast<int>(sites.front().size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    std::vector<long long> nb = sites[i];
    std::vector<int> ids;
    std::vector<int> step(m, -1);
    while (true) {
      for (int a = 0; a < m; ++a) nb[a] = sites[i][a] + step[a];
      auto it = index.find(nb);
      if (it != index.end() && it->second != base + static_cast<int>(i))
        ids.push_back(it->second);
      int axis = 0;
      while (axis < m && ++step[axis] == 2) step[axis++] = -1;
      if (axis == m) break;
    }
    std::sort(ids.begin(), ids.end());
    charts[i].neighbors = std::move(ids);
  }
}

// ---- coverage sampling -----------------------------------------------------

struct CoverSample {
  int chart = 0;
  VectorXd x;                                     // chart coordinates
  VectorXd p;                                     // carrier point
  std::vector<std::pair<int, VectorXd>> images;   // (chart id, coordinates of p there)
};

// Sample points of S from the window's charts, excluding the outermost
// cofinal layer (its far edge is covered only by the next window). Images
// under every candidate chart are precomputed so radius scans are box tests.
std::vector<CoverSample> build_cover_samples(const Atlas& A, const std::vector<int>& ids,
                                             const Region& S, int res, double margin) {
  std::vector<char> in_window(A.charts.size(), 0);
  int frontier = 0;
  for (int i : ids) {
    in_window[i] = 1;
    frontier = std::max(frontier, A.charts[i].cofinal_index);
  }
  std::vector<int> sample_ids;
  for (int i : ids)
    if (frontier == 0 || A.charts[i].cofinal_index < frontier) sample_ids.push_back(i);

  std::vector<std::vector<CoverSample>> slots(sample_ids.size());
  parallel_for(static_cast<int>(sample_ids.size()), [&](int s) {
    int i = sample_ids[s];
    const Chart& ci = A.charts[i];
    for (const VectorXd& x : chart_grid(ci, res, margin)) {
      VectorXd p;
      try {
        p = ci.inv->value(x);
      } catch (const SingregError&) {
        continue;
      }
      if (!S.contains(p)) continue;
      CoverSample cs;
      cs.chart = i;
      cs.x = x;
      cs.p = p;
      cs.images.emplace_back(i, x);
      for (int j : A.neighbor_ids(i)) {
        if (!in_window[j]) continue;
        try {
          VectorXd y = A.charts[j].fwd->value(p);
          if (A.charts[j].codomain.contains(y, 1e-9)) cs.images.emplace_back(j, y);
        } catch (const SingregError&) {
        }
      }
      slots[s].push_back(std::move(cs));
    }
  });

  std::vector<CoverSample> out;
  for (auto& v : slots)
    for (auto& cs : v) out.push_back(std::move(cs));
  return out;
}

ShrinkResult eval_cover(const Atlas& A, const std::vector<CoverSample>& samples, double r,
                        int window_J) {
  // a hook answers for the full constructed family, including charts that
  // were not materialized (lattice beyond the sampling rim, subsampled axes)
  bool use_hook = static_cast<bool>(A.cover_hook);
  ShrinkResult res;
  res.r = r;
  res.covered = true;
  std::vector<std::pair<VectorXd, std::string>> bad;
  for (const CoverSample& cs : samples) {
    bool ok = false;
    if (use_hook) {
      ok = A.cover_hook(cs.p, r, window_J);
    } else {
      for (const auto& [j, y] : cs.images)
        if (inside_shrunk(A.charts[j], y, r)) {
          ok = true;
          break;
        }
    }
    if (!ok) {
      res.covered = false;
      bad.emplace_back(cs.p, "chart " + A.charts[cs.chart].id + " x=" + fmt_point(cs.x) +
                                 " p=" + fmt_point(cs.p));
    }
  }
  std::sort(bad.begin(), bad.end(),
            [](const auto& a, const auto& b) { return lex_less(a.first, b.first); });
  for (std::size_t i = 0; i < bad.size() && i < 8; ++i) res.witnesses.push_back(bad[i].second);
  return res;
}

// ---- transition accumulation -----------------------------------------------

struct TransAcc {
  std::vector<double> c;
  double best = -1.0;
  std::string witness;
};

void accumulate_pair(const Chart& ci, const Chart& cj, const Region& S, int kmax, int res,
                     double margin, TransAcc& acc, const std::string& tag) {
  MapPtr trans = calculus::compose(cj.fwd, ci.inv);
  for (const VectorXd& x : chart_grid(ci, res, margin)) {
    VectorXd p;
    try {
      p = ci.inv->value(x);
    } catch (const SingregError&) {
      continue;
    }
    if (!S.contains(p)) continue;
    if (!chart_contains(cj, p, -1e-9)) continue;
    std::vector<calculus::Jet> jets;
    try {
      jets = trans->jets(x, kmax);
    } catch (const SingregError&) {
      continue;
    }
    for (int d = 0; d <= kmax; ++d) {
      double v = 0.0;
      for (const auto& jet : jets) v = std::max(v, jet.max_abs_deriv(d));
      if (v > acc.c[d]) acc.c[d] = v;
      if (v > acc.best) {
        acc.best = v;
        acc.witness = tag + " at x=" + fmt_point(x);
      }
    }
  }
}

TransitionTable transition_over_pairs(const Atlas& A, const Atlas& B,
                                      const std::vector<std::pair<int, int>>& pairs,
                                      const Region& S, int kmax, int res, double margin) {
  std::vector<TransAcc> slots(pairs.size());
  for (auto& s : slots) s.c.assign(kmax + 1, 0.0);
  parallel_for(static_cast<int>(pairs.size()), [&](int idx) {
    const Chart& ci = A.charts[pairs[idx].first];
    const Chart& cj = B.charts[pairs[idx].second];
    accumulate_pair(ci, cj, S, kmax, res, margin, slots[idx], ci.id + " -> " + cj.id);
  });
  TransitionTable table;
  table.c.assign(kmax + 1, 0.0);
  double best = -1.0;
  for (const TransAcc& s : slots) {
    for (int d = 0; d <= kmax; ++d) table.c[d] = std::max(table.c[d], s.c[d]);
    if (s.best > best) {
      best = s.best;
      table.witness = s.witness;
    }
  }
  return table;
}

std::vector<std::pair<int, int>> window_pairs(const Atlas& A, const std::vector<int>& ids) {
  std::vector<char> in_window(A.charts.size(), 0);
  for (int i : ids) in_window[i] = 1;
  std::vector<std::pair<int, int>> pairs;
  for (int i : ids)
    for (int j : A.neighbor_ids(i))
      if (j != i && in_window[j]) pairs.emplace_back(i, j);
  return pairs;
}

// charts of the window that meet S (sampled membership)
std::vector<int> charts_meeting(const Atlas& A, const std::vector<int>& ids, const Region& S,
                                int res, double margin) {
  if (!S.member) return ids;
  std::vector<char> keep(ids.size(), 0);
  parallel_for(static_cast<int>(ids.size()), [&](int s) {
    const Chart& c = A.charts[ids[s]];
    for (const VectorXd& x : chart_grid(c, res, margin)) {
      try {
        if (S.contains(c.inv->value(x))) {
          keep[s] = 1;
          return;
        }
      } catch (const SingregError&) {
      }
    }
  });
  std::vector<int> out;
  for (std::size_t s = 0; s < ids.size(); ++s)
    if (keep[s]) out.push_back(ids[s]);
  return out;
}

MultiplicityResult multiplicity_exact_boxes(const Atlas& A, const std::vector<int>& sel) {
  int n = A.charts.empty() ? 0 : A.charts[sel.front()].carrier_box->dim();
  std::vector<std::vector<double>> cuts(n);
  for (int i : sel) {
    const Box& b = *A.charts[i].carrier_box;
    for (int a = 0; a < n; ++a) {
      cuts[a].push_back(b.lo[a]);
      cuts[a].push_back(b.hi[a]);
    }
  }
  for (auto& v : cuts) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(),
                        [](double a, double b) { return std::abs(a - b) <= 1e-12; }),
            v.end());
  }
  MultiplicityResult res;
  res.exact = true;
  std::vector<std::size_t> cell(n, 0);
  for (int a = 0; a < n; ++a)
    if (cuts[a].size() < 2) return res;
  VectorXd best_mid;
  while (true) {
    VectorXd mid(n);
    for (int a = 0; a < n; ++a) mid[a] = 0.5 * (cuts[a][cell[a]] + cuts[a][cell[a] + 1]);
    int count = 0;
    for (int i : sel) {
      const Box& b = *A.charts[i].carrier_box;
      bool inside = true;
      for (int a = 0; a < n && inside; ++a) inside = (b.lo[a] < mid[a] && mid[a] < b.hi[a]);
      if (inside) ++count;
    }
    if (count > res.value || (count == res.value && count > 0 &&
                              (best_mid.size() == 0 || lex_less(mid, best_mid)))) {
      res.value = count;
      best_mid = mid;
    }
    int axis = 0;
    while (axis < n && ++cell[axis] == cuts[axis].size() - 1) cell[axis++] = 0;
    if (axis == n) break;
  }
  if (best_mid.size() > 0) res.witness = "cell center p=" + fmt_point(best_mid);
  return res;
}

MultiplicityResult multiplicity_sampled(const Atlas& A, const std::vector<int>& sel, int res,
                                        double margin) {
  std::vector<char> selected(A.charts.size(), 0);
  for (int i : sel) selected[i] = 1;
  struct Best {
    int count = 0;
    VectorXd p;
  };
  std::vector<Best> slots(sel.size());
  parallel_for(static_cast<int>(sel.size()), [&](int s) {
    int i = sel[s];
    const Chart& ci = A.charts[i];
    std::vector<int> cand{i};
    for (int j : A.neighbor_ids(i))
      if (selected[j]) cand.push_back(j);
    for (const VectorXd& x : chart_grid(ci, res, margin)) {
      VectorXd p;
      try {
        p = ci.inv->value(x);
      } catch (const SingregError&) {
        continue;
      }
      int count = 0;
      for (int j : cand)
        if (chart_contains(A.charts[j], p, -1e-9)) ++count;
      if (count > slots[s].count ||
          (count == slots[s].count && count > 0 && lex_less(p, slots[s].p)))
        slots[s] = Best{count, p};
    }
  });
  MultiplicityResult out;
  out.exact = false;
  VectorXd best;
  for (const Best& b : slots) {
    if (b.count > out.value || (b.count == out.value && b.count > 0 &&
                                (best.size() == 0 || lex_less(b.p, best)))) {
      out.value = b.count;
      best = b.p;
    }
  }
  if (best.size() > 0) out.witness = "sample p=" + fmt_point(best);
  return out;
}

MultiplicityResult multiplicity_impl(const Atlas& A, const std::vector<int>& ids,
                                     const Region& S, int res, double margin) {
  std::vector<int> sel = charts_meeting(A, ids, S, res, margin);
  if (sel.empty()) return MultiplicityResult{0, true, ""};
  bool boxes = true;
  for (int i : sel)
    if (!A.charts[i].carrier_box) boxes = false;
  bool full = !(A.population && *A.population > static_cast<long long>(A.charts.size()));
  if (boxes && full) return multiplicity_exact_boxes(A, sel);
  MultiplicityResult r = multiplicity_sampled(A, sel, res, margin);
  return r;
}

double normalization_excess(const Chart& c) {
  Box cube = c.normalized_cube();
  double e = 0.0;
  for (int i = 0; i < c.m; ++i) {
    e = std::max(e, cube.lo[i] - c.codomain.lo[i]);
    e = std::max(e, c.codomain.hi[i] - cube.hi[i]);
  }
  return std::max(e, 0.0);
}

double roundtrip_defect(const Chart& c) {
  VectorXd x = c.codomain.center();
  try {
    return (c.fwd->value(c.inv->value(x)) - x).norm();
  } catch (const SingregError&) {
    return std::numeric_limits<double>::infinity();
  }
}

std::vector<int> sorted_windows(const std::vector<int>& windows) {
  std::vector<int> w = windows.empty() ? std::vector<int>{1} : windows;
  std::sort(w.begin(), w.end());
  w.erase(std::unique(w.begin(), w.end()), w.end());
  return w;
}

}  // namespace

Atlas lattice_atlas(double delta, const LatticeDomain& D, const Box& S) {
  int m = D.X.dim();
  if (m < 1) throw SpecError("lattice_atlas: domain must have positive dimension");
  if (!(delta > 0.0)) throw SpecError("lattice_atlas: step must be positive");
  if (S.dim() != m) throw SpecError("lattice_atlas: core region dimension mismatch");
  if (D.halfspace && std::abs(D.X.lo[0]) > 1e-12)
    throw SpecError("lattice_atlas: halfspace domain must start at x1 = 0");

  double safe = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    bool skip_low = (D.halfspace && i == 0) || D.X.lo[i] < -kUnboundedCut;
    bool skip_high = D.X.hi[i] > kUnboundedCut;
    double d_lo = S.lo[i] - D.X.lo[i];
    double d_hi = D.X.hi[i] - S.hi[i];
    if ((!skip_low && d_lo < -1e-12) || (!skip_high && d_hi < -1e-12) ||
        (D.halfspace && i == 0 && S.lo[0] < -1e-12))
      throw SpecError("lattice_atlas: core region must sit inside the domain");
    if (!skip_low) safe = std::min(safe, d_lo);
    if (!skip_high) safe = std::min(safe, d_hi);
  }
  double cap = safe / std::sqrt(static_cast<double>(m));
  if (delta > cap * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "lattice step " << delta << " exceeds dist(S, edge)/sqrt(m) = " << cap;
    throw DeltaTooLarge(os.str());
  }

  // materialize only near S on axes that reach infinity
  Box Xm = D.X;
  for (int i = 0; i < m; ++i) {
    if (Xm.lo[i] < -kUnboundedCut) Xm.lo[i] = S.lo[i] - 3.0 * delta;
    if (Xm.hi[i] > kUnboundedCut) Xm.hi[i] = S.hi[i] + 3.0 * delta;
  }
  SiteRange rng = site_range(delta, Xm, D.halfspace);

  Atlas A;
  A.m = m;
  A.carrier_dim = m;
  A.shrink_radius = 0.5;
  A.exact_multiplicity = 1 << m;
  std::vector<std::vector<long long>> sites;
  A.charts = build_lattice_charts(delta, D.X, rng, 0, "", sites);
  wire_neighbors_by_site(A.charts, sites, 0);
  SiteRange full = site_range(delta, D.X, D.halfspace);  // unclipped family
  A.cover_hook = [delta, full](const VectorXd& p, double r, int) {
    return site_covers(full, p / delta, r);
  };
  return A;
}

Atlas refine_atlas(double delta, const Atlas& K, const Region& S, int keep_per_axis) {
  if (K.charts.empty()) throw SpecError("refine_atlas: empty parent atlas");
  int m = K.m;
  if (!(K.shrink_radius > 0.0 && K.shrink_radius < 1.0))
    throw SpecError("refine_atlas: parent shrink radius unknown");
  double cap = (1.0 - K.shrink_radius) / std::sqrt(static_cast<double>(m));
  if (!(delta > 0.0) || delta >= cap * (1.0 - 1e-12)) {
    std::ostringstream os;
    os << "refinement step " << delta << " needs delta < (1-r)/sqrt(m) = " << cap;
    throw DeltaTooLarge(os.str());
  }
  (void)S;  // every parent chart is refined; the region matters at certification time

  Atlas M;
  M.m = m;
  M.carrier_dim = K.carrier_dim;
  M.shrink_radius = 0.5;

  struct ParentSites {
    SiteRange range;
    int cofinal = 0;
  };
  auto parent_info = std::make_shared<std::vector<ParentSites>>();
  auto parent_charts = std::make_shared<std::vector<Chart>>(K.charts);

  long long population = 0;
  std::vector<int> parent_first(K.charts.size(), 0);
  std::vector<int> parent_count(K.charts.size(), 0);
  Eigen::MatrixXd Afwd = Eigen::MatrixXd::Identity(m, m) / delta;
  Eigen::MatrixXd Ainv = Eigen::MatrixXd::Identity(m, m) * delta;

  for (std::size_t pi = 0; pi < K.charts.size(); ++pi) {
    const Chart& P = K.charts[pi];
    bool half = (P.kind == ChartKind::Boundary) && P.codomain.lo[0] == 0.0;
    SiteRange rng = site_range(delta, P.codomain, half);
    parent_info->push_back(ParentSites{rng, P.cofinal_index});
    population += rng.count();
    parent_first[pi] = static_cast<int>(M.charts.size());

    const AffineMap* paff = dynamic_cast<const AffineMap*>(P.fwd.get());
    bool diag = paff != nullptr;
    if (diag)
      for (int a = 0; a < m && diag; ++a)
        for (int b = 0; b < m && diag; ++b)
          diag = (a == b) ? (paff->A()(a, b) > 0.0) : (std::abs(paff->A()(a, b)) < 1e-15);

    std::vector<std::vector<long long>> sites;
    std::vector<Chart> sub =
        build_lattice_charts(delta, P.codomain, rng, keep_per_axis, P.id + "/", sites);
    wire_neighbors_by_site(sub, sites, parent_first[pi]);
    for (std::size_t s = 0; s < sub.size(); ++s) {
      Chart& c = sub[s];
      Box cell = *c.carrier_box;  // sub-cube in parent chart coordinates
      c.fwd = calculus::compose(c.fwd, P.fwd);
      c.inv = calculus::compose(P.inv, c.inv);
      c.kind = (half && sites[s][0] == 0) ? ChartKind::Boundary : ChartKind::Interior;
      c.cofinal_index = P.cofinal_index;
      if (diag && P.carrier_box) {
        VectorXd blo(m), bhi(m);
        for (int a = 0; a < m; ++a) {
          blo[a] = (cell.lo[a] - paff->b()[a]) / paff->A()(a, a);
          bhi[a] = (cell.hi[a] - paff->b()[a]) / paff->A()(a, a);
        }
        c.carrier_box = Box(blo, bhi).intersect(*P.carrier_box);
      } else {
        c.carrier_box.reset();
      }
      M.charts.push_back(std::move(c));
    }
    parent_count[pi] = static_cast<int>(sub.size());
  }

  // cross-parent neighbor candidates: every sub-chart of a neighboring parent
  for (std::size_t pi = 0; pi < K.charts.size(); ++pi) {
    std::vector<int> extra;
    for (int pj : K.neighbor_ids(static_cast<int>(pi)))
      for (int s = 0; s < parent_count[pj]; ++s) extra.push_back(parent_first[pj] + s);
    for (int s = 0; s < parent_count[pi]; ++s) {
      Chart& c = M.charts[parent_first[pi] + s];
      c.neighbors.insert(c.neighbors.end(), extra.begin(), extra.end());
      std::sort(c.neighbors.begin(), c.neighbors.end());
    }
  }

  if (population != static_cast<long long>(M.charts.size())) M.population = population;
  M.cover_hook = [parent_info, parent_charts, delta](const VectorXd& p, double r, int J) {
    for (std::size_t pi = 0; pi < parent_charts->size(); ++pi) {
      const ParentSites& ps = (*parent_info)[pi];
      if (ps.cofinal > J) continue;
      const Chart& P = (*parent_charts)[pi];
      VectorXd x;
      try {
        x = P.fwd->value(p);
      } catch (const SingregError&) {
        continue;
      }
      // interior of the parent codomain, except the closed boundary face
      bool in = true;
      for (int i = 0; i < x.size() && in; ++i) {
        bool closed_lo = ps.range.halfspace && i == 0;
        in = (closed_lo ? x[i] >= P.codomain.lo[i] - 1e-12
                        : x[i] > P.codomain.lo[i] + 1e-12) &&
             x[i] < P.codomain.hi[i] - 1e-12;
      }
      if (!in) continue;
      if (site_covers(ps.range, x / delta, r)) return true;
    }
    return false;
  };
  return M;
}

MultiplicityResult multiplicity(const Atlas& A, const Region& S, int resolution) {
  int res = resolution > 0 ? resolution : auto_resolution(A.m);
  std::vector<int> ids(A.charts.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  return multiplicity_impl(A, ids, S, res, 1e-3);
}

ShrinkResult shrink_check(const Atlas& A, const Region& S, double r, int resolution) {
  if (!(r > 0.0 && r < 1.0)) throw SpecError("shrink_check: radius must lie in (0,1)");
  int res = resolution > 0 ? resolution : auto_resolution(A.m);
  std::vector<int> ids(A.charts.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  auto samples = build_cover_samples(A, ids, S, res, 1e-3);
  return eval_cover(A, samples, r, A.max_cofinal());
}

TransitionTable transition_norms(const Atlas& A, const std::vector<int>& window_ids,
                                 const Region& S, int kmax, int resolution) {
  int res = resolution > 0 ? resolution : auto_resolution(A.m);
  return transition_over_pairs(A, A, window_pairs(A, window_ids), S, kmax, res, 1e-3);
}

CertReport certify_uniformly_regular(const Atlas& A, const Region& S, const CertOptions& opt) {
  CertReport rep;
  rep.subject = "atlas";
  rep.kmax = opt.kmax;
  rep.tol = opt.tol;
  rep.windows = sorted_windows(opt.windows);
  int res = opt.resolution > 0 ? opt.resolution : auto_resolution(A.m);

  std::vector<std::vector<int>> wids;
  for (int w : rep.windows) wids.push_back(A.window(w));

  // chart normalization and round-trip identity
  {
    std::vector<std::vector<double>> rows;
    std::string witness;
    bool ok = true;
    for (const auto& ids : wids) {
      double excess = 0.0, defect = 0.0;
      for (int i : ids) {
        double e = normalization_excess(A.charts[i]);
        double d = roundtrip_defect(A.charts[i]);
        if ((e > 1e-12 || d > 1e-9) && witness.empty())
          witness = "chart " + A.charts[i].id;
        excess = std::max(excess, e);
        defect = std::max(defect, d);
      }
      ok = ok && excess <= 1e-12 && defect <= 1e-9;
      rows.push_back({excess, defect});
    }
    ConditionResult c = make_condition("chart-normalization", rep.windows, rows, opt.tol,
                                       witness, "codomain excess and round-trip defect");
    c.pass = c.pass && ok;
    rep.conditions.push_back(std::move(c));
  }

  // multiplicity, finite and stable across windows
  {
    std::vector<std::vector<double>> rows;
    std::string witness, note;
    for (std::size_t w = 0; w < wids.size(); ++w) {
      MultiplicityResult mr = multiplicity_impl(A, wids[w], S, res, opt.margin);
      rows.push_back({static_cast<double>(mr.value)});
      witness = mr.witness;
      note = mr.exact ? "exact by carrier-box arrangement" : "sampled lower bound";
    }
    rep.conditions.push_back(
        make_condition("finite-multiplicity", rep.windows, rows, opt.tol, witness, note));
  }

  // smallest shrink radius on the search grid that covers every window
  {
    std::vector<std::vector<double>> rows;
    std::vector<std::string> last_witnesses;
    bool all_found = true;
    std::string witness;
    for (std::size_t w = 0; w < wids.size(); ++w) {
      auto samples = build_cover_samples(A, wids[w], S, res, opt.margin);
      double found = 0.0;
      for (int step = 0; step <= 9; ++step) {
        double r = 0.50 + 0.05 * step;
        ShrinkResult sr = eval_cover(A, samples, r, rep.windows[w]);
        if (sr.covered) {
          found = r;
          break;
        }
        last_witnesses = sr.witnesses;
      }
      if (found == 0.0) {
        all_found = false;
        if (!last_witnesses.empty() && witness.empty()) witness = last_witnesses.front();
        rows.push_back({1.0});
      } else {
        rows.push_back({found});
      }
    }
    ConditionResult c = make_condition("shrinkability", rep.windows, rows, opt.tol, witness,
                                       "smallest covering radius in {0.50,...,0.95}");
    c.pass = c.pass && all_found;
    rep.conditions.push_back(std::move(c));
  }

  // transition norms per derivative order
  {
    std::vector<std::vector<double>> rows;
    std::string witness;
    for (std::size_t w = 0; w < wids.size(); ++w) {
      TransitionTable t =
          transition_over_pairs(A, A, window_pairs(A, wids[w]), S, opt.kmax, res, opt.margin);
      rows.push_back(t.c);
      witness = t.witness;
    }
    rep.conditions.push_back(make_condition("transition-bounds", rep.windows, rows, opt.tol,
                                            witness, "orders 0..kmax"));
  }

  rep.pass = true;
  for (const auto& c : rep.conditions) rep.pass = rep.pass && c.pass;
  std::ostringstream tn;
  tn << "constants certified through derivative order " << opt.kmax
     << "; higher orders unchecked";
  rep.truncation_note = tn.str();
  std::ostringstream sn;
  sn << "grid " << res << "^m per chart, margin " << opt.margin
     << "; outermost cofinal layer excluded from coverage samples";
  if (A.population && *A.population > static_cast<long long>(A.charts.size()))
    sn << "; charts sampled " << A.charts.size() << " of " << *A.population;
  rep.sampling_note = sn.str();
  return rep;
}

CertReport atlases_equivalent(const Atlas& K, const Atlas& Kt, const Region& S,
                              const CertOptions& opt) {
  CertReport rep;
  rep.subject = "atlas-equivalence";
  rep.kmax = opt.kmax;
  rep.tol = opt.tol;
  rep.windows = sorted_windows(opt.windows);
  int res = opt.resolution > 0 ? opt.resolution : auto_resolution(K.m);

  std::vector<std::vector<double>> card_rows;
  std::vector<std::vector<double>> norm_rows;
  std::string card_witness, norm_witness;

  for (int w : rep.windows) {
    std::vector<int> idsK = charts_meeting(K, K.window(w), S, res, opt.margin);
    std::vector<int> idsKt = charts_meeting(Kt, Kt.window(w), S, res, opt.margin);

    // overlap detection, carrier boxes first, sampled containment otherwise
    std::vector<std::vector<int>> over(idsK.size());
    parallel_for(static_cast<int>(idsK.size()), [&](int a) {
      const Chart& ci = K.charts[idsK[a]];
      for (int j : idsKt) {
        const Chart& cj = Kt.charts[j];
        if (ci.carrier_box && cj.carrier_box) {
          Box ov = ci.carrier_box->intersect(*cj.carrier_box);
          bool wide = !ov.empty();
          for (int ax = 0; ax < ov.dim() && wide; ++ax)
            wide = ov.hi[ax] - ov.lo[ax] > 1e-12;
          if (wide) over[a].push_back(j);
          continue;
        }
        bool hit = false;
        for (const VectorXd& x : chart_grid(ci, res, opt.margin)) {
          try {
            VectorXd p = ci.inv->value(x);
            if (S.contains(p) && chart_contains(cj, p, -1e-9)) {
              hit = true;
              break;
            }
          } catch (const SingregError&) {
          }
        }
        if (hit) over[a].push_back(j);
      }
    });

    std::map<int, int> reverse_count;
    int card = 0;
    std::string cw;
    for (std::size_t a = 0; a < idsK.size(); ++a) {
      if (static_cast<int>(over[a].size()) > card) {
        card = static_cast<int>(over[a].size());
        cw = "chart " + K.charts[idsK[a]].id;
      }
      for (int j : over[a]) ++reverse_count[j];
    }
    for (const auto& [j, n] : reverse_count)
      if (n > card) {
        card = n;
        cw = "chart " + Kt.charts[j].id;
      }
    card_rows.push_back({static_cast<double>(card)});
    card_witness = cw;

    std::vector<std::pair<int, int>> fwd_pairs;
    for (std::size_t a = 0; a < idsK.size(); ++a)
      for (int j : over[a]) fwd_pairs.emplace_back(idsK[a], j);
    std::vector<std::pair<int, int>> rev_pairs;
    for (const auto& [i, j] : fwd_pairs) rev_pairs.emplace_back(j, i);

    TransitionTable t1 = transition_over_pairs(K, Kt, fwd_pairs, S, opt.kmax, res, opt.margin);
    TransitionTable t2 = transition_over_pairs(Kt, K, rev_pairs, S, opt.kmax, res, opt.margin);
    std::vector<double> row(opt.kmax + 1, 0.0);
    for (int d = 0; d <= opt.kmax; ++d) row[d] = std::max(t1.c[d], t2.c[d]);
    norm_rows.push_back(row);
    norm_witness = t1.witness.empty() ? t2.witness : t1.witness;
  }

  rep.conditions.push_back(make_condition("overlap-cardinality", rep.windows, card_rows,
                                          opt.tol, card_witness,
                                          "max charts of one family meeting one of the other"));
  rep.conditions.push_back(make_condition("cross-transition-bounds", rep.windows, norm_rows,
                                          opt.tol, norm_witness, "both directions, orders 0..kmax"));
  rep.pass = rep.conditions[0].pass && rep.conditions[1].pass;
  std::ostringstream tn;
  tn << "constants certified through derivative order " << opt.kmax
     << "; higher orders unchecked";
  rep.truncation_note = tn.str();
  std::ostringstream sn;
  sn << "grid " << res << "^m per chart, margin " << opt.margin;
  rep.sampling_note = sn.str();
  return rep;
}

}  // namespace singreg::atlas
