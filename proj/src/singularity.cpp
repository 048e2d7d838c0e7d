#include "singreg/singularity.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <utility>

namespace singreg::singularity {

namespace {

using atlas::Atlas;
using atlas::Chart;
using atlas::ChartKind;
using atlas::Region;
using calculus::Jet;
using calculus::MapPtr;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt_point(const VectorXd& x) {
  std::ostringstream os;
  os.precision(10);
  os << "(";
  for (int i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

std::vector<int> sorted_windows(std::vector<int> w) {
  std::sort(w.begin(), w.end());
  w.erase(std::unique(w.begin(), w.end()), w.end());
  if (w.empty()) w.push_back(0);
  return w;
}

// chart-coordinate nodes whose carrier points lie in the region
std::vector<VectorXd> region_samples(const Chart& c, const Region& S, int res, double margin) {
  std::vector<VectorXd> out;
  for (const VectorXd& x : atlas::chart_grid(c, res, margin)) {
    try {
      if (S.contains(c.inv->value(x))) out.push_back(x);
    } catch (const SingregError&) {
    }
  }
  return out;
}

std::vector<int> charts_meeting_region(const Atlas& K, const Region& S, int res) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(K.charts.size()); ++i) {
    const Chart& c = K.charts[i];
    bool hit = false;
    for (const VectorXd& x : atlas::chart_grid(c, res)) {
      try {
        if (S.contains(c.inv->value(x))) {
          hit = true;
          break;
        }
      } catch (const SingregError&) {
      }
    }
    if (hit) out.push_back(i);
  }
  return out;
}

// Everything one chart contributes to the certified constants. Weight stats
// are scaled by the anchor value, metric stats by its square.
struct ChartStats {
  bool meets = false;
  bool weight_ok = true;
  bool metric_ok = true;
  std::string weight_err;
  std::string metric_err;
  double anchor = 0.0;
  double wmin = kInf;
  double ratio = 1.0;
  double eqc = 1.0;
  std::vector<double> wsup;
  std::vector<double> msup;
  std::string ratio_witness;
  std::string wsup_witness;
  std::string eqc_witness;
  std::string msup_witness;
};

ChartStats chart_stats(const SingularityDatum& d, const Chart& c, int res, double margin,
                       int kmax) {
  ChartStats st;
  st.wsup.assign(kmax + 1, 0.0);
  st.msup.assign(kmax + 1, 0.0);
  std::vector<VectorXd> nodes = region_samples(c, d.S, res, margin);
  if (nodes.empty()) return st;
  st.meets = true;

  bool anchor_ok = true;
  std::string anchor_err;
  MapPtr w;
  try {
    w = d.rho.pullback(c);
    st.anchor = w->value(c.anchor)[0];
    if (!(st.anchor > 0.0)) throw DomainError("nonpositive anchor weight");
  } catch (const SingregError& e) {
    anchor_ok = false;
    anchor_err = "chart " + c.id + ": " + e.what();
  }

  if (!anchor_ok) {
    st.weight_ok = false;
    st.weight_err = anchor_err;
  } else {
    try {
      double top = 0.0;
      for (const VectorXd& x : nodes) {
        Jet wj = w->jets(x, kmax)[0];
        double v = wj.value();
        if (!(v > 0.0)) throw DomainError("nonpositive weight at x=" + fmt_point(x));
        st.wmin = std::min(st.wmin, v);
        double rt = std::max(v / st.anchor, st.anchor / v);
        if (rt > st.ratio) {
          st.ratio = rt;
          st.ratio_witness = "chart " + c.id + " x=" + fmt_point(x);
        }
        double node_top = 0.0;
        for (int k = 0; k <= kmax; ++k) {
          double s = wj.max_abs_deriv(k) / st.anchor;
          st.wsup[k] = std::max(st.wsup[k], s);
          node_top = std::max(node_top, s);
        }
        if (node_top > top) {
          top = node_top;
          st.wsup_witness = "chart " + c.id + " x=" + fmt_point(x);
        }
      }
    } catch (const SingregError& e) {
      st.weight_ok = false;
      st.weight_err = "chart " + c.id + ": " + e.what();
    }
  }

  if (!anchor_ok) {
    st.metric_ok = false;
    st.metric_err = anchor_err;
  } else {
    try {
      metric::MetricField H = metric::pushforward_metric(c, d.g);
      const double a2 = st.anchor * st.anchor;
      double top = 0.0;
      for (const VectorXd& x : nodes) {
        std::vector<Jet> hj = H.entries->jets(x, kmax);
        MatrixXd G(c.m, c.m);
        for (int i = 0; i < c.m; ++i)
          for (int j = 0; j < c.m; ++j) G(i, j) = hj[i * c.m + j].value();
        MatrixXd Sy = 0.5 * (G + G.transpose());
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(Sy);
        double lmin = es.eigenvalues().minCoeff();
        double lmax = es.eigenvalues().maxCoeff();
        if (!(lmin > 0.0) || lmin < 1e-12 * Sy.trace())
          throw SingularMetric("chart metric not positive definite at x=" + fmt_point(x));
        double cx = std::max(lmax / a2, a2 / lmin);
        if (cx > st.eqc) {
          st.eqc = cx;
          st.eqc_witness = "chart " + c.id + " x=" + fmt_point(x);
        }
        double node_top = 0.0;
        for (int k = 0; k <= kmax; ++k) {
          double s = 0.0;
          for (const Jet& e : hj) s = std::max(s, e.max_abs_deriv(k));
          s /= a2;
          st.msup[k] = std::max(st.msup[k], s);
          node_top = std::max(node_top, s);
        }
        if (node_top > top) {
          top = node_top;
          st.msup_witness = "chart " + c.id + " x=" + fmt_point(x);
        }
      }
    } catch (const SingregError& e) {
      st.metric_ok = false;
      st.metric_err = "chart " + c.id + ": " + e.what();
    }
  }
  return st;
}

Atlas single_chart_atlas(const Atlas& K, int i) {
  Atlas M;
  M.m = K.m;
  M.carrier_dim = K.carrier_dim;
  M.shrink_radius =
      (K.shrink_radius > 0.0 && K.shrink_radius < 1.0) ? K.shrink_radius : 0.5;
  Chart c = K.charts[i];
  c.neighbors.clear();
  M.charts.push_back(std::move(c));
  return M;
}

long long chart_population(const Atlas& A) {
  return A.population ? *A.population : static_cast<long long>(A.charts.size());
}

// sampled sup of the weight over the region must respect the declared bound
void check_declared_bound(const SingularityDatum& d, const std::vector<int>& ids, int res) {
  double sup = 0.0;
  std::string at;
  for (int i : ids) {
    const Chart& c = d.K.charts[i];
    MapPtr w = d.rho.pullback(c);
    for (const VectorXd& x : atlas::chart_grid(c, res)) {
      try {
        VectorXd p = c.inv->value(x);
        if (!d.S.contains(p)) continue;
        double v = w->value(x)[0];
        if (v > sup) {
          sup = v;
          at = fmt_point(p);
        }
      } catch (const SingregError&) {
      }
    }
  }
  if (sup > *d.rho.bound * (1.0 + 1e-9)) {
    std::ostringstream os;
    os << "sampled weight " << sup << " at p=" << at << " exceeds the declared bound "
       << *d.rho.bound;
    throw UnboundedWeight(os.str());
  }
}

std::vector<VectorXd> box_grid(const Box& B, int res) {
  const int n = B.dim();
  std::vector<std::vector<double>> axes(n);
  for (int i = 0; i < n; ++i) {
    double half = 0.5 * (B.hi[i] - B.lo[i]);
    double lo = B.lo[i] + 1e-3 * half;
    double hi = B.hi[i] - 1e-3 * half;
    if (res <= 1) {
      axes[i] = {0.5 * (lo + hi)};
    } else {
      for (int t = 0; t < res; ++t)
        axes[i].push_back(lo + (hi - lo) * static_cast<double>(t) / (res - 1));
    }
  }
  std::vector<VectorXd> out;
  std::vector<std::size_t> pick(n, 0);
  while (true) {
    VectorXd p(n);
    for (int i = 0; i < n; ++i) p[i] = axes[i][pick[i]];
    out.push_back(std::move(p));
    int ax = 0;
    while (ax < n && ++pick[ax] == axes[ax].size()) pick[ax++] = 0;
    if (ax == n) break;
  }
  return out;
}

}  // namespace

calculus::MapPtr SingularityFunction::pullback(const atlas::Chart& c) const {
  return calculus::compose(carrier, c.inv);
}

double SingularityFunction::anchor_value(const atlas::Chart& c) const {
  return pullback(c)->value(c.anchor)[0];
}

SingularityFunction SingularityFunction::one(int carrier_dim) {
  return from_map(std::make_shared<calculus::ConstMap>(VectorXd::Ones(1), carrier_dim), 1.0,
                  "unit weight");
}

SingularityFunction SingularityFunction::from_map(calculus::MapPtr f, std::optional<double> bound,
                                                  std::string desc) {
  if (!f) throw SpecError("weight needs a carrier map");
  if (f->ran() != 1) throw SpecError("weight must be scalar");
  SingularityFunction s;
  s.carrier = std::move(f);
  s.bound = bound;
  s.desc = std::move(desc);
  return s;
}

SingularityDatum make_datum(atlas::Atlas K, SingularityFunction rho, metric::MetricField g,
                            atlas::Region S, std::string desc) {
  if (!rho.carrier) throw SpecError("datum weight needs a carrier map");
  if (rho.carrier->dom() != K.carrier_dim || rho.carrier->ran() != 1)
    throw SpecError("datum weight must be scalar on the carrier");
  if (g.m != K.carrier_dim) throw SpecError("datum metric must live on the carrier");
  SingularityDatum d;
  d.K = std::move(K);
  d.rho = std::move(rho);
  d.g = std::move(g);
  d.S = std::move(S);
  d.desc = std::move(desc);
  return d;
}

CertReport certify_singularity_datum(const SingularityDatum& d, const atlas::CertOptions& opt) {
  CertReport rep;
  rep.subject = "singularity-datum";
  rep.kmax = opt.kmax;
  rep.tol = opt.tol;
  rep.windows = sorted_windows(opt.windows);
  const int res = opt.resolution > 0 ? opt.resolution : atlas::auto_resolution(d.K.m);

  const int N = static_cast<int>(d.K.charts.size());
  std::vector<ChartStats> stats(N);
  parallel_for(N, [&](int i) {
    stats[i] = chart_stats(d, d.K.charts[i], res, opt.margin, opt.kmax);
  });

  std::vector<std::vector<int>> wcharts;
  for (int J : rep.windows) {
    std::vector<int> ids;
    for (int i = 0; i < N; ++i)
      if (d.K.charts[i].cofinal_index <= J && stats[i].meets) ids.push_back(i);
    wcharts.push_back(std::move(ids));
  }

  std::string weight_defect, metric_defect;
  for (int i : wcharts.back()) {
    if (!stats[i].weight_ok && weight_defect.empty()) weight_defect = stats[i].weight_err;
    if (!stats[i].metric_ok && metric_defect.empty()) metric_defect = stats[i].metric_err;
  }

  // weight positivity and smoothness
  {
    std::vector<std::vector<double>> rows;
    for (const auto& ids : wcharts) {
      double wv = kInf, av = kInf;
      for (int i : ids)
        if (stats[i].weight_ok) {
          wv = std::min(wv, stats[i].wmin);
          av = std::min(av, stats[i].anchor);
        }
      if (!std::isfinite(wv) || !std::isfinite(av)) {
        wv = 0.0;
        av = 0.0;
      }
      rows.push_back({wv, av});
    }
    ConditionResult c;
    c.condition = "weight-positive-smooth";
    c.windows = rep.windows;
    c.constants = rows;
    c.growth_ratio = growth_of(rows);
    c.pass = weight_defect.empty();
    for (const auto& r : rows) c.pass = c.pass && r[0] > 0.0 && r[1] > 0.0;
    c.witness = weight_defect;
    c.note = "rows: smallest sampled weight, smallest anchor";
    rep.conditions.push_back(std::move(c));
  }

  // chart family, delegated
  {
    CertReport sub = atlas::certify_uniformly_regular(d.K, d.S, opt);
    ConditionResult c;
    c.condition = "atlas-uniformly-regular";
    c.windows = rep.windows;
    for (const auto& sc : sub.conditions)
      if (sc.condition == "transition-bounds") {
        c.constants = sc.constants;
        c.growth_ratio = sc.growth_ratio;
      }
    c.pass = sub.pass;
    if (!sub.pass) c.witness = sub.first_failure();
    c.note = "delegates to the chart-family certifier";
    rep.conditions.push_back(std::move(c));
  }

  struct MaxTable {
    std::vector<std::vector<double>> rows;
    std::string witness;
  };
  auto tabulate = [&](const std::function<std::vector<double>(const ChartStats&)>& values,
                      const std::function<std::string(const ChartStats&)>& witness,
                      const std::function<bool(const ChartStats&)>& usable, int width) {
    MaxTable t;
    for (const auto& ids : wcharts) {
      std::vector<double> row(width, 0.0);
      double top = -1.0;
      std::string wit;
      for (int i : ids) {
        if (!usable(stats[i])) continue;
        std::vector<double> v = values(stats[i]);
        double cm = 0.0;
        for (int k = 0; k < width; ++k) {
          row[k] = std::max(row[k], v[k]);
          cm = std::max(cm, v[k]);
        }
        if (cm > top) {
          top = cm;
          wit = witness(stats[i]);
        }
      }
      t.rows.push_back(std::move(row));
      t.witness = wit;
    }
    return t;
  };
  auto weight_usable = [](const ChartStats& s) { return s.weight_ok; };
  auto metric_usable = [](const ChartStats& s) { return s.metric_ok; };

  {
    MaxTable t = tabulate([](const ChartStats& s) { return s.wsup; },
                          [](const ChartStats& s) { return s.wsup_witness; }, weight_usable,
                          opt.kmax + 1);
    ConditionResult c = make_condition("weight-derivative-bounds", rep.windows, t.rows, opt.tol,
                                       t.witness, "max |d^a w| / anchor, orders 0..kmax");
    if (!weight_defect.empty()) {
      c.pass = false;
      c.witness = weight_defect;
    }
    rep.conditions.push_back(std::move(c));
  }
  {
    MaxTable t = tabulate([](const ChartStats& s) { return std::vector<double>{s.ratio}; },
                          [](const ChartStats& s) { return s.ratio_witness; }, weight_usable, 1);
    ConditionResult c =
        make_condition("weight-anchor-comparability", rep.windows, t.rows, opt.tol, t.witness,
                       "two-sided ratio of sampled weight to the anchor");
    if (!weight_defect.empty()) {
      c.pass = false;
      c.witness = weight_defect;
    }
    rep.conditions.push_back(std::move(c));
  }
  {
    MaxTable t = tabulate([](const ChartStats& s) { return std::vector<double>{s.eqc}; },
                          [](const ChartStats& s) { return s.eqc_witness; }, metric_usable, 1);
    ConditionResult c =
        make_condition("metric-anchor-equivalence", rep.windows, t.rows, opt.tol, t.witness,
                       "per-chart equivalence constant against anchor^2 times the flat metric");
    if (!metric_defect.empty()) {
      c.pass = false;
      c.witness = metric_defect;
    }
    rep.conditions.push_back(std::move(c));
  }
  {
    MaxTable t = tabulate([](const ChartStats& s) { return s.msup; },
                          [](const ChartStats& s) { return s.msup_witness; }, metric_usable,
                          opt.kmax + 1);
    ConditionResult c = make_condition("metric-derivative-bounds", rep.windows, t.rows, opt.tol,
                                       t.witness, "max |d^a (chart metric)| / anchor^2, orders 0..kmax");
    if (!metric_defect.empty()) {
      c.pass = false;
      c.witness = metric_defect;
    }
    rep.conditions.push_back(std::move(c));
  }

  rep.pass = true;
  for (const auto& c : rep.conditions) rep.pass = rep.pass && c.pass;
  std::ostringstream tn;
  tn << "constants certified through derivative order " << opt.kmax
     << "; higher orders unchecked";
  rep.truncation_note = tn.str();
  std::ostringstream sn;
  sn << "grid " << res << "^m per chart, margin " << opt.margin << "; region-filtered nodes";
  if (d.K.population && *d.K.population > static_cast<long long>(d.K.charts.size()))
    sn << "; charts sampled " << d.K.charts.size() << " of " << *d.K.population;
  rep.sampling_note = sn.str();
  return rep;
}

SingularityDatum product_datum(const SingularityDatum& a, const SingularityDatum& b,
                               int keep_per_axis) {
  if (!a.rho.bound || !b.rho.bound)
    throw UnboundedWeight("product needs declared finite weight bounds on both factors");
  if (!(*a.rho.bound > 0.0) || !(*b.rho.bound > 0.0))
    throw UnboundedWeight("product weight bounds must be positive");
  for (const Chart& c : b.K.charts)
    if (c.kind == ChartKind::Boundary)
      throw SpecError("product factors must be ordered so the second has no boundary charts");

  const int ma = a.K.m, mb = b.K.m;
  const int m = ma + mb;
  const double r = 0.5;
  const double delta = (1.0 - r) / std::sqrt(static_cast<double>(m));

  const int res_a = atlas::auto_resolution(ma);
  const int res_b = atlas::auto_resolution(mb);
  std::vector<int> ia = charts_meeting_region(a.K, a.S, res_a);
  std::vector<int> ib = charts_meeting_region(b.K, b.S, res_b);
  if (ia.empty() || ib.empty()) throw SpecError("product factors must meet their regions");
  check_declared_bound(a, ia, res_a);
  check_declared_bound(b, ib, res_b);

  Atlas P;
  P.m = m;
  P.carrier_dim = a.K.carrier_dim + b.K.carrier_dim;
  P.shrink_radius = r;

  struct PairInfo {
    int cofinal = 0;
    std::function<bool(const VectorXd&, double, int)> hook_a, hook_b;
  };
  auto pinfo = std::make_shared<std::vector<PairInfo>>();
  const int na = static_cast<int>(ia.size());
  const int nb = static_cast<int>(ib.size());
  std::vector<std::vector<int>> pair_charts(static_cast<std::size_t>(na) * nb);
  long long total_population = 0;

  for (int u = 0; u < na; ++u) {
    const Chart& ka = a.K.charts[ia[u]];
    const double ra_anchor = a.rho.anchor_value(ka);
    for (int v = 0; v < nb; ++v) {
      const Chart& kb = b.K.charts[ib[v]];
      const double rb_anchor = b.rho.anchor_value(kb);
      if (!(ra_anchor > 0.0) || !(rb_anchor > 0.0))
        throw SpecError("product factor anchor weights must be positive");
      const double d1 = std::min(rb_anchor, delta);
      const double d2 = std::min(ra_anchor, delta);
      Atlas ra = atlas::refine_atlas(d1, single_chart_atlas(a.K, ia[u]), Region::all(),
                                     keep_per_axis);
      Atlas rb = atlas::refine_atlas(d2, single_chart_atlas(b.K, ib[v]), Region::all(),
                                     keep_per_axis);
      PairInfo pi;
      pi.cofinal = std::max(ka.cofinal_index, kb.cofinal_index);
      pi.hook_a = ra.cover_hook;
      pi.hook_b = rb.cover_hook;
      total_population += chart_population(ra) * chart_population(rb);
      const int pidx = u * nb + v;
      for (const Chart& c1 : ra.charts) {
        for (const Chart& c2 : rb.charts) {
          Chart pc;
          pc.id = c1.id + " x " + c2.id;
          pc.m = m;
          pc.kind = c1.kind;
          pc.fwd = calculus::product({c1.fwd, c2.fwd});
          pc.inv = calculus::product({c1.inv, c2.inv});
          pc.codomain = Box::product(c1.codomain, c2.codomain);
          if (c1.carrier_box && c2.carrier_box)
            pc.carrier_box = Box::product(*c1.carrier_box, *c2.carrier_box);
          pc.cofinal_index = pi.cofinal;
          pc.anchor = VectorXd(m);
          pc.anchor << c1.anchor, c2.anchor;
          pair_charts[pidx].push_back(static_cast<int>(P.charts.size()));
          P.charts.push_back(std::move(pc));
        }
      }
      pinfo->push_back(std::move(pi));
    }
  }

  // a product chart may overlap exactly the crossings of its factors'
  // neighbor pairs
  auto retained_neighbors = [](const Atlas& K, const std::vector<int>& kept) {
    std::map<int, int> pos;
    for (std::size_t t = 0; t < kept.size(); ++t) pos[kept[t]] = static_cast<int>(t);
    std::vector<std::vector<int>> out(kept.size());
    for (std::size_t t = 0; t < kept.size(); ++t) {
      out[t].push_back(static_cast<int>(t));
      for (int q : K.neighbor_ids(kept[t])) {
        auto it = pos.find(q);
        if (it != pos.end()) out[t].push_back(it->second);
      }
      std::sort(out[t].begin(), out[t].end());
      out[t].erase(std::unique(out[t].begin(), out[t].end()), out[t].end());
    }
    return out;
  };
  std::vector<std::vector<int>> nbrA = retained_neighbors(a.K, ia);
  std::vector<std::vector<int>> nbrB = retained_neighbors(b.K, ib);
  for (int u = 0; u < na; ++u)
    for (int v = 0; v < nb; ++v) {
      std::vector<int> nlist;
      for (int uu : nbrA[u])
        for (int vv : nbrB[v])
          for (int id : pair_charts[uu * nb + vv]) nlist.push_back(id);
      std::sort(nlist.begin(), nlist.end());
      for (int id : pair_charts[u * nb + v]) {
        P.charts[id].neighbors.clear();
        for (int q : nlist)
          if (q != id) P.charts[id].neighbors.push_back(q);
      }
    }

  const int adim = a.K.carrier_dim;
  const int bdim = b.K.carrier_dim;
  P.cover_hook = [pinfo, adim, bdim](const VectorXd& p, double rr, int J) {
    VectorXd pa = p.head(adim);
    VectorXd pb = p.tail(bdim);
    for (const PairInfo& q : *pinfo) {
      if (q.cofinal > J) continue;
      if (q.hook_a && q.hook_b && q.hook_a(pa, rr, J) && q.hook_b(pb, rr, J)) return true;
    }
    return false;
  };
  if (total_population != static_cast<long long>(P.charts.size()))
    P.population = total_population;

  SingularityFunction rho;
  {
    std::vector<calculus::ExprPtr> mulc{calculus::emul(calculus::evar(0), calculus::evar(1))};
    MapPtr joint = calculus::product({a.rho.carrier, b.rho.carrier});
    rho.carrier =
        calculus::compose(std::make_shared<calculus::ExprMap>(std::move(mulc), 2), joint);
    rho.bound = *a.rho.bound * *b.rho.bound;
    rho.desc = "(" + (a.rho.desc.empty() ? "w1" : a.rho.desc) + ")*(" +
               (b.rho.desc.empty() ? "w2" : b.rho.desc) + ")";
  }
  Region S{[Sa = a.S, Sb = b.S, adim](const VectorXd& p) {
             VectorXd pa = p.head(adim);
             VectorXd pb = p.tail(p.size() - adim);
             return Sa.contains(pa) && Sb.contains(pb);
           },
           "product region"};
  return make_datum(std::move(P), std::move(rho), metric::product_metric(a.g, b.g), std::move(S),
                    "product of (" + a.desc + ") and (" + b.desc + ")");
}

PatchResult patch_data(const std::vector<PatchPiece>& pieces, const metric::MetricField& g,
                       const PatchBounds& bounds) {
  if (pieces.empty()) throw SpecError("patch_data needs at least one piece");
  const int n = pieces[0].K.carrier_dim;
  const int m = pieces[0].K.m;
  for (const PatchPiece& p : pieces) {
    if (p.K.carrier_dim != n || p.K.m != m)
      throw SpecError("patch pieces must share chart and carrier dimensions");
    if (p.cover_box.dim() != n || p.region_box.dim() != n)
      throw SpecError("patch boxes must live on the carrier");
    if (!p.rho.carrier || p.rho.carrier->dom() != n || p.rho.carrier->ran() != 1)
      throw SpecError("patch weights must be scalar on the carrier");
  }
  if (g.m != n) throw SpecError("patch metric must live on the carrier");
  const int res = bounds.resolution > 0 ? bounds.resolution : atlas::auto_resolution(n);
  const int P = static_cast<int>(pieces.size());

  Box hull = pieces[0].region_box;
  for (const PatchPiece& p : pieces)
    for (int i = 0; i < n; ++i) {
      hull.lo[i] = std::min(hull.lo[i], p.region_box.lo[i]);
      hull.hi[i] = std::max(hull.hi[i], p.region_box.hi[i]);
    }
  for (int i = 0; i < n; ++i) {
    hull.lo[i] -= 1.0;
    hull.hi[i] += 1.0;
  }

  // bump supports: cover boxes pulled into the padded hull
  std::vector<Box> supp;
  for (const PatchPiece& p : pieces) {
    Box V = p.cover_box.intersect(hull);
    bool ok = !V.empty();
    for (int i = 0; i < n && ok; ++i) ok = V.hi[i] - V.lo[i] > 1e-12;
    if (!ok) throw HypothesisViolated("cover: piece support vanishes near its region slice");
    supp.push_back(V);
  }

  // every region sample must lie in some piece's cover set
  for (int al = 0; al < P; ++al)
    for (const VectorXd& p : box_grid(pieces[al].region_box, res)) {
      bool in = false;
      for (int be = 0; be < P && !in; ++be) in = pieces[be].cover_box.contains(p, 1e-12);
      if (!in)
        throw HypothesisViolated("cover: region sample outside every cover set at p=" +
                                 fmt_point(p));
    }

  // two-sided weight comparability on support overlaps
  for (int al = 0; al < P; ++al)
    for (int be = al + 1; be < P; ++be) {
      Box O = supp[al].intersect(supp[be]);
      if (O.empty()) continue;
      bool wide = true;
      for (int i = 0; i < n && wide; ++i) wide = O.hi[i] - O.lo[i] > 1e-12;
      if (!wide) continue;
      for (const VectorXd& p : box_grid(O, res)) {
        double va = 0.0, vb = 0.0;
        try {
          va = pieces[al].rho.carrier->value(p)[0];
          vb = pieces[be].rho.carrier->value(p)[0];
        } catch (const SingregError& e) {
          throw HypothesisViolated(
              std::string("weight comparability: evaluation failed on the overlap: ") + e.what());
        }
        if (!(va > 0.0) || !(vb > 0.0))
          throw HypothesisViolated("weight comparability: nonpositive weight on the overlap at p=" +
                                   fmt_point(p));
        double ratio = std::max(va / vb, vb / va);
        if (ratio > bounds.comparability * (1.0 + 1e-12)) {
          std::ostringstream os;
          os << "weight comparability bound exceeded between piece " << al + 1 << " and piece "
             << be + 1 << " at p=" << fmt_point(p) << ": ratio " << ratio << " > "
             << bounds.comparability;
          throw HypothesisViolated(os.str());
        }
      }
    }

  // charts each piece contributes: those meeting its region slice
  const int chart_res = atlas::auto_resolution(m);
  std::vector<std::vector<int>> kept(P);
  for (int al = 0; al < P; ++al) {
    Region slice{[B = pieces[al].region_box](const VectorXd& p) { return B.contains(p); },
                 "slice"};
    kept[al] = charts_meeting_region(pieces[al].K, slice, chart_res);
    if (kept[al].empty())
      throw HypothesisViolated("cover: piece " + std::to_string(al + 1) +
                               " has no chart meeting its region slice");
  }

  // cross-piece transitions stay within the declared bound where supports meet
  for (int al = 0; al < P; ++al)
    for (int be = 0; be < P; ++be) {
      if (al == be) continue;
      for (int i : kept[al])
        for (int j : kept[be]) {
          const Chart& ci = pieces[al].K.charts[i];
          const Chart& cj = pieces[be].K.charts[j];
          MapPtr trans;
          for (const VectorXd& x : atlas::chart_grid(ci, chart_res)) {
            VectorXd p;
            try {
              p = ci.inv->value(x);
            } catch (const SingregError&) {
              continue;
            }
            if (!supp[al].contains(p) || !supp[be].contains(p)) continue;
            if (!atlas::chart_contains(cj, p)) continue;
            if (!trans) trans = calculus::compose(cj.fwd, ci.inv);
            std::vector<Jet> tj = trans->jets(x, bounds.kmax);
            for (int k = 1; k <= bounds.kmax; ++k) {
              double s = 0.0;
              for (const Jet& e : tj) s = std::max(s, e.max_abs_deriv(k));
              if (s > bounds.transition * (1.0 + 1e-12)) {
                std::ostringstream os;
                os << "transition bound exceeded between piece " << al + 1 << " chart " << ci.id
                   << " and piece " << be + 1 << " chart " << cj.id << " at x=" << fmt_point(x)
                   << ": order " << k << " sup " << s << " > " << bounds.transition;
                throw HypothesisViolated(os.str());
              }
            }
          }
        }
    }

  // bump per piece, exactly zero outside its support
  auto psis = std::make_shared<std::vector<MapPtr>>();
  for (int al = 0; al < P; ++al) {
    calculus::ExprPtr e = calculus::econst(1.0);
    for (int i = 0; i < n; ++i) {
      double c0 = 0.5 * (supp[al].lo[i] + supp[al].hi[i]);
      double h0 = 0.5 * (supp[al].hi[i] - supp[al].lo[i]);
      e = calculus::emul(
          e, calculus::ebump(calculus::ediv(
                 calculus::esub(calculus::evar(i), calculus::econst(c0)), calculus::econst(h0))));
    }
    psis->push_back(
        std::make_shared<calculus::ExprMap>(std::vector<calculus::ExprPtr>{std::move(e)}, n));
  }

  PartitionOfUnity part;
  part.supports = supp;
  for (int al = 0; al < P; ++al) {
    part.phi.push_back(std::make_shared<calculus::JetFunctionMap>(
        n, 1, [psis, al](const VectorXd& x, int k) -> std::vector<Jet> {
          std::vector<Jet> pj;
          double den = 0.0;
          for (const MapPtr& f : *psis) {
            pj.push_back(f->jets(x, k)[0]);
            den += pj.back().value();
          }
          if (!(den > 0.0)) throw DomainError("outside the patch cover at p=" + fmt_point(x));
          Jet s = pj[0];
          for (std::size_t t = 1; t < pj.size(); ++t) s = s + pj[t];
          return {pj[static_cast<std::size_t>(al)] / s};
        }));
  }

  // blended weight; pieces with vanishing bump are skipped so their weights
  // are never evaluated off their own cover sets
  auto rhos = std::make_shared<std::vector<MapPtr>>();
  for (const PatchPiece& p : pieces) rhos->push_back(p.rho.carrier);
  MapPtr blend = std::make_shared<calculus::JetFunctionMap>(
      n, 1, [psis, rhos, n](const VectorXd& x, int k) -> std::vector<Jet> {
        std::vector<Jet> pj;
        double den = 0.0;
        for (const MapPtr& f : *psis) {
          pj.push_back(f->jets(x, k)[0]);
          den += pj.back().value();
        }
        if (!(den > 0.0)) throw DomainError("outside the patch cover at p=" + fmt_point(x));
        Jet s = pj[0];
        for (std::size_t t = 1; t < pj.size(); ++t) s = s + pj[t];
        Jet num = Jet::constant(0.0, n, k);
        for (std::size_t t = 0; t < pj.size(); ++t)
          if (pj[t].value() > 0.0) num = num + pj[t] * (*rhos)[t]->jets(x, k)[0];
        return {num / s};
      });

  Atlas U;
  U.m = m;
  U.carrier_dim = n;
  {
    double shr = 0.0;
    bool same = true;
    for (const PatchPiece& p : pieces) {
      double v = p.K.shrink_radius;
      if (!(v > 0.0 && v < 1.0)) same = false;
      else if (shr == 0.0) shr = v;
      else if (v != shr) same = false;
    }
    U.shrink_radius = same ? shr : 0.0;
  }
  for (int al = 0; al < P; ++al)
    for (int i : kept[al]) {
      Chart c = pieces[al].K.charts[i];
      c.id = "piece" + std::to_string(al + 1) + ":" + c.id;
      c.neighbors.clear();
      U.charts.push_back(std::move(c));
    }

  SingularityFunction rho;
  rho.carrier = blend;
  rho.desc = "partition-blended weight";
  {
    bool all_bounded = true;
    double bmax = 0.0;
    for (const PatchPiece& p : pieces) {
      if (!p.rho.bound) all_bounded = false;
      else bmax = std::max(bmax, *p.rho.bound);
    }
    if (all_bounded) rho.bound = bmax;
  }

  std::vector<Box> slices;
  for (const PatchPiece& p : pieces) slices.push_back(p.region_box);
  Region S{[slices](const VectorXd& p) {
             for (const Box& B : slices)
               if (B.contains(p)) return true;
             return false;
           },
           "union of region slices"};

  PatchResult out;
  out.datum = make_datum(std::move(U), std::move(rho), g, std::move(S), "patched datum");
  out.partition = std::move(part);
  return out;
}

SingularityDatum pullback_datum(const Diffeo& f, const SingularityDatum& d) {
  if (!f.fwd || !f.inv) throw SpecError("pullback needs both directions of the diffeomorphism");
  const int n_old = d.K.carrier_dim;
  if (f.fwd->ran() != n_old || f.inv->dom() != n_old || f.fwd->dom() != f.inv->ran())
    throw SpecError("pullback dimensions do not match the datum carrier");
  const int n_new = f.fwd->dom();

  // carrier boxes survive only a positive diagonal affine transport
  auto aff = std::dynamic_pointer_cast<const calculus::AffineMap>(f.inv);
  bool diag_ok = static_cast<bool>(aff) && n_new == n_old;
  if (diag_ok)
    for (int i = 0; i < n_old && diag_ok; ++i)
      for (int j = 0; j < n_old && diag_ok; ++j)
        diag_ok = (i == j) ? (aff->A()(i, j) > 0.0) : (aff->A()(i, j) == 0.0);

  Atlas K;
  K.m = d.K.m;
  K.carrier_dim = n_new;
  K.shrink_radius = d.K.shrink_radius;
  K.population = d.K.population;
  K.exact_multiplicity = diag_ok ? d.K.exact_multiplicity : std::nullopt;
  for (const Chart& c : d.K.charts) {
    Chart c2 = c;
    c2.fwd = calculus::compose(c.fwd, f.fwd);
    c2.inv = calculus::compose(f.inv, c.inv);
    if (c.carrier_box && diag_ok) {
      VectorXd lo(n_new), hi(n_new);
      for (int i = 0; i < n_new; ++i) {
        lo[i] = aff->A()(i, i) * c.carrier_box->lo[i] + aff->b()[i];
        hi[i] = aff->A()(i, i) * c.carrier_box->hi[i] + aff->b()[i];
      }
      c2.carrier_box = Box(std::move(lo), std::move(hi));
    } else {
      c2.carrier_box.reset();
    }
    K.charts.push_back(std::move(c2));
  }
  if (d.K.cover_hook)
    K.cover_hook = [h = d.K.cover_hook, ff = f.fwd](const VectorXd& p, double rr, int J) {
      return h(ff->value(p), rr, J);
    };

  SingularityFunction rho;
  rho.carrier = calculus::compose(d.rho.carrier, f.fwd);
  rho.bound = d.rho.bound;
  rho.desc = d.rho.desc;

  Chart t;
  t.id = "pullback";
  t.m = n_new;
  t.fwd = f.inv;
  t.inv = f.fwd;
  t.codomain = Box::cube(n_new, -1.0, 1.0);
  t.anchor = VectorXd::Zero(n_new);
  metric::MetricField g2 = metric::pushforward_metric(t, d.g);

  Region S{[So = d.S, ff = f.fwd](const VectorXd& p) { return So.contains(ff->value(p)); },
           d.S.desc + " (transported)"};

  return make_datum(std::move(K), std::move(rho), std::move(g2), std::move(S),
                    d.desc.empty() ? "pulled back" : d.desc + " (pulled back)");
}

SingularityDatum boundary_datum(const SingularityDatum& d) {
  std::vector<int> bidx;
  for (int i = 0; i < static_cast<int>(d.K.charts.size()); ++i) {
    const Chart& c = d.K.charts[i];
    if (c.kind == ChartKind::Boundary && c.codomain.lo[0] == 0.0) bidx.push_back(i);
  }
  if (bidx.empty()) throw NoBoundary("no chart carries a boundary face");

  const int m = d.K.m;
  SingularityDatum out;
  out.rho = d.rho;
  out.g = d.g;
  out.S = d.S;
  if (m == 1) {
    out.K.m = 0;
    out.K.carrier_dim = d.K.carrier_dim;
    out.desc = "zero-dimensional boundary marker";
    return out;
  }

  const int mb = m - 1;
  MatrixXd Ai = MatrixXd::Zero(m, mb);
  Ai.block(1, 0, mb, mb).setIdentity();
  auto ins0 = std::make_shared<calculus::AffineMap>(Ai, VectorXd::Zero(m));
  MatrixXd Ad = MatrixXd::Zero(mb, m);
  Ad.block(0, 1, mb, mb).setIdentity();
  auto drop0 = std::make_shared<calculus::AffineMap>(Ad, VectorXd::Zero(mb));

  std::map<int, int> newpos;
  for (std::size_t k = 0; k < bidx.size(); ++k) newpos[bidx[k]] = static_cast<int>(k);

  out.K.m = mb;
  out.K.carrier_dim = d.K.carrier_dim;
  out.K.shrink_radius = d.K.shrink_radius;
  for (int i : bidx) {
    const Chart& c = d.K.charts[i];
    Chart b;
    b.id = c.id + "|face";
    b.m = mb;
    b.kind = ChartKind::Interior;
    b.fwd = calculus::compose(drop0, c.fwd);
    b.inv = calculus::compose(c.inv, ins0);
    b.codomain = Box(c.codomain.lo.tail(mb).eval(), c.codomain.hi.tail(mb).eval());
    b.cofinal_index = c.cofinal_index;
    b.anchor = (c.anchor.size() == m) ? VectorXd(c.anchor.tail(mb)) : VectorXd::Zero(mb);
    for (int q : c.neighbors) {
      auto it = newpos.find(q);
      if (it != newpos.end()) b.neighbors.push_back(it->second);
    }
    out.K.charts.push_back(std::move(b));
  }
  if (d.K.cover_hook) out.K.cover_hook = d.K.cover_hook;
  out.desc = d.desc.empty() ? "boundary restriction" : d.desc + " boundary";
  return out;
}

}  // namespace singreg::singularity
