#include "entrolab/ot_reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <utility>

namespace entrolab {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

/// One linear piece of an inverse CDF: X(q) maps [qa,qb] onto [xa,xb].
struct QSeg {
  double qa, qb, xa, xb;
};

void require_neumann_1d(const MeasureSpace& space, const char* what) {
  if (space.kind() != MeasureSpace::Kind::grid1d) {
    throw UnsupportedSpace(std::string(what) + ": needs a 1d grid");
  }
  if (space.axes()[0].boundary != Boundary::neumann) {
    throw UnsupportedSpace(std::string(what) +
                           ": periodic grids have no ordered quantile line");
  }
}

/// Node cell edges: midpoints between nodes, domain ends at the end nodes.
/// Cell widths equal the node measures of the Neumann grid.
Vector cell_edges(const MeasureSpace& space) {
  const Vector& x = space.coordinate(0);
  const Index n = x.size();
  Vector c(n + 1);
  c[0] = x[0];
  for (Index i = 1; i < n; ++i) c[i] = 0.5 * (x[i - 1] + x[i]);
  c[n] = x[n - 1];
  return c;
}

/// Piecewise-linear inverse CDF of a cell-constant density, one segment per
/// positive-mass cell. Zero-mass cells become jumps between segments.
std::vector<QSeg> quantile_segments(const MeasureSpace& space, const Field& rho,
                                    const char* what) {
  space.check(rho);
  const Index n = space.size();
  const Vector& m = space.measure();
  Vector cum(n + 1);
  cum[0] = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (rho[i] < 0.0) {
      throw InvalidArgument(std::string(what) + ": density has a negative entry");
    }
    cum[i + 1] = cum[i] + rho[i] * m[i];
  }
  // loose gate: catches wrong inputs while admitting solver-accurate
  // densities whose mass is off by O(n * tolerance); the CDF arithmetic
  // below renormalizes exactly either way
  if (std::abs(cum[n] - 1.0) > 1e-4) {
    throw InvalidArgument(std::string(what) + ": density mass is not 1");
  }
  const Vector c = cell_edges(space);
  // dividing the running sums by the final one lands the top of the CDF on
  // exactly 1.0 and keeps zero-mass cells zero-width; forcing cum[n] = 1.0
  // after a rounded accumulation instead would open an epsilon-mass segment
  // over trailing vacuum cells, and such a phantom segment hijacks the
  // vacuum velocity extension in potential_at
  const double top = cum[n];
  for (Index i = 0; i <= n; ++i) cum[i] /= top;
  std::vector<QSeg> segs;
  segs.reserve(std::size_t(n));
  for (Index i = 0; i < n; ++i) {
    if (cum[i + 1] > cum[i]) segs.push_back({cum[i], cum[i + 1], c[i], c[i + 1]});
  }
  return segs;
}

double qseg_pos(const QSeg& s, double q) {
  return s.xa + (q - s.qa) / (s.qb - s.qa) * (s.xb - s.xa);
}

struct MergedQuantiles {
  std::vector<ReferenceGeodesic::Segment> segments;
  double w2sq = 0.0;
};

/// Splits mass space at every breakpoint of either inverse CDF plus a uniform
/// grid of extra_cells cells. Both inverse CDFs are linear on each resulting
/// piece, so the accumulated W2 integral is exact.
MergedQuantiles merge_quantiles(const std::vector<QSeg>& a, const std::vector<QSeg>& b,
                                Index extra_cells) {
  std::vector<double> cuts;
  cuts.reserve(2 * (a.size() + b.size()) + std::size_t(extra_cells) + 1);
  for (const auto& s : a) {
    cuts.push_back(s.qa);
    cuts.push_back(s.qb);
  }
  for (const auto& s : b) {
    cuts.push_back(s.qa);
    cuts.push_back(s.qb);
  }
  for (Index e = 0; e <= extra_cells; ++e) {
    cuts.push_back(double(e) / double(extra_cells));
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  MergedQuantiles out;
  out.segments.reserve(cuts.size());
  std::size_t ia = 0, ib = 0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double lo = cuts[k];
    const double hi = cuts[k + 1];
    if (!(hi > lo)) continue;
    while (ia < a.size() && a[ia].qb <= lo) ++ia;
    while (ib < b.size() && b[ib].qb <= lo) ++ib;
    if (ia >= a.size() || ib >= b.size()) break;
    ReferenceGeodesic::Segment seg;
    seg.qa = lo;
    seg.qb = hi;
    seg.a0 = qseg_pos(a[ia], lo);
    seg.b0 = qseg_pos(a[ia], hi);
    seg.a1 = qseg_pos(b[ib], lo);
    seg.b1 = qseg_pos(b[ib], hi);
    const double da = seg.a1 - seg.a0;
    const double db = seg.b1 - seg.b0;
    out.w2sq += (da * da + da * db + db * db) / 3.0 * (hi - lo);
    out.segments.push_back(seg);
  }
  return out;
}

std::vector<QSeg> segments_at_time(const std::vector<ReferenceGeodesic::Segment>& segs,
                                   double t) {
  std::vector<QSeg> out;
  out.reserve(segs.size());
  const double s = 1.0 - t;
  for (const auto& g : segs) {
    out.push_back({g.qa, g.qb, s * g.a0 + t * g.a1, s * g.b0 + t * g.b1});
  }
  return out;
}

void check_geodesic(const MeasureSpace& space, const ReferenceGeodesic& ref) {
  if (ref.space_id != space.id()) {
    throw SpaceMismatch("reference geodesic belongs to a different space");
  }
  if (ref.segments.empty()) throw InvalidArgument("reference geodesic is empty");
}

} // namespace

Vector ReferenceGeodesic::density_at(const MeasureSpace& space, double t) const {
  check_geodesic(space, *this);
  const Index n = space.size();
  const Vector c = cell_edges(space);
  Vector mass = Vector::Zero(n);
  Index j = 0;
  for (const auto& g : segments) {
    const double s = 1.0 - t;
    const double lo_x = s * g.a0 + t * g.a1;
    const double hi_x = s * g.b0 + t * g.b1;
    const double dq = g.qb - g.qa;
    while (j + 1 < n && c[j + 1] <= lo_x) ++j;
    if (!(hi_x > lo_x)) {
      mass[j] += dq;
      continue;
    }
    const double lambda = dq / (hi_x - lo_x);
    for (Index jj = j; jj < n; ++jj) {
      const double lo = std::max(lo_x, c[jj]);
      const double hi = std::min(hi_x, c[jj + 1]);
      if (hi > lo) mass[jj] += lambda * (hi - lo);
      if (c[jj + 1] >= hi_x) break;
    }
  }
  return (mass.array() / space.measure().array()).matrix();
}

Vector ReferenceGeodesic::potential_at(const MeasureSpace& space, double t) const {
  check_geodesic(space, *this);
  const Vector& x = space.coordinate(0);
  const Index n = x.size();
  const double s = 1.0 - t;
  Vector v(n);
  std::size_t j = 0;
  for (Index i = 0; i < n; ++i) {
    const double xi = x[i];
    while (j + 1 < segments.size() &&
           s * segments[j].b0 + t * segments[j].b1 < xi) {
      ++j;
    }
    const auto& g = segments[j];
    const double lo_x = s * g.a0 + t * g.a1;
    const double hi_x = s * g.b0 + t * g.b1;
    const double da = g.a1 - g.a0;
    const double db = g.b1 - g.b0;
    if (xi <= lo_x || !(hi_x > lo_x)) {
      v[i] = da;
    } else if (xi >= hi_x) {
      v[i] = db;
    } else {
      const double w = (xi - lo_x) / (hi_x - lo_x);
      v[i] = (1.0 - w) * da + w * db;
    }
  }
  Vector p(n);
  p[0] = 0.0;
  for (Index i = 1; i < n; ++i) {
    p[i] = p[i - 1] + 0.5 * (v[i - 1] + v[i]) * (x[i] - x[i - 1]);
  }
  const double mean = space.measure().dot(p) / space.total_mass();
  p.array() -= mean;
  return p;
}

double ReferenceGeodesic::integrate(const MeasureSpace& space, const Field& h,
                                    double t) const {
  check_geodesic(space, *this);
  space.check(h);
  const Vector& x = space.coordinate(0);
  const Index n = x.size();
  Vector anti(n);
  anti[0] = 0.0;
  for (Index i = 1; i < n; ++i) {
    anti[i] = anti[i - 1] + 0.5 * (h[i - 1] + h[i]) * (x[i] - x[i - 1]);
  }
  const double hx = space.axes()[0].spacing();
  auto locate = [&](double xx) {
    Index j = Index((xx - x[0]) / hx);
    j = std::max(Index(0), std::min(j, n - 2));
    if (xx < x[j] && j > 0) --j;
    if (xx > x[j + 1] && j < n - 2) ++j;
    return j;
  };
  auto anti_at = [&](double xx) {
    const Index j = locate(xx);
    const double dx = xx - x[j];
    const double slope = (h[j + 1] - h[j]) / (x[j + 1] - x[j]);
    return anti[j] + h[j] * dx + 0.5 * slope * dx * dx;
  };
  auto value_at = [&](double xx) {
    const Index j = locate(xx);
    const double w = (xx - x[j]) / (x[j + 1] - x[j]);
    return (1.0 - w) * h[j] + w * h[j + 1];
  };
  const double s = 1.0 - t;
  double total = 0.0;
  for (const auto& g : segments) {
    const double lo_x = s * g.a0 + t * g.a1;
    const double hi_x = s * g.b0 + t * g.b1;
    const double dq = g.qb - g.qa;
    if (hi_x - lo_x > 1e-9) {
      total += dq * (anti_at(hi_x) - anti_at(lo_x)) / (hi_x - lo_x);
    } else {
      total += dq * value_at(0.5 * (lo_x + hi_x));
    }
  }
  return total;
}

double ReferenceGeodesic::w2_to(const MeasureSpace& space, const Field& rho,
                                double t) const {
  check_geodesic(space, *this);
  const std::vector<QSeg> a = segments_at_time(segments, t);
  const std::vector<QSeg> b = quantile_segments(space, rho, "w2_to");
  const MergedQuantiles merged = merge_quantiles(a, b, 16 * space.size());
  return std::sqrt(std::max(merged.w2sq, 0.0));
}

ReferenceGeodesic quantile_geodesic_1d(const MeasureSpace& space, const Field& rho0,
                                       const Field& rho1, const Vector& tgrid,
                                       Index quantile_cells) {
  require_neumann_1d(space, "quantile_geodesic_1d");
  for (Index k = 0; k < tgrid.size(); ++k) {
    if (!(tgrid[k] >= 0.0 && tgrid[k] <= 1.0)) {
      throw InvalidArgument("quantile_geodesic_1d: tgrid entries must lie in [0,1]");
    }
  }
  const std::vector<QSeg> a = quantile_segments(space, rho0, "quantile_geodesic_1d");
  const std::vector<QSeg> b = quantile_segments(space, rho1, "quantile_geodesic_1d");
  if (quantile_cells <= 0) quantile_cells = 16 * space.size();
  MergedQuantiles merged = merge_quantiles(a, b, quantile_cells);

  ReferenceGeodesic ref;
  ref.space_id = space.id();
  ref.tgrid = tgrid;
  ref.segments = std::move(merged.segments);
  ref.w2 = std::sqrt(std::max(merged.w2sq, 0.0));

  ref.mu.reserve(std::size_t(tgrid.size()));
  ref.phi.reserve(std::size_t(tgrid.size()));
  for (Index k = 0; k < tgrid.size(); ++k) {
    ref.mu.push_back(ref.density_at(space, tgrid[k]));
    ref.phi.push_back(ref.potential_at(space, tgrid[k]));
  }

  // monotone map: push each node coordinate through F0 then through the
  // right marginal's inverse CDF
  const Vector& x = space.coordinate(0);
  const Index n = x.size();
  ref.monotone_map.resize(n);
  {
    std::size_t ja = 0, jb = 0;
    for (Index i = 0; i < n; ++i) {
      while (ja + 1 < a.size() && a[ja].xb < x[i]) ++ja;
      const QSeg& sa = a[ja];
      double q;
      if (x[i] <= sa.xa) {
        q = sa.qa;
      } else if (x[i] >= sa.xb) {
        q = sa.qb;
      } else {
        q = sa.qa + (x[i] - sa.xa) / (sa.xb - sa.xa) * (sa.qb - sa.qa);
      }
      while (jb + 1 < b.size() && b[jb].qb < q) ++jb;
      const QSeg& sb = b[jb];
      ref.monotone_map[i] = qseg_pos(sb, std::min(std::max(q, sb.qa), sb.qb));
    }
  }

  // sign self-check: d/dt int x dmu_t equals the (t-independent) mean
  // displacement exactly; the reconstructed potential must reproduce it
  // through int Gamma(x, phi_t) dmu_t
  double mean_velocity = 0.0;
  for (const auto& g : ref.segments) {
    mean_velocity += 0.5 * ((g.a1 - g.a0) + (g.b1 - g.b0)) * (g.qb - g.qa);
  }
  const Vector& m = space.measure();
  double dev = 0.0;
  for (Index k = 0; k < tgrid.size(); ++k) {
    const Vector gam = space.gamma_raw(x, ref.phi[std::size_t(k)]);
    const double rhs = (m.array() * ref.mu[std::size_t(k)].array() * gam.array()).sum();
    dev = std::max(dev, std::abs(rhs - mean_velocity));
  }
  ref.velocity_identity_residual = dev;
  return ref;
}

double w2_distance_1d(const MeasureSpace& space, const Field& rho0, const Field& rho1) {
  require_neumann_1d(space, "w2_distance_1d");
  const std::vector<QSeg> a = quantile_segments(space, rho0, "w2_distance_1d");
  const std::vector<QSeg> b = quantile_segments(space, rho1, "w2_distance_1d");
  const MergedQuantiles merged = merge_quantiles(a, b, 16 * space.size());
  return std::sqrt(std::max(merged.w2sq, 0.0));
}

namespace {

// ---- exact transport LP -------------------------------------------------

void validate_lp(const Vector& a, const Vector& b, const Matrix& cost) {
  if (a.size() < 1 || b.size() < 1) throw InvalidArgument("exact_ot_small: empty marginal");
  if (cost.rows() != a.size() || cost.cols() != b.size()) {
    throw InvalidArgument("exact_ot_small: cost matrix shape mismatch");
  }
  for (Index i = 0; i < a.size(); ++i) {
    if (!(a[i] >= 0.0)) throw InvalidArgument("exact_ot_small: negative mass");
  }
  for (Index j = 0; j < b.size(); ++j) {
    if (!(b[j] >= 0.0)) throw InvalidArgument("exact_ot_small: negative mass");
  }
  if (!cost.allFinite()) throw InvalidArgument("exact_ot_small: non-finite cost");
  const double mass_gap = std::abs(a.sum() - b.sum());
  if (mass_gap > 1e-9 * std::max(1.0, a.sum())) {
    throw InvalidArgument("exact_ot_small: marginal masses differ");
  }
}

double binomial_estimate(Index nn, Index kk) {
  double r = 1.0;
  for (Index i = 1; i <= kk; ++i) {
    r *= double(nn - kk + i) / double(i);
    if (r > 1e15) return 1e15;
  }
  return r;
}

/// Flows of the unique balanced circulation on a spanning tree of the
/// bipartite supply graph, by leaf elimination. Returns false when any flow
/// is meaningfully negative (the tree is not a feasible vertex).
bool tree_flows(const std::vector<int>& rows, const std::vector<int>& cols, int m, int n,
                const Vector& a, const Vector& b, std::vector<double>& flow) {
  const int nodes = m + n;
  const int ne = int(rows.size());
  std::vector<int> degree(nodes, 0);
  std::vector<std::vector<int>> incident(nodes);
  for (int e = 0; e < ne; ++e) {
    ++degree[rows[e]];
    ++degree[m + cols[e]];
    incident[rows[e]].push_back(e);
    incident[m + cols[e]].push_back(e);
  }
  std::vector<double> rem(nodes);
  for (int i = 0; i < m; ++i) rem[i] = a[i];
  for (int j = 0; j < n; ++j) rem[m + j] = b[j];
  std::vector<char> edge_done(ne, 0);
  std::vector<int> queue;
  for (int v = 0; v < nodes; ++v) {
    if (degree[v] == 1) queue.push_back(v);
  }
  flow.assign(ne, 0.0);
  std::size_t head = 0;
  int processed = 0;
  while (head < queue.size() && processed < ne) {
    const int v = queue[head++];
    if (degree[v] != 1) continue;
    int edge = -1;
    for (int e : incident[v]) {
      if (!edge_done[e]) {
        edge = e;
        break;
      }
    }
    if (edge < 0) continue;
    const double f = rem[v];
    if (f < -1e-12) return false;
    flow[edge] = std::max(f, 0.0);
    edge_done[edge] = 1;
    ++processed;
    const int other = (rows[edge] == v) ? m + cols[edge] : rows[edge];
    rem[other] -= flow[edge];
    rem[v] = 0.0;
    --degree[v];
    if (--degree[other] == 1) queue.push_back(other);
  }
  return processed == ne;
}

/// Dual potentials on a spanning tree (u[0] = 0): u_i + v_j = c_ij on tree
/// edges. Returns the worst reduced cost over all pairs.
double tree_duals(const std::vector<int>& rows, const std::vector<int>& cols, int m, int n,
                  const Matrix& cost, Vector& u, Vector& v) {
  u = Vector::Constant(m, kNan);
  v = Vector::Constant(n, kNan);
  u[0] = 0.0;
  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t e = 0; e < rows.size(); ++e) {
      const int i = rows[e];
      const int j = cols[e];
      const bool ui = std::isfinite(u[i]);
      const bool vj = std::isfinite(v[j]);
      if (ui && !vj) {
        v[j] = cost(i, j) - u[i];
        progress = true;
      } else if (!ui && vj) {
        u[i] = cost(i, j) - v[j];
        progress = true;
      }
    }
  }
  double worst = kInf;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      worst = std::min(worst, cost(i, j) - u[i] - v[j]);
    }
  }
  return worst;
}

struct TreeVisitor {
  int m = 0, n = 0;
  const Vector* a = nullptr;
  const Vector* b = nullptr;
  const Matrix* cost = nullptr;
  std::vector<int> rows, cols;
  std::vector<double> flow;
  // union-find without path compression so choices can be rolled back
  std::vector<int> parent;
  std::vector<int> rank_;

  int find(int x) const {
    while (parent[std::size_t(x)] != x) x = parent[std::size_t(x)];
    return x;
  }

  template <class Fn>
  void enumerate(int edge, int chosen, Fn&& on_tree) {
    const int need = m + n - 1;
    const int ne = m * n;
    if (chosen == need) {
      on_tree(*this);
      return;
    }
    if (ne - edge < need - chosen) return;
    const int i = edge / n;
    const int j = edge % n;
    const int ri = find(i);
    const int rj = find(m + j);
    if (ri != rj) {
      // include this edge
      int child = ri, root = rj;
      if (rank_[std::size_t(child)] > rank_[std::size_t(root)]) std::swap(child, root);
      const int saved_rank = rank_[std::size_t(root)];
      parent[std::size_t(child)] = root;
      if (rank_[std::size_t(child)] == rank_[std::size_t(root)]) ++rank_[std::size_t(root)];
      rows.push_back(i);
      cols.push_back(j);
      enumerate(edge + 1, chosen + 1, on_tree);
      rows.pop_back();
      cols.pop_back();
      parent[std::size_t(child)] = child;
      rank_[std::size_t(root)] = saved_rank;
    }
    // skip this edge
    enumerate(edge + 1, chosen, on_tree);
  }

  void run(const Vector& aa, const Vector& bb, const Matrix& cc,
           const std::function<void(TreeVisitor&)>& on_tree) {
    m = int(aa.size());
    n = int(bb.size());
    a = &aa;
    b = &bb;
    cost = &cc;
    parent.resize(std::size_t(m + n));
    rank_.assign(std::size_t(m + n), 0);
    for (int v = 0; v < m + n; ++v) parent[std::size_t(v)] = v;
    rows.clear();
    cols.clear();
    enumerate(0, 0, on_tree);
  }
};

ExactPlan solve_enumeration(const Vector& a, const Vector& b, const Matrix& cost) {
  const int m = int(a.size());
  const int n = int(b.size());
  double best_cost = kInf;
  std::vector<int> best_rows, best_cols;
  std::vector<double> best_flow;

  TreeVisitor visitor;
  visitor.run(a, b, cost, [&](TreeVisitor& tv) {
    if (!tree_flows(tv.rows, tv.cols, m, n, a, b, tv.flow)) return;
    double c = 0.0;
    for (std::size_t e = 0; e < tv.rows.size(); ++e) {
      c += tv.flow[e] * cost(tv.rows[e], tv.cols[e]);
    }
    if (c < best_cost - 1e-15) {
      best_cost = c;
      best_rows = tv.rows;
      best_cols = tv.cols;
      best_flow = tv.flow;
    }
  });
  if (!std::isfinite(best_cost)) {
    throw SolverFailure("exact_ot_small: no feasible vertex found");
  }

  // second pass: among cost-optimal trees prefer one whose tree duals are
  // feasible, which certifies optimality directly
  ExactPlan plan;
  plan.method = "enumeration";
  plan.cost = best_cost;
  const double opt_tol = 1e-12 * (1.0 + std::abs(best_cost));
  bool have_dual = false;
  TreeVisitor second;
  second.run(a, b, cost, [&](TreeVisitor& tv) {
    if (have_dual) return;
    if (!tree_flows(tv.rows, tv.cols, m, n, a, b, tv.flow)) return;
    double c = 0.0;
    for (std::size_t e = 0; e < tv.rows.size(); ++e) {
      c += tv.flow[e] * cost(tv.rows[e], tv.cols[e]);
    }
    if (c > best_cost + opt_tol) return;
    Vector u, v;
    if (tree_duals(tv.rows, tv.cols, m, n, cost, u, v) >= -1e-8) {
      have_dual = true;
      plan.dual_u = u;
      plan.dual_v = v;
      best_rows = tv.rows;
      best_cols = tv.cols;
      best_flow = tv.flow;
      plan.cost = c;
    }
  });
  if (!have_dual) {
    Vector u, v;
    tree_duals(best_rows, best_cols, m, n, cost, u, v);
    plan.dual_u = u;
    plan.dual_v = v;
  }
  plan.plan = Matrix::Zero(m, n);
  for (std::size_t e = 0; e < best_rows.size(); ++e) {
    plan.plan(best_rows[e], best_cols[e]) = best_flow[e];
  }
  plan.duality_gap = plan.cost - (a.dot(plan.dual_u) + b.dot(plan.dual_v));
  return plan;
}

ExactPlan solve_simplex(const Vector& a, const Vector& b, const Matrix& cost) {
  const int m = int(a.size());
  const int n = int(b.size());
  std::vector<int> bi, bj;
  std::vector<double> bf;
  bi.reserve(std::size_t(m + n - 1));
  // northwest-corner start; zero-flow basics keep the basis a spanning tree
  {
    int i = 0, j = 0;
    double ra = a[0], rb = b[0];
    while (int(bi.size()) < m + n - 1) {
      const double f = std::min(ra, rb);
      bi.push_back(i);
      bj.push_back(j);
      bf.push_back(f);
      ra -= f;
      rb -= f;
      if (ra == 0.0 && i < m - 1) {
        ++i;
        ra = a[i];
      } else if (j < n - 1) {
        ++j;
        rb = b[j];
      } else if (i < m - 1) {
        ++i;
        ra = a[i];
      } else {
        break;
      }
    }
    if (int(bi.size()) != m + n - 1) {
      throw SolverFailure("exact_ot_small: degenerate start basis");
    }
  }

  Vector u(m), v(n);
  const int max_pivots = 200000;
  for (int pivot = 0;; ++pivot) {
    if (pivot > max_pivots) {
      throw SolverFailure("exact_ot_small: simplex did not terminate");
    }
    // duals from the basis tree
    u.setConstant(kNan);
    v.setConstant(kNan);
    u[0] = 0.0;
    bool progress = true;
    while (progress) {
      progress = false;
      for (std::size_t e = 0; e < bi.size(); ++e) {
        const bool ui = std::isfinite(u[bi[e]]);
        const bool vj = std::isfinite(v[bj[e]]);
        if (ui && !vj) {
          v[bj[e]] = cost(bi[e], bj[e]) - u[bi[e]];
          progress = true;
        } else if (!ui && vj) {
          u[bi[e]] = cost(bi[e], bj[e]) - v[bj[e]];
          progress = true;
        }
      }
    }
    if (!u.allFinite() || !v.allFinite()) {
      throw SolverFailure("exact_ot_small: basis is not a spanning tree");
    }
    // entering variable, Bland's rule
    int ei = -1, ej = -1;
    for (int i = 0; i < m && ei < 0; ++i) {
      for (int j = 0; j < n; ++j) {
        if (cost(i, j) - u[i] - v[j] < -1e-11) {
          ei = i;
          ej = j;
          break;
        }
      }
    }
    if (ei < 0) break; // optimal

    // cycle: tree path from row ei to column ej
    const int nodes = m + n;
    std::vector<std::vector<std::pair<int, int>>> adj(nodes); // (neighbor, edge)
    for (std::size_t e = 0; e < bi.size(); ++e) {
      adj[bi[e]].push_back({m + bj[e], int(e)});
      adj[m + bj[e]].push_back({bi[e], int(e)});
    }
    std::vector<int> parent_node(nodes, -1), parent_edge(nodes, -1);
    std::vector<char> seen(nodes, 0);
    std::vector<int> stack{ei};
    seen[ei] = 1;
    while (!stack.empty()) {
      const int x = stack.back();
      stack.pop_back();
      if (x == m + ej) break;
      for (auto [y, e] : adj[x]) {
        if (!seen[y]) {
          seen[y] = 1;
          parent_node[y] = x;
          parent_edge[y] = e;
          stack.push_back(y);
        }
      }
    }
    std::vector<int> path; // edges from column ej back to row ei
    for (int x = m + ej; x != ei; x = parent_node[x]) {
      if (parent_edge[x] < 0) throw SolverFailure("exact_ot_small: broken basis tree");
      path.push_back(parent_edge[x]);
    }
    // around the cycle the entering edge gains flow; path[0] shares the
    // entering column, so even path positions lose flow
    double delta = kInf;
    int leaving = -1;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const int e = path[k];
      const double f = bf[std::size_t(e)];
      const int id = bi[std::size_t(e)] * n + bj[std::size_t(e)];
      if (leaving < 0 || f < delta ||
          (f == delta && id < bi[std::size_t(leaving)] * n + bj[std::size_t(leaving)])) {
        delta = f;
        leaving = e;
      }
    }
    if (leaving < 0) throw SolverFailure("exact_ot_small: unbounded pivot");
    for (std::size_t k = 0; k < path.size(); ++k) {
      bf[std::size_t(path[k])] += (k % 2 == 0) ? -delta : delta;
    }
    bi[std::size_t(leaving)] = ei;
    bj[std::size_t(leaving)] = ej;
    bf[std::size_t(leaving)] = delta;
  }

  ExactPlan plan;
  plan.method = "simplex";
  plan.plan = Matrix::Zero(m, n);
  double total = 0.0;
  for (std::size_t e = 0; e < bi.size(); ++e) {
    plan.plan(bi[e], bj[e]) += bf[e];
    total += bf[e] * cost(bi[e], bj[e]);
  }
  plan.cost = total;
  plan.dual_u = u;
  plan.dual_v = v;
  plan.duality_gap = total - (a.dot(u) + b.dot(v));
  return plan;
}

} // namespace

ExactPlan exact_ot_small(const Vector& mu, const Vector& nu, const Matrix& cost) {
  validate_lp(mu, nu, cost);
  const Index m = mu.size();
  const Index n = nu.size();
  if (binomial_estimate(m * n, m + n - 1) <= 4e6) {
    return solve_enumeration(mu, nu, cost);
  }
  if (m <= 30 && n <= 30) {
    return solve_simplex(mu, nu, cost);
  }
  throw InvalidArgument("exact_ot_small: instance too large");
}

CrossValidation cross_validate(const std::vector<Matrix>& plans, const Matrix& cost,
                               double exact_cost) {
  CrossValidation out;
  out.gaps.reserve(plans.size());
  for (const Matrix& plan : plans) {
    if (plan.rows() != cost.rows() || plan.cols() != cost.cols()) {
      throw InvalidArgument("cross_validate: plan and cost dimensions differ");
    }
    out.gaps.push_back((plan.array() * cost.array()).sum() - exact_cost);
  }
  out.nonnegative = true;
  out.decreasing = true;
  for (std::size_t k = 0; k < out.gaps.size(); ++k) {
    if (out.gaps[k] < -1e-10) out.nonnegative = false;
    if (k > 0 && out.gaps[k] > out.gaps[k - 1] + 1e-12) out.decreasing = false;
  }
  return out;
}

} // namespace entrolab
