#include "entrolab/space.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

namespace entrolab {

namespace {

std::uint64_t next_space_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

constexpr Index kMaxNodes = 4096; // dense spectral/metric backend

const char* boundary_name(Boundary b) {
  return b == Boundary::neumann ? "neumann" : "periodic";
}

Boundary boundary_from_name(const std::string& name) {
  if (name == "neumann") return Boundary::neumann;
  if (name == "periodic") return Boundary::periodic;
  throw InvalidArgument("unknown boundary kind: " + name);
}

// arc distance between nodes a and b of one axis
double axis_distance(const GridAxis& ax, Index a, Index b) {
  const double h = ax.spacing();
  double d = std::abs(double(a - b)) * h;
  if (ax.boundary == Boundary::periodic) d = std::min(d, ax.length - d);
  return d;
}

// node weight along one axis (half cells at Neumann ends)
double axis_measure(const GridAxis& ax, Index i) {
  const double h = ax.spacing();
  if (ax.boundary == Boundary::neumann && (i == 0 || i == ax.n - 1)) return 0.5 * h;
  return h;
}

void validate_axis(const GridAxis& ax) {
  if (ax.n < 3) throw InvalidArgument("grid axis needs at least 3 nodes");
  if (!(ax.length > 0.0) || !std::isfinite(ax.length))
    throw InvalidArgument("grid axis length must be positive and finite");
}

} // namespace

void MeasureSpace::finalize() {
  const Index n = measure_.size();
  if (n < 2) throw InvalidArgument("space needs at least 2 nodes");
  if (n > kMaxNodes)
    throw InvalidArgument("space exceeds the dense-backend node limit of " +
                          std::to_string(kMaxNodes));
  for (Index i = 0; i < n; ++i)
    if (!(measure_[i] > 0.0) || !std::isfinite(measure_[i]))
      throw InvalidArgument("node measure must be positive and finite");

  std::vector<std::pair<Index, Index>> seen;
  seen.reserve(edges_.size());
  for (auto& e : edges_) {
    if (e.i < 0 || e.j < 0 || e.i >= n || e.j >= n)
      throw InvalidArgument("edge endpoint out of range");
    if (e.i == e.j) throw InvalidArgument("self loops are not allowed");
    if (!(e.weight > 0.0) || !std::isfinite(e.weight))
      throw InvalidArgument("edge weight must be positive and finite");
    if (e.i > e.j) std::swap(e.i, e.j);
    seen.emplace_back(e.i, e.j);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    throw InvalidArgument("duplicate edge");

  std::vector<Index> degree(n, 0);
  for (const auto& e : edges_) {
    ++degree[e.i];
    ++degree[e.j];
  }
  adj_offset_.assign(n + 1, 0);
  for (Index i = 0; i < n; ++i) adj_offset_[i + 1] = adj_offset_[i] + degree[i];
  adj_node_.assign(adj_offset_[n], 0);
  adj_weight_.assign(adj_offset_[n], 0.0);
  std::vector<Index> cursor(adj_offset_.begin(), adj_offset_.end() - 1);
  for (const auto& e : edges_) {
    adj_node_[cursor[e.i]] = e.j;
    adj_weight_[cursor[e.i]++] = e.weight;
    adj_node_[cursor[e.j]] = e.i;
    adj_weight_[cursor[e.j]++] = e.weight;
  }

  // connectivity: the heat semigroup must mix the whole space
  std::vector<char> reached(n, 0);
  std::queue<Index> frontier;
  frontier.push(0);
  reached[0] = 1;
  Index count = 1;
  while (!frontier.empty()) {
    const Index x = frontier.front();
    frontier.pop();
    for (Index k = adj_offset_[x]; k < adj_offset_[x + 1]; ++k) {
      const Index y = adj_node_[k];
      if (!reached[y]) {
        reached[y] = 1;
        ++count;
        frontier.push(y);
      }
    }
  }
  if (count != n) throw InvalidArgument("graph is not connected");

  total_mass_ = measure_.sum();
  id_ = next_space_id();
}

const Vector& MeasureSpace::log_measure() const {
  if (log_measure_.size() == 0) log_measure_ = measure_.array().log();
  return log_measure_;
}

const std::vector<GridAxis>& MeasureSpace::axes() const {
  if (kind_ == Kind::graph) throw UnsupportedSpace("graphs have no grid axes");
  return axes_;
}

const Vector& MeasureSpace::coordinate(int axis) const {
  if (kind_ == Kind::graph) throw UnsupportedSpace("graphs have no coordinates");
  if (axis < 0 || axis >= int(coords_.size()))
    throw InvalidArgument("coordinate axis out of range");
  return coords_[std::size_t(axis)];
}

const Matrix& MeasureSpace::generator() const {
  if (generator_.size() == 0) {
    const Index n = size();
    generator_.setZero(n, n);
    for (Index x = 0; x < n; ++x) {
      double diag = 0.0;
      for (Index k = adj_offset_[x]; k < adj_offset_[x + 1]; ++k) {
        const double c = adj_weight_[k] / measure_[x];
        generator_(x, adj_node_[k]) = c;
        diag -= c;
      }
      generator_(x, x) = diag;
    }
  }
  return generator_;
}

const Matrix& MeasureSpace::distance() const {
  if (distance_.size() != 0) return distance_;
  const Index n = size();
  distance_.setZero(n, n);
  if (kind_ == Kind::grid1d) {
    for (Index a = 0; a < n; ++a)
      for (Index b = 0; b < n; ++b) distance_(a, b) = axis_distance(axes_[0], a, b);
  } else if (kind_ == Kind::grid2d) {
    const Index nx = axes_[0].n;
    for (Index a = 0; a < n; ++a)
      for (Index b = 0; b < n; ++b) {
        const double dx = axis_distance(axes_[0], a % nx, b % nx);
        const double dy = axis_distance(axes_[1], a / nx, b / nx);
        distance_(a, b) = std::hypot(dx, dy);
      }
  } else {
    // Dijkstra from every source with edge length w^{-1/2}
    for (Index s = 0; s < n; ++s) {
      Vector dist = Vector::Constant(n, std::numeric_limits<double>::infinity());
      dist[s] = 0.0;
      using Item = std::pair<double, Index>;
      std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
      heap.emplace(0.0, s);
      while (!heap.empty()) {
        const auto [d, x] = heap.top();
        heap.pop();
        if (d > dist[x]) continue;
        for (Index k = adj_offset_[x]; k < adj_offset_[x + 1]; ++k) {
          const Index y = adj_node_[k];
          const double nd = d + 1.0 / std::sqrt(adj_weight_[k]);
          if (nd < dist[y]) {
            dist[y] = nd;
            heap.emplace(nd, y);
          }
        }
      }
      distance_.row(s) = dist.transpose();
    }
  }
  return distance_;
}

Field MeasureSpace::field(Vector values) const {
  if (values.size() != size())
    throw InvalidArgument("field size " + std::to_string(values.size()) +
                          " does not match space size " + std::to_string(size()));
  if (!values.allFinite()) throw InvalidArgument("field values must be finite");
  return Field{std::move(values), id_};
}

Field MeasureSpace::constant(double value) const {
  return field(Vector::Constant(size(), value));
}

void MeasureSpace::check(const Field& f) const {
  if (f.space_id != id_ || f.values.size() != size())
    throw SpaceMismatch("field does not belong to this space");
}

Vector MeasureSpace::apply_generator_raw(const Vector& f) const {
  const Index n = size();
  Vector out(n);
  for (Index x = 0; x < n; ++x) {
    double acc = 0.0;
    for (Index k = adj_offset_[x]; k < adj_offset_[x + 1]; ++k)
      acc += adj_weight_[k] * (f[adj_node_[k]] - f[x]);
    out[x] = acc / measure_[x];
  }
  return out;
}

Vector MeasureSpace::gamma_raw(const Vector& f, const Vector& g) const {
  const Index n = size();
  Vector out(n);
  for (Index x = 0; x < n; ++x) {
    double acc = 0.0;
    for (Index k = adj_offset_[x]; k < adj_offset_[x + 1]; ++k) {
      const Index y = adj_node_[k];
      acc += adj_weight_[k] * (f[y] - f[x]) * (g[y] - g[x]);
    }
    out[x] = 0.5 * acc / measure_[x];
  }
  return out;
}

Field MeasureSpace::apply_generator(const Field& f) const {
  check(f);
  return Field{apply_generator_raw(f.values), id_};
}

Field MeasureSpace::gamma(const Field& f, const Field& g) const {
  check(f);
  check(g);
  return Field{gamma_raw(f.values, g.values), id_};
}

Field MeasureSpace::gamma2(const Field& f) const {
  check(f);
  const Vector lf = apply_generator_raw(f.values);
  const Vector gff = gamma_raw(f.values, f.values);
  Vector out = 0.5 * apply_generator_raw(gff) - gamma_raw(f.values, lf);
  return Field{std::move(out), id_};
}

Field MeasureSpace::hessian_form(const Field& h, const Field& f) const {
  check(h);
  check(f);
  const Vector gfh = gamma_raw(f.values, h.values);
  const Vector gff = gamma_raw(f.values, f.values);
  Vector out = gamma_raw(f.values, gfh) - 0.5 * gamma_raw(h.values, gff);
  return Field{std::move(out), id_};
}

namespace {

// index of the stencil neighbour i+step folded back into the axis
Index fold_index(const GridAxis& ax, Index i, Index step) {
  Index j = i + step;
  if (ax.boundary == Boundary::periodic) {
    j %= ax.n;
    if (j < 0) j += ax.n;
    return j;
  }
  if (j < 0) return -j;
  if (j >= ax.n) return 2 * (ax.n - 1) - j;
  return j;
}

} // namespace

Field MeasureSpace::hessian_hs_norm_sq(const Field& f) const {
  check(f);
  if (kind_ == Kind::graph)
    throw UnsupportedSpace("hessian_hs_norm_sq needs a grid space");
  const Index n = size();
  Vector out(n);
  if (kind_ == Kind::grid1d) {
    const GridAxis& ax = axes_[0];
    const double ih2 = 1.0 / (ax.spacing() * ax.spacing());
    for (Index i = 0; i < n; ++i) {
      const double fxx =
          (f.values[fold_index(ax, i, -1)] - 2.0 * f.values[i] + f.values[fold_index(ax, i, 1)]) * ih2;
      out[i] = fxx * fxx;
    }
  } else {
    const GridAxis& ax = axes_[0];
    const GridAxis& ay = axes_[1];
    const Index nx = ax.n;
    const double ihx2 = 1.0 / (ax.spacing() * ax.spacing());
    const double ihy2 = 1.0 / (ay.spacing() * ay.spacing());
    const double ihxy = 0.25 / (ax.spacing() * ay.spacing());
    auto at = [&](Index ix, Index iy) { return f.values[iy * nx + ix]; };
    for (Index iy = 0; iy < ay.n; ++iy)
      for (Index ix = 0; ix < nx; ++ix) {
        const Index xm = fold_index(ax, ix, -1), xp = fold_index(ax, ix, 1);
        const Index ym = fold_index(ay, iy, -1), yp = fold_index(ay, iy, 1);
        const double fxx = (at(xm, iy) - 2.0 * at(ix, iy) + at(xp, iy)) * ihx2;
        const double fyy = (at(ix, ym) - 2.0 * at(ix, iy) + at(ix, yp)) * ihy2;
        const double fxy = (at(xp, yp) - at(xp, ym) - at(xm, yp) + at(xm, ym)) * ihxy;
        out[iy * nx + ix] = fxx * fxx + 2.0 * fxy * fxy + fyy * fyy;
      }
  }
  return Field{std::move(out), id_};
}

double MeasureSpace::integrate(const Field& f) const {
  check(f);
  return measure_.dot(f.values);
}

double MeasureSpace::inner(const Field& f, const Field& g) const {
  check(f);
  check(g);
  return (measure_.array() * f.values.array() * g.values.array()).sum();
}

MeasureSpace build_interval_grid(Index n, double length, Boundary boundary) {
  GridAxis ax{n, length, boundary};
  validate_axis(ax);
  MeasureSpace s;
  s.kind_ = MeasureSpace::Kind::grid1d;
  s.axes_ = {ax};
  const double h = ax.spacing();
  s.measure_.resize(n);
  Vector coord(n);
  for (Index i = 0; i < n; ++i) {
    s.measure_[i] = axis_measure(ax, i);
    coord[i] = double(i) * h;
  }
  s.coords_ = {std::move(coord)};
  const Index nedges = boundary == Boundary::periodic ? n : n - 1;
  s.edges_.reserve(std::size_t(nedges));
  for (Index i = 0; i + 1 < n; ++i) s.edges_.push_back({i, i + 1, 1.0 / h});
  if (boundary == Boundary::periodic) s.edges_.push_back({n - 1, 0, 1.0 / h});
  s.curvature_k_ = 0.0;
  s.dimension_n_ = 1.0;
  s.finalize();
  return s;
}

MeasureSpace build_rectangle_grid(GridAxis x, GridAxis y) {
  validate_axis(x);
  validate_axis(y);
  MeasureSpace s;
  s.kind_ = MeasureSpace::Kind::grid2d;
  s.axes_ = {x, y};
  const Index n = x.n * y.n;
  if (n > kMaxNodes)
    throw InvalidArgument("rectangle grid exceeds the dense-backend node limit");
  s.measure_.resize(n);
  Vector cx(n), cy(n);
  for (Index iy = 0; iy < y.n; ++iy)
    for (Index ix = 0; ix < x.n; ++ix) {
      const Index idx = iy * x.n + ix;
      s.measure_[idx] = axis_measure(x, ix) * axis_measure(y, iy);
      cx[idx] = double(ix) * x.spacing();
      cy[idx] = double(iy) * y.spacing();
    }
  s.coords_ = {std::move(cx), std::move(cy)};
  // couplings: 1d conductance along the axis times the transverse node weight
  for (Index iy = 0; iy < y.n; ++iy) {
    const double my = axis_measure(y, iy);
    for (Index ix = 0; ix + 1 < x.n; ++ix)
      s.edges_.push_back({iy * x.n + ix, iy * x.n + ix + 1, my / x.spacing()});
    if (x.boundary == Boundary::periodic)
      s.edges_.push_back({iy * x.n + x.n - 1, iy * x.n, my / x.spacing()});
  }
  for (Index ix = 0; ix < x.n; ++ix) {
    const double mx = axis_measure(x, ix);
    for (Index iy = 0; iy + 1 < y.n; ++iy)
      s.edges_.push_back({iy * x.n + ix, (iy + 1) * x.n + ix, mx / y.spacing()});
    if (y.boundary == Boundary::periodic)
      s.edges_.push_back({(y.n - 1) * x.n + ix, ix, mx / y.spacing()});
  }
  s.curvature_k_ = 0.0;
  s.dimension_n_ = 2.0;
  s.finalize();
  return s;
}

MeasureSpace build_weighted_graph(Index nodes, const std::vector<MeasureSpace::Edge>& edges,
                                  const Vector& measure, double curvature_k,
                                  double dimension_n) {
  if (measure.size() != nodes) throw InvalidArgument("measure size does not match node count");
  if (!(dimension_n > 0.0)) throw InvalidArgument("dimension tag must be positive");
  MeasureSpace s;
  s.kind_ = MeasureSpace::Kind::graph;
  s.measure_ = measure;
  s.edges_ = edges;
  s.curvature_k_ = curvature_k;
  s.dimension_n_ = dimension_n;
  s.finalize();
  return s;
}

double relative_entropy(const MeasureSpace& space, const Field& rho) {
  space.check(rho);
  double acc = 0.0;
  for (Index i = 0; i < rho.size(); ++i) {
    const double r = rho.values[i];
    if (r < 0.0) throw InvalidArgument("relative_entropy needs a nonnegative density");
    if (r > 0.0) acc += space.measure()[i] * r * std::log(r);
  }
  return acc;
}

std::string MeasureSpace::to_json() const {
  nlohmann::json j;
  if (kind_ == Kind::grid1d) {
    j["kind"] = "grid1d";
    j["n"] = axes_[0].n;
    j["length"] = axes_[0].length;
    j["boundary"] = boundary_name(axes_[0].boundary);
  } else if (kind_ == Kind::grid2d) {
    j["kind"] = "grid2d";
    for (const auto& ax : axes_)
      j["axes"].push_back({{"n", ax.n}, {"length", ax.length}, {"boundary", boundary_name(ax.boundary)}});
  } else {
    j["kind"] = "graph";
    j["nodes"] = size();
    j["measure"] = std::vector<double>(measure_.begin(), measure_.end());
    auto edges = nlohmann::json::array();
    for (const auto& e : edges_) edges.push_back({e.i, e.j, e.weight});
    j["edges"] = std::move(edges);
    j["curvature_k"] = curvature_k_;
    j["dimension_n"] = dimension_n_;
  }
  return j.dump(2);
}

MeasureSpace MeasureSpace::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("space JSON parse failure: ") + e.what());
  }
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "grid1d") {
      return build_interval_grid(j.at("n").get<Index>(), j.at("length").get<double>(),
                                 boundary_from_name(j.at("boundary").get<std::string>()));
    }
    if (kind == "grid2d") {
      const auto& axes = j.at("axes");
      if (axes.size() != 2) throw InvalidArgument("grid2d needs exactly 2 axes");
      auto parse_axis = [](const nlohmann::json& a) {
        return GridAxis{a.at("n").get<Index>(), a.at("length").get<double>(),
                        boundary_from_name(a.at("boundary").get<std::string>())};
      };
      return build_rectangle_grid(parse_axis(axes[0]), parse_axis(axes[1]));
    }
    if (kind == "graph") {
      const Index n = j.at("nodes").get<Index>();
      const auto mv = j.at("measure").get<std::vector<double>>();
      Vector m = Eigen::Map<const Vector>(mv.data(), Index(mv.size()));
      std::vector<Edge> edges;
      for (const auto& e : j.at("edges"))
        edges.push_back({e.at(0).get<Index>(), e.at(1).get<Index>(), e.at(2).get<double>()});
      return build_weighted_graph(n, edges, m, j.value("curvature_k", 0.0),
                                  j.value("dimension_n", 1.0));
    }
    throw InvalidArgument("unknown space kind: " + kind);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("space JSON schema failure: ") + e.what());
  }
}

void MeasureSpace::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open " + path + " for writing");
  out << to_json() << "\n";
}

MeasureSpace MeasureSpace::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

} // namespace entrolab
