#include "vastopo/vasgraph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "vastopo/nn.hpp"

namespace vastopo {

std::vector<std::pair<std::size_t, std::size_t>> VesselGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (edge(i, j)) out.emplace_back(i, j);
  return out;
}

namespace {

void check_keypoints(const KeypointSet& kp) {
  if (kp.points.empty()) throw ValueError("vessel graph needs at least one keypoint");
  if (kp.points.size() > kMaxGraphNodes) {
    throw ValueError("vessel graph limited to " + std::to_string(kMaxGraphNodes) + " nodes, got " + std::to_string(kp.points.size()));
  }
  if (kp.radii.size() != kp.points.size() || kp.orientations.size() != kp.points.size()) {
    throw ShapeError("keypoint attribute arrays differ in length");
  }
}

}  // namespace

VesselGraph build_knn(const KeypointSet& kp, int k) {
  check_keypoints(kp);
  const std::size_t n = kp.size();
  if (k < 1) throw ValueError("build_knn: k must be >= 1");
  if (static_cast<std::size_t>(k) >= n) {
    throw ValueError("build_knn: k = " + std::to_string(k) + " must be < number of keypoints " + std::to_string(n));
  }
  VesselGraph g;
  g.keypoints = kp;
  g.k = k;
  g.n = n;
  g.adjacency.assign(n * n, 0);

  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a) d2 += (kp.points[i][a] - kp.points[j][a]) * (kp.points[i][a] - kp.points[j][a]);
      cand.emplace_back(d2, j);
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());  // pair order: distance, then index
    for (int r = 0; r < k; ++r) {
      const std::size_t j = cand[r].second;
      g.adjacency[i * n + j] = 1;
      g.adjacency[j * n + i] = 1;
    }
  }
  return normalize_adjacency(std::move(g));
}

VesselGraph isolated_graph(const KeypointSet& kp) {
  check_keypoints(kp);
  VesselGraph g;
  g.keypoints = kp;
  g.n = kp.size();
  g.adjacency.assign(g.n * g.n, 0);
  return normalize_adjacency(std::move(g));
}

VesselGraph normalize_adjacency(VesselGraph g) {
  const std::size_t n = g.n;
  if (g.adjacency.size() != n * n) throw ShapeError("adjacency size does not match node count");
  std::vector<double> deg(n, 1.0);  // self-loop
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += g.adjacency[i * n + j];
  g.norm_adjacency = nn::Tensor::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double a = (i == j) ? 1.0 : static_cast<double>(g.adjacency[i * n + j]);
      if (a != 0.0) g.norm_adjacency(i, j) = a / std::sqrt(deg[i] * deg[j]);
    }
  return g;
}

nn::Tensor node_attributes(const KeypointSet& kp) {
  check_keypoints(kp);
  const std::size_t n = kp.size();
  Vec3 lo = kp.points[0], hi = kp.points[0];
  double rmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], kp.points[i][a]);
      hi[a] = std::max(hi[a], kp.points[i][a]);
    }
    rmax = std::max(rmax, kp.radii[i]);
  }
  nn::Tensor x = nn::Tensor::matrix(n, kNodeAttributeWidth);
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) x(i, a) = hi[a] > lo[a] ? (kp.points[i][a] - lo[a]) / (hi[a] - lo[a]) : 0.0;
    x(i, 3) = rmax > 0.0 ? kp.radii[i] / rmax : 0.0;
    for (int a = 0; a < 3; ++a) x(i, 4 + a) = kp.orientations[i][a];
  }
  return x;
}

VesselGraph init_node_features(VesselGraph g, nn::ParamStore& params, const std::string& prefix, const std::vector<int>& widths) {
  if (widths.empty() || widths[0] != kNodeAttributeWidth) {
    throw ShapeError("init_node_features: MLP input width must be " + std::to_string(kNodeAttributeWidth));
  }
  if (!params.contains(prefix + "/w0")) nn::add_mlp_params(params, prefix, widths);
  nn::Tape tape;
  nn::Var x = tape.constant(node_attributes(g.keypoints));
  const nn::Tensor& out = nn::mlp_forward(params, prefix, x, widths).value();
  g.node_features = nn::Tensor(out.shape(), out.data());
  return g;
}

// ---------------------------------------------------------------- JSON

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class Seq>
void write_array(std::ostream& out, const Seq& s) {
  out << '[';
  for (std::size_t i = 0; i < s.size(); ++i) out << (i ? "," : "") << num(s[i]);
  out << ']';
}

}  // namespace

void write_graph_json(std::ostream& out, const VesselGraph& g) {
  const auto& kp = g.keypoints;
  out << "{\"n\":" << g.n << ",\"k\":" << g.k << ",\"points\":[";
  for (std::size_t i = 0; i < kp.size(); ++i) {
    if (i) out << ',';
    write_array(out, kp.points[i]);
  }
  out << "],\"radii\":";
  write_array(out, kp.radii);
  out << ",\"orientations\":[";
  for (std::size_t i = 0; i < kp.size(); ++i) {
    if (i) out << ',';
    write_array(out, kp.orientations[i]);
  }
  out << "],\"edges\":[";
  const auto e = g.edges();
  for (std::size_t i = 0; i < e.size(); ++i) out << (i ? "," : "") << '[' << e[i].first << ',' << e[i].second << ']';
  out << "],\"x\":[";
  if (g.node_features.rank() == 2 && g.node_features.rows() == g.n) {
    const std::size_t c = g.node_features.cols();
    for (std::size_t i = 0; i < g.n; ++i) {
      if (i) out << ',';
      std::vector<double> row(g.node_features.data().begin() + static_cast<std::ptrdiff_t>(i * c),
                              g.node_features.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * c));
      write_array(out, row);
    }
  }
  out << "]}\n";
}

void save_graph_json(const VesselGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_graph_json(out, g);
}

GraphJson read_graph_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
    GraphJson g;
    g.n = j.at("n").get<std::size_t>();
    g.k = j.at("k").get<int>();
    for (const auto& p : j.at("points")) g.keypoints.points.push_back(p.get<Vec3>());
    g.keypoints.radii = j.at("radii").get<std::vector<double>>();
    for (const auto& o : j.at("orientations")) g.keypoints.orientations.push_back(o.get<Vec3>());
    for (const auto& e : j.at("edges")) g.edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    g.x = j.at("x").get<std::vector<std::vector<double>>>();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("graph JSON: ") + e.what());
  }
}

}  // namespace vastopo
