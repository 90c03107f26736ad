#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vastopo/params.hpp"
#include "vastopo/skeleton.hpp"
#include "vastopo/tensor.hpp"

namespace vastopo {

inline constexpr std::size_t kMaxGraphNodes = 1024;
// Per-keypoint attribute width: normalized position (3), radius (1),
// orientation (3).
inline constexpr int kNodeAttributeWidth = 7;

struct VesselGraph {
  KeypointSet keypoints;
  int k = 0;
  std::size_t n = 0;
  std::vector<std::uint8_t> adjacency;  // n*n, symmetric, zero diagonal
  nn::Tensor norm_adjacency;            // D^-1/2 (A + I) D^-1/2
  nn::Tensor node_features;             // X, n x d0
  std::optional<nn::Tensor> embeddings; // Z, n x d

  bool edge(std::size_t i, std::size_t j) const { return adjacency[i * n + j] != 0; }
  // Undirected edges (i < j) in lexicographic order.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
};

// Directed kNN on raw voxel coordinates (ties -> smaller index), then
// symmetrized by union.
VesselGraph build_knn(const KeypointSet& kp, int k);

// Graph with a single node and no edges; the kNN needs k < n.
VesselGraph isolated_graph(const KeypointSet& kp);

VesselGraph normalize_adjacency(VesselGraph g);

// [p_hat, r_hat, n] per keypoint: positions min-max scaled per axis to
// [0, 1] (a degenerate axis maps to 0), radii divided by the largest radius.
nn::Tensor node_attributes(const KeypointSet& kp);

// X = MLP(node_attributes) row by row.
VesselGraph init_node_features(VesselGraph g, nn::ParamStore& params, const std::string& prefix, const std::vector<int>& widths);

// JSON artifact with keys in the order n, k, points, radii, orientations,
// edges, x. Numbers use 17 significant digits.
void write_graph_json(std::ostream& out, const VesselGraph& g);
void save_graph_json(const VesselGraph& g, const std::filesystem::path& path);

struct GraphJson {
  std::size_t n = 0;
  int k = 0;
  KeypointSet keypoints;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::vector<double>> x;
};
GraphJson read_graph_json(std::istream& in);

}  // namespace vastopo
