#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vastopo/edt.hpp"
#include "vastopo/nn.hpp"
#include "vastopo/params.hpp"
#include "vastopo/scl.hpp"
#include "vastopo/vasgraph.hpp"
#include "vastopo/volume.hpp"

namespace vastopo::pipeline {

enum class Fusion { None, Concat, DistanceBias, CrossAttention };
enum class SclMode { None, Fifo, Cats };

std::string_view to_string(Fusion f);
std::string_view to_string(SclMode m);
Fusion parse_fusion(std::string_view s);
SclMode parse_scl_mode(std::string_view s);
inline constexpr std::array<Fusion, 4> kAllFusions{Fusion::None, Fusion::Concat, Fusion::DistanceBias, Fusion::CrossAttention};
inline constexpr std::array<SclMode, 3> kAllSclModes{SclMode::None, SclMode::Fifo, SclMode::Cats};

struct BackboneConfig {
  int patch_size = 4;
  int token_dim = 32;   // d_f
  int key_dim = 32;     // d_k
  int class_count = 4;  // output classes including background 0
  Fusion fusion = Fusion::CrossAttention;
  double lambda_scl = 0.1;
  double lr = 0.01;
  int iterations = 200;
  std::uint64_t seed = 7;

  // topology branch
  int keypoints = 256;
  int knn_k = 8;
  std::vector<int> node_mlp{kNodeAttributeWidth, 32, 32};
  nn::GcnConfig gcn{{32, 32, 32}, nn::Activation::Relu, false};

  SclMode scl_mode = SclMode::Cats;
  scl::SclConfig scl;
};

// Throws ValueError on inconsistent settings; dims must be divisible by the
// patch size.
void validate(const BackboneConfig& cfg, const Dims& dims);

// Everything the fusion variants read from the vessel mask. Built without
// parameters, once per volume.
struct Topology {
  VesselGraph graph;             // keypoints + normalized adjacency
  nn::Tensor node_attributes;    // n x 7
  std::vector<double> token_edt; // mean EDT per token patch
};

// Skeleton -> keypoints -> kNN graph (k clamped to n - 1; a single keypoint
// gives an edgeless graph), plus per-token mean EDT.
Topology encode_topology(const LabelVolume& vessel, const BackboneConfig& cfg);

// Fixed voxel <-> token bookkeeping for one volume shape.
struct PatchLayout {
  Dims dims;
  int patch = 1;
  std::array<int, 3> grid{};           // tokens per axis
  std::size_t tokens = 0;              // T
  std::size_t patch_voxels = 0;        // P^3
  std::vector<std::size_t> token_of;   // per voxel
  std::vector<std::size_t> offset_of;  // per voxel, x-fastest within the patch

  PatchLayout(const Dims& d, int patch_size);
};

struct TokenField {
  nn::Var tokens;  // T x d_f
  std::array<int, 3> grid{};
};

struct ForwardResult {
  TokenField fused;       // pre-head activations (SCL feature source)
  nn::Var logits;         // V x class_count, voxel order
};

class Model {
 public:
  Model(BackboneConfig cfg, const Dims& dims);

  const BackboneConfig& config() const noexcept { return cfg_; }
  const PatchLayout& layout() const noexcept { return layout_; }
  nn::ParamStore& params() noexcept { return params_; }
  const nn::ParamStore& params() const noexcept { return params_; }

  // Non-overlapping P^3 patches, linear projection, plus a learned position
  // embedding per token.
  TokenField encode_tokens(nn::Tape& tape, const FloatVolume& intensity);
  // Topology injection; `topo` may be null only for Fusion::None.
  TokenField fuse(const TokenField& f, const Topology* topo);
  // Topology embeddings Z = GCN(MLP(attributes)).
  nn::Var embed_topology(nn::Tape& tape, const Topology& topo);
  // Per-token linear head to P^3 * classes, un-patched to voxel order.
  nn::Var decode_logits(const TokenField& f);

  ForwardResult forward(nn::Tape& tape, const FloatVolume& intensity, const Topology* topo);

 private:
  BackboneConfig cfg_;
  PatchLayout layout_;
  nn::ParamStore params_;
};

// Max softmax probability per row of a logits matrix.
std::vector<double> max_softmax(const nn::Tensor& logits);

// Smallest class index wins ties.
LabelVolume argmax_labels(const nn::Tensor& logits, const Dims& dims);

struct TrainingData {
  FloatVolume intensity;
  std::optional<LabelVolume> vessel;  // required unless fusion is none
  LabelVolume labels;                 // 0 = background
};

struct LogRow {
  int iter = 0;
  double ce = 0.0;
  double scl = 0.0;
  double total = 0.0;
};

// Loss pieces for one forward pass. Anchor selection and the memory bank are
// inputs so a gradient check can hold them fixed.
struct LossBreakdown {
  nn::Var total;
  nn::Var ce;
  std::optional<nn::Var> scl;
  scl::AnchorSet anchors;
  std::optional<nn::Var> anchor_features;  // liver-voxel features the anchors index
};

// Liver voxels (label >= 1), in voxel order; rows of the SCL feature matrix.
std::vector<std::size_t> liver_voxels(const LabelVolume& labels);

LossBreakdown compute_loss(Model& model, nn::Tape& tape, const TrainingData& data, const Topology* topo,
                           const scl::MemoryBank& bank, const scl::AnchorSet* fixed_anchors = nullptr);

struct TrainResult {
  Model model;
  scl::MemoryBank bank;
  std::vector<LogRow> log;
};

// CE + lambda * SCL with Adam, then a memory-bank update per iteration.
// Fusion::None never reads data.vessel. A non-finite loss throws
// NumericError naming the iteration.
TrainResult train(const TrainingData& data, const BackboneConfig& cfg, const std::function<void(const LogRow&)>& on_iter = {});

void write_log_csv(std::ostream& out, const std::vector<LogRow>& log);

LabelVolume infer(Model& model, const FloatVolume& intensity, const LabelVolume* vessel);

// ---- checkpoints: parameters + "config/..." + "memo/..." records in VGNP.
void save_checkpoint(const Model& model, const scl::MemoryBank& bank, const std::filesystem::path& path);

struct Checkpoint {
  Model model;
  scl::MemoryBank bank;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Phantom files "<prefix>.ct.rvol", ".vessel.rvol", ".labels.rvol"; the
// vessel file is skipped when with_vessel is false.
TrainingData load_phantom_files(const std::string& prefix, bool with_vessel = true);

// ---- gradient check of the full loss on a small configuration.
nn::GradCheckReport check_pipeline_gradients(const TrainingData& data, const BackboneConfig& cfg, double eps = 1e-5);

// Config sized for finite-difference checks on an 8^3 phantom.
BackboneConfig gradcheck_config(Fusion fusion, SclMode mode, std::uint64_t seed);

// ---- ablation: every (fusion, scl) pair, evaluated on the training volume.
struct AblationRow {
  Fusion fusion;
  SclMode scl;
  double dsc = 0.0;
  double miou = 0.0;
  double rvd = 0.0;
};

std::vector<AblationRow> ablate(const TrainingData& data, const BackboneConfig& base,
                                const std::vector<Fusion>& fusions = {kAllFusions.begin(), kAllFusions.end()},
                                const std::vector<SclMode>& modes = {kAllSclModes.begin(), kAllSclModes.end()});
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

}  // namespace vastopo::pipeline
