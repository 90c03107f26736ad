#include "vastopo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <ostream>

#include "vastopo/metrics.hpp"
#include "vastopo/rvol.hpp"
#include "vastopo/seed.hpp"
#include "vastopo/skeleton.hpp"

namespace vastopo::pipeline {

using nn::Tape;
using nn::Tensor;
using nn::Var;

std::string_view to_string(Fusion f) {
  switch (f) {
    case Fusion::None: return "none";
    case Fusion::Concat: return "concat";
    case Fusion::DistanceBias: return "distance_bias";
    case Fusion::CrossAttention: return "cross_attention";
  }
  return "?";
}

std::string_view to_string(SclMode m) {
  switch (m) {
    case SclMode::None: return "none";
    case SclMode::Fifo: return "fifo";
    case SclMode::Cats: return "cats";
  }
  return "?";
}

Fusion parse_fusion(std::string_view s) {
  for (auto f : kAllFusions)
    if (to_string(f) == s) return f;
  throw ValueError("unknown fusion '" + std::string(s) + "' (none, concat, distance_bias, cross_attention)");
}

SclMode parse_scl_mode(std::string_view s) {
  for (auto m : kAllSclModes)
    if (to_string(m) == s) return m;
  throw ValueError("unknown scl mode '" + std::string(s) + "' (none, fifo, cats)");
}

void validate(const BackboneConfig& cfg, const Dims& dims) {
  if (cfg.patch_size < 1) throw ValueError("patch_size must be >= 1");
  if (cfg.token_dim < 1 || cfg.key_dim < 1) throw ValueError("token_dim and key_dim must be >= 1");
  if (cfg.class_count < 2) throw ValueError("class_count must be >= 2, got " + std::to_string(cfg.class_count));
  if (cfg.class_count > 256) throw ValueError("class_count must fit a u8 label volume");
  if (!std::isfinite(cfg.lambda_scl) || cfg.lambda_scl < 0) throw ValueError("lambda_scl must be finite and >= 0");
  if (!std::isfinite(cfg.lr) || cfg.lr < 0) throw ValueError("lr must be finite and >= 0");
  if (cfg.iterations < 0) throw ValueError("iterations must be >= 0");
  const int p = cfg.patch_size;
  if (dims.nx % p || dims.ny % p || dims.nz % p) {
    throw ValueError("dims " + to_string(dims) + " are not divisible by patch size " + std::to_string(p));
  }
  if (cfg.fusion == Fusion::Concat || cfg.fusion == Fusion::CrossAttention) {
    if (cfg.keypoints < 1) throw ValueError("keypoints must be >= 1");
    if (cfg.knn_k < 1) throw ValueError("knn k must be >= 1");
    if (cfg.node_mlp.size() < 2 || cfg.node_mlp.front() != kNodeAttributeWidth) {
      throw ValueError("node MLP widths must start at " + std::to_string(kNodeAttributeWidth));
    }
    nn::validate(cfg.gcn);
    if (cfg.gcn.widths.front() != cfg.node_mlp.back()) throw ValueError("GCN input width must equal the node MLP output width");
  }
  scl::validate(cfg.scl);
}

PatchLayout::PatchLayout(const Dims& d, int patch_size) : dims(d), patch(patch_size) {
  grid = {d.nx / patch, d.ny / patch, d.nz / patch};
  tokens = static_cast<std::size_t>(grid[0]) * grid[1] * grid[2];
  patch_voxels = static_cast<std::size_t>(patch) * patch * patch;
  token_of.resize(d.count());
  offset_of.resize(d.count());
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const auto v = d.index(x, y, z);
        token_of[v] = static_cast<std::size_t>(x / patch) + grid[0] * (static_cast<std::size_t>(y / patch) + grid[1] * static_cast<std::size_t>(z / patch));
        offset_of[v] = static_cast<std::size_t>(x % patch) + patch * (static_cast<std::size_t>(y % patch) + patch * static_cast<std::size_t>(z % patch));
      }
}

Topology encode_topology(const LabelVolume& vessel, const BackboneConfig& cfg) {
  require_binary(vessel, "vessel mask");
  Topology t;
  auto field = exact_edt(vessel);
  const bool needs_graph = cfg.fusion == Fusion::Concat || cfg.fusion == Fusion::CrossAttention;
  if (needs_graph) {
    const auto sk = skeletonize(vessel);
    auto kp = sample_keypoints(sk, field, cfg.keypoints);
    const int n = static_cast<int>(kp.size());
    t.graph = n == 1 ? isolated_graph(kp) : build_knn(kp, std::min(cfg.knn_k, n - 1));
    t.node_attributes = node_attributes(t.graph.keypoints);
  }
  const PatchLayout layout(vessel.dims(), cfg.patch_size);
  t.token_edt.assign(layout.tokens, 0.0);
  for (std::size_t v = 0; v < vessel.size(); ++v) t.token_edt[layout.token_of[v]] += field.dist[v];
  for (auto& e : t.token_edt) e /= static_cast<double>(layout.patch_voxels);
  return t;
}

Model::Model(BackboneConfig cfg, const Dims& dims)
    : cfg_(std::move(cfg)), layout_((validate(cfg_, dims), dims), cfg_.patch_size), params_(derive_seed(cfg_.seed, "model")) {
  const auto p3 = layout_.patch_voxels;
  const auto df = static_cast<std::size_t>(cfg_.token_dim);
  const auto dk = static_cast<std::size_t>(cfg_.key_dim);
  const auto c = static_cast<std::size_t>(cfg_.class_count);
  params_.add("stem/w", {p3, df});
  params_.add("stem/pos", {layout_.tokens, df}, nn::Init::Embedding);
  params_.add("head/w", {df, p3 * c});
  params_.add("head/b", {1, p3 * c}, nn::Init::Zeros);
  switch (cfg_.fusion) {
    case Fusion::None: break;
    case Fusion::CrossAttention:
      nn::add_mlp_params(params_, "topo/mlp", cfg_.node_mlp);
      nn::add_gcn_params(params_, "topo/gcn", cfg_.gcn);
      nn::add_attention_params(params_, "fuse/attn", cfg_.token_dim, cfg_.gcn.widths.back(), cfg_.key_dim, cfg_.token_dim);
      break;
    case Fusion::Concat: {
      nn::add_mlp_params(params_, "topo/mlp", cfg_.node_mlp);
      nn::add_gcn_params(params_, "topo/gcn", cfg_.gcn);
      const auto d = static_cast<std::size_t>(cfg_.gcn.widths.back());
      params_.add("fuse/concat/w", {df + d, df});
      params_.add("fuse/concat/b", {1, df}, nn::Init::Zeros);
      break;
    }
    case Fusion::DistanceBias:
      params_.add("fuse/self/wq", {df, dk});
      params_.add("fuse/self/wk", {df, dk});
      params_.add("fuse/self/wv", {df, df});
      params_.add_constant("fuse/alpha", {1, 1}, 1.0);
      break;
  }
}

TokenField Model::encode_tokens(Tape& tape, const FloatVolume& intensity) {
  if (intensity.dims() != layout_.dims) {
    throw ShapeError("intensity dims " + to_string(intensity.dims()) + " differ from model dims " + to_string(layout_.dims));
  }
  Tensor patches = Tensor::matrix(layout_.tokens, layout_.patch_voxels);
  for (std::size_t v = 0; v < intensity.size(); ++v) patches(layout_.token_of[v], layout_.offset_of[v]) = intensity[v];
  Var x = tape.constant(std::move(patches));
  Var f = nn::add(nn::matmul(x, params_.bind(tape, "stem/w")), params_.bind(tape, "stem/pos"));
  return {f, layout_.grid};
}

Var Model::embed_topology(Tape& tape, const Topology& topo) {
  Var x = tape.constant(topo.node_attributes);
  Var h = nn::mlp_forward(params_, "topo/mlp", x, cfg_.node_mlp);
  Var a = tape.constant(topo.graph.norm_adjacency);
  return nn::gcn_forward(params_, "topo/gcn", cfg_.gcn, h, a);
}

TokenField Model::fuse(const TokenField& in, const Topology* topo) {
  if (cfg_.fusion == Fusion::None) return in;
  if (!topo) throw ValueError(std::string("fusion ") + std::string(to_string(cfg_.fusion)) + " needs a vessel topology");
  Tape& tape = in.tokens.tape();
  Var f = in.tokens;
  TokenField out{f, in.grid};
  switch (cfg_.fusion) {
    case Fusion::None: break;
    case Fusion::CrossAttention: {
      Var z = embed_topology(tape, *topo);
      out.tokens = nn::add(f, nn::cross_attention(params_, "fuse/attn", f, z).output);
      break;
    }
    case Fusion::Concat: {
      Var z = embed_topology(tape, *topo);
      Var pooled = nn::gather_rows(nn::mean_rows(z), std::vector<std::size_t>(layout_.tokens, 0));
      Var cat = nn::concat_cols({f, pooled});
      out.tokens = nn::add_row(nn::matmul(cat, params_.bind(tape, "fuse/concat/w")), params_.bind(tape, "fuse/concat/b"));
      break;
    }
    case Fusion::DistanceBias: {
      if (topo->token_edt.size() != layout_.tokens) throw ShapeError("token EDT length does not match the token count");
      Var q = nn::matmul(f, params_.bind(tape, "fuse/self/wq"));
      Var k = nn::matmul(f, params_.bind(tape, "fuse/self/wk"));
      Var v = nn::matmul(f, params_.bind(tape, "fuse/self/wv"));
      Var logits = nn::scale(nn::matmul(q, nn::transpose(k)), 1.0 / std::sqrt(static_cast<double>(cfg_.key_dim)));
      Var edt = tape.constant(Tensor({1, layout_.tokens}, topo->token_edt));
      Var bias = nn::scale(nn::mul_scalar(edt, params_.bind(tape, "fuse/alpha")), -1.0);
      Var w = nn::softmax_rows(nn::add_row(logits, bias));
      out.tokens = nn::add(f, nn::matmul(w, v));
      break;
    }
  }
  return out;
}

Var Model::decode_logits(const TokenField& f) {
  Tape& tape = f.tokens.tape();
  Var h = nn::add_row(nn::matmul(f.tokens, params_.bind(tape, "head/w")), params_.bind(tape, "head/b"));
  Var flat = nn::reshape(h, layout_.tokens * layout_.patch_voxels, static_cast<std::size_t>(cfg_.class_count));
  std::vector<std::size_t> rows(layout_.token_of.size());
  for (std::size_t v = 0; v < rows.size(); ++v) rows[v] = layout_.token_of[v] * layout_.patch_voxels + layout_.offset_of[v];
  return nn::gather_rows(flat, std::move(rows));
}

ForwardResult Model::forward(Tape& tape, const FloatVolume& intensity, const Topology* topo) {
  auto tokens = encode_tokens(tape, intensity);
  auto fused = fuse(tokens, topo);
  return {fused, decode_logits(fused)};
}

std::vector<double> max_softmax(const Tensor& logits) {
  const auto n = logits.rows(), c = logits.cols();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.data().data() + i * c;
    const double m = *std::max_element(row, row + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - m);
    out[i] = 1.0 / s;
  }
  return out;
}

LabelVolume argmax_labels(const Tensor& logits, const Dims& dims) {
  if (logits.rows() != dims.count()) throw ShapeError("logit rows do not match the volume size");
  LabelVolume out(dims, 0);
  const auto c = logits.cols();
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const double* row = logits.data().data() + i * c;
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j)
      if (row[j] > row[best]) best = j;
    out[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

std::vector<std::size_t> liver_voxels(const LabelVolume& labels) {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < labels.size(); ++v)
    if (labels[v] >= 1) out.push_back(v);
  return out;
}

namespace {

scl::SclConfig scl_settings(const BackboneConfig& cfg) {
  auto s = cfg.scl;
  s.strategy = cfg.scl_mode == SclMode::Fifo ? scl::BankStrategy::Fifo : scl::BankStrategy::Cats;
  return s;
}

void check_data(const TrainingData& data, const BackboneConfig& cfg) {
  if (data.labels.dims() != data.intensity.dims()) {
    throw ShapeError("label dims " + to_string(data.labels.dims()) + " differ from intensity dims " + to_string(data.intensity.dims()));
  }
  for (std::size_t v = 0; v < data.labels.size(); ++v) {
    if (data.labels[v] >= cfg.class_count) {
      throw ValueError("label " + std::to_string(data.labels[v]) + " outside 0.." + std::to_string(cfg.class_count - 1));
    }
  }
  if (cfg.fusion != Fusion::None) {
    if (!data.vessel) throw ValueError(std::string("fusion ") + std::string(to_string(cfg.fusion)) + " needs a vessel mask");
    if (data.vessel->dims() != data.intensity.dims()) {
      throw ShapeError("vessel dims " + to_string(data.vessel->dims()) + " differ from intensity dims " + to_string(data.intensity.dims()));
    }
  }
}

std::optional<Topology> topology_for(const TrainingData& data, const BackboneConfig& cfg) {
  if (cfg.fusion == Fusion::None) return std::nullopt;
  return encode_topology(*data.vessel, cfg);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

LossBreakdown compute_loss(Model& model, Tape& tape, const TrainingData& data, const Topology* topo, const scl::MemoryBank& bank,
                           const scl::AnchorSet* fixed_anchors) {
  const auto& cfg = model.config();
  auto fwd = model.forward(tape, data.intensity, topo);

  std::vector<int> all(data.labels.size());
  for (std::size_t v = 0; v < all.size(); ++v) all[v] = data.labels[v];

  LossBreakdown out;
  out.ce = nn::cross_entropy(fwd.logits, all);
  out.total = out.ce;
  if (cfg.scl_mode == SclMode::None) return out;

  const auto liver = liver_voxels(data.labels);
  if (liver.empty()) return out;
  std::vector<int> lab(liver.size());
  std::vector<std::size_t> tok(liver.size());
  for (std::size_t i = 0; i < liver.size(); ++i) {
    lab[i] = data.labels[liver[i]];
    tok[i] = model.layout().token_of[liver[i]];
  }

  const auto sc = scl_settings(cfg);
  if (fixed_anchors) {
    out.anchors = *fixed_anchors;
  } else {
    const auto conf_all = max_softmax(fwd.logits.value());
    std::vector<double> conf(liver.size());
    for (std::size_t i = 0; i < liver.size(); ++i) conf[i] = conf_all[liver[i]];
    out.anchors = scl::select_anchors(conf, lab, sc);
  }
  if (out.anchors.count() == 0) return out;

  Var feats = nn::gather_rows(fwd.fused.tokens, std::move(tok));
  out.anchor_features = feats;
  // fusion none never looks at the vessel mask, so the vessel centre is
  // dropped from its negatives.
  std::vector<std::uint8_t> vessel_rows;
  if (cfg.fusion != Fusion::None && data.vessel) {
    vessel_rows.resize(liver.size());
    for (std::size_t i = 0; i < liver.size(); ++i) vessel_rows[i] = (*data.vessel)[liver[i]];
  }
  const auto centers = scl::class_centers(feats, lab, vessel_rows, cfg.class_count - 1);
  Var s = scl::scl_loss(feats, out.anchors, centers, bank, sc);
  out.scl = s;
  out.total = nn::add(out.ce, nn::scale(s, cfg.lambda_scl));
  return out;
}

TrainResult train(const TrainingData& data, const BackboneConfig& cfg, const std::function<void(const LogRow&)>& on_iter) {
  TrainResult r{Model(cfg, data.intensity.dims()), scl::MemoryBank(cfg.scl.capacity, scl_settings(cfg).strategy), {}};
  check_data(data, cfg);
  const auto topo = topology_for(data, cfg);
  const Topology* tp = topo ? &*topo : nullptr;

  for (int it = 0; it < cfg.iterations; ++it) {
    Tape tape;
    auto loss = compute_loss(r.model, tape, data, tp, r.bank);
    LogRow row{it, loss.ce.value().item(), loss.scl ? loss.scl->value().item() : 0.0, loss.total.value().item()};
    if (!std::isfinite(row.total) || !std::isfinite(row.ce) || !std::isfinite(row.scl)) {
      throw NumericError("non-finite loss at iteration " + std::to_string(it) + ": ce=" + num(row.ce) + " scl=" + num(row.scl) +
                         " total=" + num(row.total) + " anchors=" + std::to_string(loss.anchors.count()));
    }
    r.log.push_back(row);
    if (on_iter) on_iter(row);

    r.model.params().zero_grad();
    tape.backward(loss.total);
    nn::adam_step(r.model.params(), cfg.lr);
    if (loss.anchor_features) r.bank = scl::memory_update(std::move(r.bank), loss.anchors, loss.anchor_features->value());
  }
  return r;
}

void write_log_csv(std::ostream& out, const std::vector<LogRow>& log) {
  out << "iter,ce,scl,total\n";
  for (const auto& r : log) out << r.iter << ',' << num(r.ce) << ',' << num(r.scl) << ',' << num(r.total) << '\n';
}

LabelVolume infer(Model& model, const FloatVolume& intensity, const LabelVolume* vessel) {
  const auto& cfg = model.config();
  std::optional<Topology> topo;
  if (cfg.fusion != Fusion::None) {
    if (!vessel) throw ValueError(std::string("fusion ") + std::string(to_string(cfg.fusion)) + " needs a vessel mask");
    if (vessel->dims() != intensity.dims()) {
      throw ShapeError("vessel dims " + to_string(vessel->dims()) + " differ from intensity dims " + to_string(intensity.dims()));
    }
    topo = encode_topology(*vessel, cfg);
  }
  Tape tape;
  auto fwd = model.forward(tape, intensity, topo ? &*topo : nullptr);
  return argmax_labels(fwd.logits.value(), intensity.dims());
}

namespace {

Tensor row_of(const std::vector<double>& v) { return Tensor({1, v.size()}, v); }

std::vector<int> ints_of(const Tensor& t) {
  std::vector<int> out;
  for (double d : t.data()) {
    if (d != std::floor(d) || std::abs(d) > 1e9) throw FormatError("checkpoint config value is not an integer");
    out.push_back(static_cast<int>(d));
  }
  return out;
}

const Tensor& record(const nn::TensorMap& m, const std::string& name) {
  auto it = m.find(name);
  if (it == m.end()) throw FormatError("checkpoint lacks record '" + name + "'");
  return it->second;
}

int int_record(const nn::TensorMap& m, const std::string& name) {
  auto v = ints_of(record(m, name));
  if (v.size() != 1) throw FormatError("checkpoint record '" + name + "' must hold one value");
  return v[0];
}

}  // namespace

void save_checkpoint(const Model& model, const scl::MemoryBank& bank, const std::filesystem::path& path) {
  const auto& c = model.config();
  auto recs = nn::snapshot(model.params());
  auto put = [&](const std::string& k, std::vector<double> v) { recs["config/" + k] = row_of(v); };
  const auto& d = model.layout().dims;
  put("dims", {double(d.nx), double(d.ny), double(d.nz)});
  put("patch_size", {double(c.patch_size)});
  put("token_dim", {double(c.token_dim)});
  put("key_dim", {double(c.key_dim)});
  put("class_count", {double(c.class_count)});
  put("fusion", {double(static_cast<int>(c.fusion))});
  put("scl_mode", {double(static_cast<int>(c.scl_mode))});
  put("keypoints", {double(c.keypoints)});
  put("knn_k", {double(c.knn_k)});
  put("node_mlp", std::vector<double>(c.node_mlp.begin(), c.node_mlp.end()));
  put("gcn", std::vector<double>(c.gcn.widths.begin(), c.gcn.widths.end()));
  put("gcn_activation", {double(static_cast<int>(c.gcn.activation)), double(c.gcn.activate_last)});
  put("seed", {double(c.seed >> 32), double(c.seed & 0xffffffffu)});
  put("lambda_scl", {c.lambda_scl});
  put("lr", {c.lr});
  put("iterations", {double(c.iterations)});
  put("scl", {c.scl.temperature, c.scl.percentile, double(c.scl.capacity), double(static_cast<int>(c.scl.denominator))});
  bank.to_records(recs);
  nn::save_vgnp(recs, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto recs = nn::load_vgnp(path);
  auto cf = [](const std::string& k) { return "config/" + k; };
  BackboneConfig c;
  const auto dims = ints_of(record(recs, cf("dims")));
  if (dims.size() != 3) throw FormatError("checkpoint dims must hold 3 values");
  c.patch_size = int_record(recs, cf("patch_size"));
  c.token_dim = int_record(recs, cf("token_dim"));
  c.key_dim = int_record(recs, cf("key_dim"));
  c.class_count = int_record(recs, cf("class_count"));
  const int fusion = int_record(recs, cf("fusion"));
  const int mode = int_record(recs, cf("scl_mode"));
  if (fusion < 0 || fusion > 3 || mode < 0 || mode > 2) throw FormatError("checkpoint fusion/scl code out of range");
  c.fusion = static_cast<Fusion>(fusion);
  c.scl_mode = static_cast<SclMode>(mode);
  c.keypoints = int_record(recs, cf("keypoints"));
  c.knn_k = int_record(recs, cf("knn_k"));
  c.node_mlp = ints_of(record(recs, cf("node_mlp")));
  c.gcn.widths = ints_of(record(recs, cf("gcn")));
  const auto act = ints_of(record(recs, cf("gcn_activation")));
  if (act.size() != 2) throw FormatError("checkpoint gcn_activation must hold 2 values");
  c.gcn.activation = static_cast<nn::Activation>(act[0]);
  c.gcn.activate_last = act[1] != 0;
  const auto seed = record(recs, cf("seed")).data();
  if (seed.size() != 2) throw FormatError("checkpoint seed must hold 2 values");
  c.seed = (static_cast<std::uint64_t>(seed[0]) << 32) | static_cast<std::uint64_t>(seed[1]);
  c.lambda_scl = record(recs, cf("lambda_scl")).data().at(0);
  c.lr = record(recs, cf("lr")).data().at(0);
  c.iterations = int_record(recs, cf("iterations"));
  const auto s = record(recs, cf("scl")).data();
  if (s.size() != 4) throw FormatError("checkpoint scl config must hold 4 values");
  c.scl.temperature = s[0];
  c.scl.percentile = s[1];
  c.scl.capacity = static_cast<int>(s[2]);
  c.scl.denominator = static_cast<scl::DenominatorMode>(static_cast<int>(s[3]));

  Model model(c, Dims{dims[0], dims[1], dims[2]});
  nn::restore(model.params(), recs);
  auto bank = scl::MemoryBank::from_records(recs, c.scl.capacity, scl_settings(c).strategy);
  return {std::move(model), std::move(bank)};
}

TrainingData load_phantom_files(const std::string& prefix, bool with_vessel) {
  TrainingData d{load_float_rvol(prefix + ".ct.rvol"), std::nullopt, load_label_rvol(prefix + ".labels.rvol")};
  if (with_vessel) d.vessel = load_label_rvol(prefix + ".vessel.rvol");
  return d;
}

BackboneConfig gradcheck_config(Fusion fusion, SclMode mode, std::uint64_t seed) {
  BackboneConfig c;
  c.patch_size = 4;
  c.token_dim = 4;
  c.key_dim = 4;
  c.class_count = 4;
  c.fusion = fusion;
  c.scl_mode = mode;
  c.lambda_scl = 1.0;
  c.seed = seed;
  c.keypoints = 6;
  c.knn_k = 2;
  c.node_mlp = {kNodeAttributeWidth, 4, 4};
  c.gcn.widths = {4, 4, 4};
  c.scl.percentile = 80.0;
  return c;
}

nn::GradCheckReport check_pipeline_gradients(const TrainingData& data, const BackboneConfig& cfg, double eps) {
  check_data(data, cfg);
  Model model(cfg, data.intensity.dims());
  const auto topo = topology_for(data, cfg);
  const Topology* tp = topo ? &*topo : nullptr;

  // Anchors and the bank come from the base point and stay fixed per probe.
  scl::MemoryBank bank(cfg.scl.capacity, scl_settings(cfg).strategy);
  scl::AnchorSet anchors;
  {
    Tape tape;
    auto base = compute_loss(model, tape, data, tp, bank);
    anchors = base.anchors;
    if (base.anchor_features) bank = scl::memory_update(std::move(bank), anchors, base.anchor_features->value());
  }
  nn::Objective f = [&](Tape& tape, nn::ParamStore&) { return compute_loss(model, tape, data, tp, bank, &anchors).total; };
  return nn::grad_check(model.params(), f, eps);
}

std::vector<AblationRow> ablate(const TrainingData& data, const BackboneConfig& base, const std::vector<Fusion>& fusions,
                                const std::vector<SclMode>& modes) {
  std::vector<AblationRow> rows;
  for (auto f : fusions)
    for (auto m : modes) {
      auto cfg = base;
      cfg.fusion = f;
      cfg.scl_mode = m;
      auto r = train(data, cfg);
      const auto pred = infer(r.model, data.intensity, data.vessel ? &*data.vessel : nullptr);
      const auto rep = evaluate(pred, data.labels, cfg.class_count - 1);
      rows.push_back({f, m, rep.macro_dsc, rep.miou, rep.mean_rvd});
    }
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "fusion,scl,dsc,miou,rvd\n";
  for (const auto& r : rows) out << to_string(r.fusion) << ',' << to_string(r.scl) << ',' << num(r.dsc) << ',' << num(r.miou) << ',' << num(r.rvd) << '\n';
}

}  // namespace vastopo::pipeline
