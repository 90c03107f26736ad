#include "vastopo/scl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace vastopo::scl {

void validate(const SclConfig& cfg) {
  if (!(cfg.temperature > 0.0)) throw ValueError("SCL temperature must be > 0");
  if (!(cfg.percentile > 0.0 && cfg.percentile < 100.0)) throw ValueError("SCL percentile must be in (0, 100)");
  if (cfg.capacity < 1) throw ValueError("memory bank capacity must be >= 1");
}

std::size_t AnchorSet::count() const {
  std::size_t n = 0;
  for (const auto& [_, a] : by_class) n += a.rows.size();
  return n;
}

double nearest_rank_percentile(std::span<const double> values, double q) {
  if (values.empty()) throw ValueError("percentile of an empty set");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

AnchorSet select_anchors(std::span<const double> confidence, std::span<const int> labels, const SclConfig& cfg) {
  validate(cfg);
  if (confidence.size() != labels.size()) throw ShapeError("select_anchors: confidence and labels differ in length");
  std::vector<double> considered;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 1) considered.push_back(confidence[i]);
  if (considered.empty()) throw ValueError("select_anchors: no labelled voxel to choose from");

  AnchorSet out;
  out.threshold = nearest_rank_percentile(considered, cfg.percentile);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 1 && confidence[i] > out.threshold) {
      auto& a = out.by_class[labels[i]];
      a.rows.push_back(i);
      a.confidence.push_back(confidence[i]);
    }
  }
  return out;
}

Centers class_centers(nn::Var features, std::span<const int> labels, std::span<const std::uint8_t> vessel, int class_count) {
  const std::size_t rows = features.rows();
  if (labels.size() != rows || (!vessel.empty() && vessel.size() != rows)) {
    throw ShapeError("class_centers: " + std::to_string(rows) + " feature rows but " + std::to_string(labels.size()) +
                     " labels / " + std::to_string(vessel.size()) + " vessel flags");
  }
  const auto segments = static_cast<std::size_t>(class_count) + 1;
  std::vector<int> seg(rows);
  Centers c;
  c.present.assign(segments, false);
  for (std::size_t i = 0; i < rows; ++i) {
    if (labels[i] > class_count) throw ValueError("class_centers: label out of range");
    seg[i] = labels[i] >= 1 ? labels[i] : -1;
    if (seg[i] > 0) c.present[static_cast<std::size_t>(seg[i])] = true;
  }
  c.by_class = nn::segment_mean(features, seg, segments);

  if (vessel.empty()) return c;  // not supplied
  std::vector<int> vseg(rows);
  bool any = false;
  for (std::size_t i = 0; i < rows; ++i) {
    vseg[i] = vessel[i] ? 0 : -1;
    any = any || vessel[i];
  }
  if (any) {
    c.vessel = nn::segment_mean(features, vseg, 1);
  } else {
    std::fprintf(stderr, "vastopo: vessel mask empty; vessel centre omitted from SCL negatives\n");
  }
  return c;
}

// ---------------------------------------------------------------- bank

MemoryBank::MemoryBank(int capacity, BankStrategy strategy) : capacity_(capacity), strategy_(strategy) {
  if (capacity < 1) throw ValueError("memory bank capacity must be >= 1");
}

void MemoryBank::insert(int cls, std::span<const double> feature, double confidence) {
  if (dim_ == 0) {
    if (feature.empty()) throw ShapeError("memory bank: empty feature");
    dim_ = feature.size();
  } else if (feature.size() != dim_) {
    throw ShapeError("memory bank: feature dimension " + std::to_string(feature.size()) + " vs stored " + std::to_string(dim_));
  }
  for (double v : feature)
    if (!std::isfinite(v)) throw NumericError("memory bank: non-finite feature");

  auto& slot = store_[cls];
  BankEntry e{std::vector<double>(feature.begin(), feature.end()), confidence, tick_++};
  if (strategy_ == BankStrategy::Fifo) {
    slot.push_back(std::move(e));
    if (slot.size() > static_cast<std::size_t>(capacity_)) slot.erase(slot.begin());  // entries stay in tick order
    return;
  }
  if (slot.size() < static_cast<std::size_t>(capacity_)) {
    slot.push_back(std::move(e));
    return;
  }
  auto weakest = std::min_element(slot.begin(), slot.end(), [](const BankEntry& a, const BankEntry& b) {
    return a.confidence < b.confidence || (a.confidence == b.confidence && a.tick < b.tick);
  });
  if (e.confidence > weakest->confidence) *weakest = std::move(e);
}

const std::vector<BankEntry>& MemoryBank::entries(int cls) const {
  static const std::vector<BankEntry> kEmpty;
  auto it = store_.find(cls);
  return it == store_.end() ? kEmpty : it->second;
}

std::vector<int> MemoryBank::classes() const {
  std::vector<int> out;
  for (const auto& [c, _] : store_) out.push_back(c);
  return out;
}

void MemoryBank::to_records(nn::TensorMap& out) const {
  for (const auto& [cls, entries] : store_) {
    for (std::size_t s = 0; s < entries.size(); ++s) {
      char slot[16];
      std::snprintf(slot, sizeof slot, "%04zu", s);
      const std::string base = "memo/" + std::to_string(cls) + "/" + slot;
      out.emplace(base, nn::Tensor({entries[s].feature.size()}, entries[s].feature));
      out.emplace(base + "/conf", nn::Tensor({1}, entries[s].confidence));
      out.emplace(base + "/tick", nn::Tensor({1}, static_cast<double>(entries[s].tick)));
    }
  }
}

MemoryBank MemoryBank::from_records(const nn::TensorMap& in, int capacity, BankStrategy strategy) {
  MemoryBank bank(capacity, strategy);
  std::uint64_t max_tick = 0;
  bool any = false;
  for (const auto& [name, t] : in) {
    if (name.rfind("memo/", 0) != 0) continue;
    const auto slash = name.find('/', 5);
    if (slash == std::string::npos) throw FormatError("malformed memory record '" + name + "'");
    if (name.find('/', slash + 1) != std::string::npos) continue;  // conf/tick handled with the feature
    const int cls = std::stoi(name.substr(5, slash - 5));
    const auto conf = in.find(name + "/conf");
    const auto tick = in.find(name + "/tick");
    if (conf == in.end() || tick == in.end()) throw FormatError("memory record '" + name + "' lacks conf/tick");
    BankEntry e{t.data(), conf->second.data().at(0), static_cast<std::uint64_t>(tick->second.data().at(0))};
    if (bank.dim_ == 0) bank.dim_ = e.feature.size();
    if (e.feature.size() != bank.dim_) throw ShapeError("memory records differ in dimension");
    max_tick = std::max(max_tick, e.tick);
    any = true;
    bank.store_[cls].push_back(std::move(e));
  }
  for (auto& [_, entries] : bank.store_) {
    if (entries.size() > static_cast<std::size_t>(capacity)) throw FormatError("memory records exceed bank capacity");
    if (strategy == BankStrategy::Fifo) {
      std::sort(entries.begin(), entries.end(), [](const BankEntry& a, const BankEntry& b) { return a.tick < b.tick; });
    }
  }
  bank.tick_ = any ? max_tick + 1 : 0;
  return bank;
}

MemoryBank memory_update(MemoryBank bank, const AnchorSet& anchors, const nn::Tensor& features) {
  const std::size_t d = features.cols();
  for (const auto& [cls, a] : anchors.by_class) {
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      const std::size_t r = a.rows[i];
      if (r >= features.rows()) throw ShapeError("memory_update: anchor row out of range");
      bank.insert(cls, std::span<const double>(features.data().data() + r * d, d), a.confidence[i]);
    }
  }
  return bank;
}

// ---------------------------------------------------------------- loss

nn::Var negatives_for(int cls, const Centers& centers, const MemoryBank& bank, nn::Tape& tape) {
  std::vector<nn::Var> parts;
  std::vector<std::size_t> other;
  for (std::size_t k = 1; k < centers.present.size(); ++k)
    if (centers.present[k] && static_cast<int>(k) != cls) other.push_back(k);
  if (!other.empty()) parts.push_back(nn::gather_rows(centers.by_class, other));
  if (centers.vessel) parts.push_back(*centers.vessel);

  std::vector<double> memo;
  std::size_t memo_rows = 0;
  for (int k : bank.classes()) {
    if (k == cls) continue;
    for (const auto& e : bank.entries(k)) {
      memo.insert(memo.end(), e.feature.begin(), e.feature.end());
      ++memo_rows;
    }
  }
  if (memo_rows) parts.push_back(tape.constant(nn::Tensor({memo_rows, bank.dim()}, std::move(memo))));
  if (parts.empty()) throw ValueError("SCL: negative set for class " + std::to_string(cls) + " is empty");
  return nn::concat_rows(parts);
}

nn::Var scl_loss(nn::Var features, const AnchorSet& anchors, const Centers& centers, const MemoryBank& bank, const SclConfig& cfg) {
  validate(cfg);
  nn::Tape& tape = features.tape();
  const double inv_tau = 1.0 / cfg.temperature;
  std::vector<nn::Var> per_class;
  for (const auto& [cls, a] : anchors.by_class) {
    if (a.rows.empty()) continue;
    if (cls < 1 || static_cast<std::size_t>(cls) >= centers.present.size() || !centers.present[static_cast<std::size_t>(cls)]) {
      throw ValueError("SCL: anchors of class " + std::to_string(cls) + " without a class centre");
    }
    nn::Var anchor = nn::normalize_rows(nn::gather_rows(features, a.rows));
    nn::Var positive = nn::normalize_rows(nn::gather_rows(centers.by_class, {static_cast<std::size_t>(cls)}));
    nn::Var negative = nn::normalize_rows(negatives_for(cls, centers, bank, tape));

    nn::Var pos = nn::scale(nn::matmul(anchor, nn::transpose(positive)), inv_tau);
    nn::Var neg = nn::scale(nn::matmul(anchor, nn::transpose(negative)), inv_tau);
    nn::Var denom = cfg.denominator == DenominatorMode::PaperLiteral ? nn::logsumexp_rows(neg)
                                                                      : nn::logsumexp_rows(nn::concat_cols({pos, neg}));
    per_class.push_back(nn::mean_all(nn::sub(denom, pos)));
  }
  if (per_class.empty()) throw ValueError("SCL: no class has anchors");
  return nn::mean_all(nn::concat_rows(per_class));
}

}  // namespace vastopo::scl
