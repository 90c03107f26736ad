#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vastopo/params.hpp"
#include "vastopo/tensor.hpp"

namespace vastopo::scl {

enum class BankStrategy { Fifo, Cats };

// PaperLiteral: the denominator sums over the negative set only, so a term
// can be negative. WithPositive: the positive pair is added to it (InfoNCE).
enum class DenominatorMode { PaperLiteral, WithPositive };

struct SclConfig {
  double temperature = 0.1;
  double percentile = 95.0;
  int capacity = 16;
  BankStrategy strategy = BankStrategy::Cats;
  DenominatorMode denominator = DenominatorMode::PaperLiteral;
};

void validate(const SclConfig& cfg);

struct ClassAnchors {
  std::vector<std::size_t> rows;   // feature rows, ascending
  std::vector<double> confidence;  // parallel to rows
};

struct AnchorSet {
  double threshold = 0.0;
  std::map<int, ClassAnchors> by_class;
  std::size_t count() const;
};

// Nearest-rank percentile: the ceil(q/100 * n)-th smallest value (1-based).
double nearest_rank_percentile(std::span<const double> values, double q);

// Rows with label >= 1 are considered; anchors are those whose confidence
// strictly exceeds the percentile threshold of the considered rows.
AnchorSet select_anchors(std::span<const double> confidence, std::span<const int> labels, const SclConfig& cfg);

struct Centers {
  nn::Var by_class;            // row c = mean feature of class c (zero if absent)
  std::vector<bool> present;   // indexed by class label
  std::optional<nn::Var> vessel;
};

// Class means over rows with label >= 1 and the mean over vessel rows. A
// mask with no vessel row leaves `vessel` unset (and logs it); an empty span
// means no mask was supplied.
Centers class_centers(nn::Var features, std::span<const int> labels, std::span<const std::uint8_t> vessel, int class_count);

struct BankEntry {
  std::vector<double> feature;
  double confidence = 0.0;
  std::uint64_t tick = 0;  // insertion counter
};

class MemoryBank {
 public:
  MemoryBank(int capacity = 16, BankStrategy strategy = BankStrategy::Cats);

  // FIFO: append, evicting the oldest entry past capacity.
  // CATS: append below capacity; otherwise replace the lowest-confidence
  // entry (older wins ties) if the newcomer is strictly more confident.
  void insert(int cls, std::span<const double> feature, double confidence);

  const std::vector<BankEntry>& entries(int cls) const;
  std::vector<int> classes() const;
  int capacity() const noexcept { return capacity_; }
  BankStrategy strategy() const noexcept { return strategy_; }
  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t ticks() const noexcept { return tick_; }

  // Checkpoint records "memo/<class>/<slot>" (feature), ".../conf", ".../tick".
  void to_records(nn::TensorMap& out) const;
  static MemoryBank from_records(const nn::TensorMap& in, int capacity, BankStrategy strategy);

 private:
  int capacity_;
  BankStrategy strategy_;
  std::size_t dim_ = 0;
  std::uint64_t tick_ = 0;
  std::map<int, std::vector<BankEntry>> store_;
};

// Inserts every anchor, class by class in ascending row order, with its
// feature row copied (detached) from `features`.
MemoryBank memory_update(MemoryBank bank, const AnchorSet& anchors, const nn::Tensor& features);

// Negative set for class c: other present class centres, the vessel centre,
// and bank entries of other classes (as constants).
nn::Var negatives_for(int cls, const Centers& centers, const MemoryBank& bank, nn::Tape& tape);

// Structural contrastive loss averaged over classes that have anchors.
nn::Var scl_loss(nn::Var features, const AnchorSet& anchors, const Centers& centers, const MemoryBank& bank, const SclConfig& cfg);

}  // namespace vastopo::scl
