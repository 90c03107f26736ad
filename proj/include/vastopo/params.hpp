#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "vastopo/tensor.hpp"

namespace vastopo::nn {

// Xavier: uniform in +-sqrt(6 / (rows + cols)). Embedding: uniform in +-0.5.
enum class Init { Zeros, Ones, Xavier, Embedding };

// Named trainable tensors plus Adam moment state. Iteration order is
// alphabetical by name.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  // Registers a parameter; values are drawn from a stream keyed by
  // (seed, name) so adding a parameter never perturbs the others.
  Tensor& add(const std::string& name, std::vector<std::size_t> shape, Init init = Init::Xavier);
  Tensor& add_constant(const std::string& name, std::vector<std::size_t> shape, double value);

  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::vector<std::string> names() const;
  std::size_t parameter_count() const;

  Var bind(Tape& tape, const std::string& name) { return tape.leaf(get(name)); }

  void zero_grad();

  std::uint64_t seed() const noexcept { return seed_; }
  long adam_steps() const noexcept { return steps_; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  friend void adam_step(ParamStore&, double, double, double, double);

  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  std::uint64_t seed_;
  long steps_ = 0;
  std::map<std::string, Tensor> params_;
  std::map<std::string, Moments> moments_;
};

// Adam with bias correction. Every parameter must carry a gradient.
void adam_step(ParamStore& params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// ---- VGNP container ----
//   "VGNP1\n" then, per record in alphabetical name order,
//   "<name>\n<e0,e1,...>\n" + little-endian f64 payload.
using TensorMap = std::map<std::string, Tensor>;

void write_vgnp(std::ostream& out, const TensorMap& records);
TensorMap read_vgnp(std::istream& in);
void save_vgnp(const TensorMap& records, const std::filesystem::path& path);
TensorMap load_vgnp(const std::filesystem::path& path);

TensorMap snapshot(const ParamStore& params);
// Copies matching records into the store; a missing name or a shape change
// is an error.
void restore(ParamStore& params, const TensorMap& records);

}  // namespace vastopo::nn
