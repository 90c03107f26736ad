#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vastopo/params.hpp"
#include "vastopo/tensor.hpp"

namespace vastopo::nn {

enum class Activation { Relu, Identity };

Var activate(Var x, Activation act);

// ---- MLP: Linear (+ReLU) ... Linear; params "<prefix>/w<i>", "<prefix>/b<i>".
void add_mlp_params(ParamStore& params, const std::string& prefix, const std::vector<int>& widths);
Var mlp_forward(ParamStore& params, const std::string& prefix, Var x, const std::vector<int>& widths);

// ---- GCN stack H <- act(A_hat H W), no bias; params "<prefix>/w<l>".
struct GcnConfig {
  std::vector<int> widths{32, 32, 32};  // d0 .. d, so layer count = widths.size() - 1
  Activation activation = Activation::Relu;
  bool activate_last = false;  // linear output layer keeps Z sign-unconstrained

  int layers() const noexcept { return static_cast<int>(widths.size()) - 1; }
};

void validate(const GcnConfig& cfg);
void add_gcn_params(ParamStore& params, const std::string& prefix, const GcnConfig& cfg);
Var gcn_forward(ParamStore& params, const std::string& prefix, const GcnConfig& cfg, Var x, Var norm_adj);

// ---- single-head cross-attention. Queries from f (T x d_f), keys/values
// from z (N x d): params "<prefix>/wq" (d_f x d_k), "<prefix>/wk" (d x d_k),
// "<prefix>/wv" (d x d_v).
void add_attention_params(ParamStore& params, const std::string& prefix, int query_dim, int kv_dim, int key_dim, int value_dim);

struct AttentionOutput {
  Var output;   // T x d_v
  Var weights;  // T x N, rows sum to 1
};

AttentionOutput cross_attention(ParamStore& params, const std::string& prefix, Var f, Var z);

// softmax(q k^T / sqrt(d_k) [+ bias]) v on already-projected tensors.
AttentionOutput attend(Var q, Var k, Var v);

// ---- finite-difference gradient check
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
};

// The objective records a scalar on the given tape, binding parameters from
// the store. It must be deterministic so it can be replayed per probe.
using Objective = std::function<Var(Tape&, ParamStore&)>;

// Compares recorded gradients against central differences for every entry
// of every parameter: |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
GradCheckReport grad_check(ParamStore& params, const Objective& f, double eps = 1e-5);

}  // namespace vastopo::nn
