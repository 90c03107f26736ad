#include "vastopo/nn.hpp"

#include <algorithm>
#include <cmath>

namespace vastopo::nn {

Var activate(Var x, Activation act) { return act == Activation::Relu ? relu(x) : x; }

void add_mlp_params(ParamStore& params, const std::string& prefix, const std::vector<int>& widths) {
  if (widths.size() < 2) throw ValueError("mlp needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (widths[i] < 1 || widths[i + 1] < 1) throw ValueError("mlp widths must be >= 1");
    const auto in = static_cast<std::size_t>(widths[i]), out = static_cast<std::size_t>(widths[i + 1]);
    params.add(prefix + "/w" + std::to_string(i), {in, out}, Init::Xavier);
    params.add(prefix + "/b" + std::to_string(i), {1, out}, Init::Zeros);
  }
}

Var mlp_forward(ParamStore& params, const std::string& prefix, Var x, const std::vector<int>& widths) {
  if (widths.size() < 2) throw ValueError("mlp needs at least input and output widths");
  if (x.cols() != static_cast<std::size_t>(widths[0])) {
    throw ShapeError("mlp_forward: input has " + std::to_string(x.cols()) + " columns, widths[0] = " + std::to_string(widths[0]));
  }
  Tape& t = x.tape();
  Var h = x;
  const std::size_t layers = widths.size() - 1;
  for (std::size_t i = 0; i < layers; ++i) {
    h = add_row(matmul(h, params.bind(t, prefix + "/w" + std::to_string(i))), params.bind(t, prefix + "/b" + std::to_string(i)));
    if (i + 1 < layers) h = relu(h);
  }
  return h;
}

void validate(const GcnConfig& cfg) {
  if (cfg.layers() < 1) throw ValueError("gcn needs at least one layer (widths length >= 2)");
  for (int w : cfg.widths)
    if (w < 1) throw ValueError("gcn widths must be >= 1");
}

void add_gcn_params(ParamStore& params, const std::string& prefix, const GcnConfig& cfg) {
  validate(cfg);
  for (int l = 0; l < cfg.layers(); ++l) {
    params.add(prefix + "/w" + std::to_string(l),
               {static_cast<std::size_t>(cfg.widths[l]), static_cast<std::size_t>(cfg.widths[l + 1])}, Init::Xavier);
  }
}

Var gcn_forward(ParamStore& params, const std::string& prefix, const GcnConfig& cfg, Var x, Var norm_adj) {
  validate(cfg);
  const std::size_t n = x.rows();
  if (norm_adj.rows() != n || norm_adj.cols() != n) {
    throw ShapeError("gcn_forward: shape mismatch " + shape_string(norm_adj.value().shape()) + " vs " + shape_string(x.value().shape()));
  }
  if (x.cols() != static_cast<std::size_t>(cfg.widths[0])) {
    throw ShapeError("gcn_forward: features have " + std::to_string(x.cols()) + " columns, widths[0] = " + std::to_string(cfg.widths[0]));
  }
  Tape& t = x.tape();
  Var h = x;
  for (int l = 0; l < cfg.layers(); ++l) {
    h = matmul(norm_adj, matmul(h, params.bind(t, prefix + "/w" + std::to_string(l))));
    const bool last = l + 1 == cfg.layers();
    if (!last || cfg.activate_last) h = activate(h, cfg.activation);
  }
  return h;
}

void add_attention_params(ParamStore& params, const std::string& prefix, int query_dim, int kv_dim, int key_dim, int value_dim) {
  if (query_dim < 1 || kv_dim < 1 || key_dim < 1 || value_dim < 1) throw ValueError("attention dims must be >= 1");
  const auto q = static_cast<std::size_t>(query_dim), kv = static_cast<std::size_t>(kv_dim);
  const auto dk = static_cast<std::size_t>(key_dim), dv = static_cast<std::size_t>(value_dim);
  params.add(prefix + "/wq", {q, dk}, Init::Xavier);
  params.add(prefix + "/wk", {kv, dk}, Init::Xavier);
  params.add(prefix + "/wv", {kv, dv}, Init::Xavier);
}

AttentionOutput attend(Var q, Var k, Var v) {
  if (q.cols() != k.cols()) {
    throw ShapeError("attention: query/key shape mismatch " + shape_string(q.value().shape()) + " vs " + shape_string(k.value().shape()));
  }
  if (k.rows() != v.rows()) {
    throw ShapeError("attention: key/value shape mismatch " + shape_string(k.value().shape()) + " vs " + shape_string(v.value().shape()));
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Var w = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt));
  return {matmul(w, v), w};
}

AttentionOutput cross_attention(ParamStore& params, const std::string& prefix, Var f, Var z) {
  Tape& t = f.tape();
  Var wq = params.bind(t, prefix + "/wq");
  Var wk = params.bind(t, prefix + "/wk");
  Var wv = params.bind(t, prefix + "/wv");
  if (f.cols() != wq.rows()) {
    throw ShapeError("cross_attention: shape mismatch " + shape_string(f.value().shape()) + " vs W_Q " + shape_string(wq.value().shape()));
  }
  if (z.cols() != wk.rows() || z.cols() != wv.rows()) {
    throw ShapeError("cross_attention: shape mismatch " + shape_string(z.value().shape()) + " vs W_K " + shape_string(wk.value().shape()));
  }
  return attend(matmul(f, wq), matmul(z, wk), matmul(z, wv));
}

GradCheckReport grad_check(ParamStore& params, const Objective& f, double eps) {
  params.zero_grad();
  {
    Tape tape;
    Var loss = f(tape, params);
    if (!std::isfinite(loss.value().item())) throw NumericError("grad_check: objective is not finite");
    tape.backward(loss);
  }
  auto evaluate = [&] {
    Tape tape;
    const double v = f(tape, params).value().item();
    if (!std::isfinite(v)) throw NumericError("grad_check: objective is not finite at a probe point");
    return v;
  };

  GradCheckReport rep;
  for (auto& [name, t] : params) {
    const std::vector<double> analytic = t.grad;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double orig = t.data()[i];
      t.data()[i] = orig + eps;
      const double up = evaluate();
      t.data()[i] = orig - eps;
      const double down = evaluate();
      t.data()[i] = orig;
      const double fd = (up - down) / (2.0 * eps);
      const double ad = analytic.empty() ? 0.0 : analytic[i];
      const double rel = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
      ++rep.entries_checked;
      if (rel > rep.max_rel_error || rep.worst_param.empty()) {
        rep.max_rel_error = rel;
        rep.worst_param = name;
        rep.worst_index = i;
      }
    }
  }
  return rep;
}

}  // namespace vastopo::nn
