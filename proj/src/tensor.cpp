#include "vastopo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vastopo::nn {

// ---------------------------------------------------------------- Tensor

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  std::size_t n = 1;
  for (auto e : shape_) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape_));
    n *= e;
  }
  if (shape_.empty()) throw ShapeError("tensor needs at least one extent");
  data_.assign(n, fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data) : Tensor(std::move(shape)) {
  if (data.size() != data_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " + shape_string(shape_));
  }
  data_ = std::move(data);
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged rows in Tensor::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::size_t Tensor::rows() const {
  if (shape_.size() != 2) throw ShapeError("expected a matrix, got shape " + shape_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() != 2) throw ShapeError("expected a matrix, got shape " + shape_string(shape_));
  return shape_[1];
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// ---------------------------------------------------------------- Tape

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  value.requires_grad = false;
  value.grad.clear();
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor& param) {
  Tensor copy(param.shape(), param.data());
  nodes_.push_back(Node{std::move(copy), {}, {}, {}, &param, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, Backward backward) {
  for (double v : value.data()) {
    if (!std::isfinite(v)) throw NumericError("non-finite value produced by a forward op");
  }
  bool needs = false;
  for (auto i : inputs) needs = needs || nodes_[i].needs_grad;
  if (!needs) backward = nullptr;
  nodes_.push_back(Node{std::move(value), {}, std::move(inputs), std::move(backward), nullptr, needs});
  return Var(this, nodes_.size() - 1);
}

std::vector<double>* Tape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return nullptr;
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return &n.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ValueError("backward: variable belongs to another tape");
  Node& root = nodes_[loss.id()];
  if (root.value.size() != 1) throw ShapeError("backward needs a scalar, got " + shape_string(root.value.shape()));
  if (!root.needs_grad) return;
  root.grad.assign(1, 1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param) {
      auto& g = n.param->grad;
      if (g.size() != n.grad.size()) g.assign(n.grad.size(), 0.0);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
  }
}

// ---------------------------------------------------------------- kernels

void gemm(std::span<const double> a, bool trans_a, std::span<const double> b, bool trans_b, std::span<double> c,
          std::size_t n, std::size_t k, std::size_t m, bool accumulate, Exec exec) {
  auto row = [&](std::size_t i) {
    double* ci = c.data() + i * m;
    if (!accumulate) std::fill(ci, ci + m, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = trans_a ? a[p * n + i] : a[i * k + p];
      if (aip == 0.0) continue;
      if (trans_b) {
        for (std::size_t j = 0; j < m; ++j) ci[j] += aip * b[j * k + p];
      } else {
        const double* bp = b.data() + p * m;
        for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
      }
    }
  };
  if (exec == Exec::Serial) {
    for (std::size_t i = 0; i < n; ++i) row(i);
    return;
  }
  const auto rows = static_cast<long long>(n);
#pragma omp parallel for schedule(static) if (n * k * m > 32768)
  for (long long i = 0; i < rows; ++i) row(static_cast<std::size_t>(i));
}

// ---------------------------------------------------------------- ops

namespace {

void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ValueError("variables recorded on different tapes");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows()) {
    throw ShapeError("matmul: shape mismatch " + shape_string(A.shape()) + " vs " + shape_string(B.shape()));
  }
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor C = Tensor::matrix(n, m);
  gemm(A.data(), false, B.data(), false, C.data(), n, k, m, false);
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(C), {ia, ib}, [ia, ib, n, k, m](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (auto* ga = t.grad_of(ia)) gemm(g, false, t.value(ib).data(), true, *ga, n, m, k, true);
    if (auto* gb = t.grad_of(ib)) gemm(t.value(ia).data(), true, g, false, *gb, k, n, m, true);
  });
}

Var transpose(Var a) {
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor T = Tensor::matrix(c, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) T(j, i) = A(i, j);
  const auto ia = a.id();
  return a.tape().record(std::move(T), {ia}, [ia, r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = *t.grad_of(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

namespace {

Var add_signed(Var a, Var b, double sign, const char* name) {
  require_same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_same_shape(A, B, name);
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.data()[i] += sign * B.data()[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(C), {ia, ib}, [ia, ib, sign](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (auto* ga = t.grad_of(ia))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    if (auto* gb = t.grad_of(ib))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += sign * g[i];
  });
}

}  // namespace

Var add(Var a, Var b) { return add_signed(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_signed(a, b, -1.0, "sub"); }

Var add_row(Var a, Var row) {
  require_same_tape(a, row);
  const Tensor& A = a.value();
  const Tensor& R = row.value();
  if (R.rows() != 1 || R.cols() != A.cols()) {
    throw ShapeError("add_row: shape mismatch " + shape_string(A.shape()) + " vs " + shape_string(R.shape()));
  }
  const std::size_t r = A.rows(), c = A.cols();
  Tensor C = A;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) C(i, j) += R(0, j);
  const auto ia = a.id(), ir = row.id();
  return a.tape().record(std::move(C), {ia, ir}, [ia, ir, r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (auto* ga = t.grad_of(ia))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    if (auto* gr = t.grad_of(ir))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*gr)[j] += g[i * c + j];
  });
}

Var scale(Var a, double factor) {
  Tensor C = a.value();
  for (double& v : C.data()) v *= factor;
  const auto ia = a.id();
  return a.tape().record(std::move(C), {ia}, [ia, factor](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = *t.grad_of(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Var mul_scalar(Var a, Var s) {
  require_same_tape(a, s);
  if (s.value().size() != 1) throw ShapeError("mul_scalar: scalar expected, got " + shape_string(s.value().shape()));
  const double k = s.value().item();
  Tensor C = a.value();
  for (double& v : C.data()) v *= k;
  const auto ia = a.id(), is = s.id();
  return a.tape().record(std::move(C), {ia, is}, [ia, is](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& A = t.value(ia).data();
    const double kk = t.value(is).item();
    if (auto* ga = t.grad_of(ia))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += kk * g[i];
    if (auto* gs = t.grad_of(is)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * A[i];
      (*gs)[0] += acc;
    }
  });
}

Var relu(Var a) {
  Tensor C = a.value();
  for (double& v : C.data()) v = v > 0.0 ? v : 0.0;
  const auto ia = a.id();
  return a.tape().record(std::move(C), {ia}, [ia](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& A = t.value(ia).data();
    auto& ga = *t.grad_of(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (A[i] > 0.0) ga[i] += g[i];
  });
}

Var softmax_rows(Var a) {
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor Y = Tensor::matrix(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double mx = A(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, A(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += (Y(i, j) = std::exp(A(i, j) - mx));
    for (std::size_t j = 0; j < c; ++j) Y(i, j) /= sum;
  }
  const auto ia = a.id();
  return a.tape().record(std::move(Y), {ia}, [ia, r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self).data();
    auto& ga = *t.grad_of(ia);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
    }
  });
}

Var logsumexp_rows(Var a) {
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor L = Tensor::matrix(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    double mx = A(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, A(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(A(i, j) - mx);
    L(i, 0) = mx + std::log(sum);
  }
  const auto ia = a.id();
  return a.tape().record(std::move(L), {ia}, [ia, r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& l = t.value(self).data();
    const auto& A = t.value(ia).data();
    auto& ga = *t.grad_of(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i] * std::exp(A[i * c + j] - l[i]);
  });
}

Var normalize_rows(Var a) {
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor Y = A;
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += A(i, j) * A(i, j);
    norms[i] = std::sqrt(s);
    if (norms[i] < kNormFloor) throw NumericError("normalize_rows: row " + std::to_string(i) + " has near-zero norm");
    for (std::size_t j = 0; j < c; ++j) Y(i, j) /= norms[i];
  }
  const auto ia = a.id();
  return a.tape().record(std::move(Y), {ia}, [ia, r, c, norms = std::move(norms)](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self).data();
    auto& ga = *t.grad_of(ia);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += y[i * c + j] * g[i * c + j];
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += (g[i * c + j] - y[i * c + j] * dot) / norms[i];
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t r = 0;
  std::vector<std::size_t> ids;
  std::vector<double> data;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p);
    if (p.cols() != c) {
      throw ShapeError("concat_rows: shape mismatch " + shape_string(parts[0].value().shape()) + " vs " +
                       shape_string(p.value().shape()));
    }
    r += p.rows();
    ids.push_back(p.id());
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  }
  return parts[0].tape().record(Tensor({r, c}, std::move(data)), ids, [ids](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    std::size_t offset = 0;
    for (auto id : ids) {
      const std::size_t n = t.value(id).size();
      if (auto* gi = t.grad_of(id))
        for (std::size_t k = 0; k < n; ++k) (*gi)[k] += g[offset + k];
      offset += n;
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::size_t c = 0;
  std::vector<std::size_t> ids, widths;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p);
    if (p.rows() != r) {
      throw ShapeError("concat_cols: shape mismatch " + shape_string(parts[0].value().shape()) + " vs " +
                       shape_string(p.value().shape()));
    }
    ids.push_back(p.id());
    widths.push_back(p.cols());
    c += p.cols();
  }
  Tensor C = Tensor::matrix(r, c);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& P = parts[k].value();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) C(i, off + j) = P(i, j);
    off += widths[k];
  }
  return parts[0].tape().record(std::move(C), ids, [ids, widths, r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (auto* gi = t.grad_of(ids[k]))
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) (*gi)[i * widths[k] + j] += g[i * c + off + j];
      off += widths[k];
    }
  });
}

Var mean_rows(Var a) {
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor M = Tensor::matrix(1, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) M(0, j) += A(i, j);
  for (double& v : M.data()) v /= static_cast<double>(r);
  const auto ia = a.id();
  return a.tape().record(std::move(M), {ia}, [ia, r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = *t.grad_of(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j] / static_cast<double>(r);
  });
}

Var sum_all(Var a) {
  const auto& A = a.value().data();
  const double s = std::accumulate(A.begin(), A.end(), 0.0);
  const auto ia = a.id();
  return a.tape().record(Tensor::scalar(s), {ia}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (double& v : *t.grad_of(ia)) v += g;
  });
}

Var mean_all(Var a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.value().size())); }

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  const Tensor& A = a.value();
  if (rows * cols != A.size()) {
    throw ShapeError("reshape: shape mismatch " + shape_string(A.shape()) + " vs " + shape_string({rows, cols}));
  }
  const auto ia = a.id();
  return a.tape().record(Tensor({rows, cols}, A.data()), {ia}, [ia](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = *t.grad_of(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var gather_rows(Var a, std::vector<std::size_t> index) {
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  if (index.empty()) throw ShapeError("gather_rows: empty index");
  Tensor G = Tensor::matrix(index.size(), c);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= r) throw ShapeError("gather_rows: row " + std::to_string(index[i]) + " out of range for " + shape_string(A.shape()));
    std::copy_n(A.data().begin() + static_cast<std::ptrdiff_t>(index[i] * c), c, G.data().begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  const auto ia = a.id();
  return a.tape().record(std::move(G), {ia}, [ia, c, index = std::move(index)](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = *t.grad_of(ia);
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) ga[index[i] * c + j] += g[i * c + j];
  });
}

Var segment_mean(Var a, std::span<const int> segment, std::size_t segments) {
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  if (segment.size() != r) {
    throw ShapeError("segment_mean: " + std::to_string(segment.size()) + " segment ids for " + shape_string(A.shape()));
  }
  std::vector<double> counts(segments, 0.0);
  Tensor M = Tensor::matrix(segments, c);
  for (std::size_t i = 0; i < r; ++i) {
    const int s = segment[i];
    if (s < 0) continue;
    if (static_cast<std::size_t>(s) >= segments) throw ShapeError("segment_mean: segment id out of range");
    counts[s] += 1.0;
    for (std::size_t j = 0; j < c; ++j) M(s, j) += A(i, j);
  }
  for (std::size_t s = 0; s < segments; ++s)
    if (counts[s] > 0)
      for (std::size_t j = 0; j < c; ++j) M(s, j) /= counts[s];
  std::vector<int> seg(segment.begin(), segment.end());
  const auto ia = a.id();
  return a.tape().record(std::move(M), {ia}, [ia, c, seg = std::move(seg), counts = std::move(counts)](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = *t.grad_of(ia);
    for (std::size_t i = 0; i < seg.size(); ++i) {
      if (seg[i] < 0) continue;
      const auto s = static_cast<std::size_t>(seg[i]);
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[s * c + j] / counts[s];
    }
  });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& A = logits.value();
  const std::size_t r = A.rows(), c = A.cols();
  if (labels.size() != r) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " + shape_string(A.shape()));
  }
  Tensor P = Tensor::matrix(r, c);
  double loss = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) throw ValueError("cross_entropy: label out of range");
    double mx = A(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, A(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += (P(i, j) = std::exp(A(i, j) - mx));
    for (std::size_t j = 0; j < c; ++j) P(i, j) /= sum;
    loss += mx + std::log(sum) - A(i, static_cast<std::size_t>(labels[i]));
  }
  loss /= static_cast<double>(r);
  std::vector<int> lab(labels.begin(), labels.end());
  const auto ia = logits.id();
  return logits.tape().record(Tensor::scalar(loss), {ia},
                              [ia, r, c, lab = std::move(lab), P = std::move(P)](Tape& t, std::size_t self) {
                                const double g = t.grad(self)[0] / static_cast<double>(r);
                                auto& ga = *t.grad_of(ia);
                                for (std::size_t i = 0; i < r; ++i)
                                  for (std::size_t j = 0; j < c; ++j)
                                    ga[i * c + j] += g * (P(i, j) - (static_cast<int>(j) == lab[i] ? 1.0 : 0.0));
                              });
}

}  // namespace vastopo::nn
