#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "vastopo/error.hpp"
#include "vastopo/parallel.hpp"

namespace vastopo::nn {

// Dense row-major float64 array. Every op in this namespace works on rank-2
// tensors; scalars are 1x1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) { return Tensor({rows, cols}, fill); }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);
  static Tensor scalar(double v) { return Tensor({1, 1}, v); }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double item() const;

  // Gradient slot, populated for trainable parameters.
  bool requires_grad = false;
  std::vector<double> grad;

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  std::vector<std::size_t> shape_{1, 1};
  std::vector<double> data_ = std::vector<double>(1, 0.0);
};

std::string shape_string(const std::vector<std::size_t>& shape);

class Tape;

// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode recording. Each forward pass owns its tape; parameters are
// bound as leaves and receive accumulated gradients on backward().
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf bound to a parameter; backward() adds into param.grad.
  Var leaf(Tensor& param);

  Var record(Tensor value, std::vector<std::size_t> inputs, Backward backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Gradient buffer of an input node, or nullptr if it needs none.
  std::vector<double>* grad_of(std::size_t id);
  const std::vector<double>& grad(std::size_t id) const { return nodes_[id].grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 on a 1x1 node and propagates.
  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    std::vector<std::size_t> inputs;
    Backward backward;
    Tensor* param = nullptr;
    bool needs_grad = false;
  };
  std::deque<Node> nodes_;
};

// Dense kernels. The OpenMP variant splits output rows across threads and
// keeps every element's summation order, so results match Serial bitwise.
// c (n x m) (+)= op(a) * op(b), op(a) is n x k.
void gemm(std::span<const double> a, bool trans_a, std::span<const double> b, bool trans_b, std::span<double> c,
          std::size_t n, std::size_t k, std::size_t m, bool accumulate, Exec exec = Exec::Parallel);

// ---- differentiable ops ----
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_row(Var a, Var row);        // row is 1 x cols, broadcast over rows
Var scale(Var a, double c);
Var mul_scalar(Var a, Var s);       // s is 1 x 1
Var relu(Var a);
Var softmax_rows(Var a);            // subtracts the row max first
Var logsumexp_rows(Var a);          // rows x 1
Var normalize_rows(Var a);          // L2; a row norm below 1e-12 throws NumericError
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var mean_rows(Var a);               // 1 x cols
Var mean_all(Var a);                // 1 x 1
Var sum_all(Var a);                 // 1 x 1
Var reshape(Var a, std::size_t rows, std::size_t cols);
Var gather_rows(Var a, std::vector<std::size_t> index);
// Row-wise mean per segment; rows with segment < 0 are ignored and empty
// segments yield zero rows.
Var segment_mean(Var a, std::span<const int> segment, std::size_t segments);
// Mean over rows of -log softmax(logits)[label].
Var cross_entropy(Var logits, std::span<const int> labels);

inline constexpr double kNormFloor = 1e-12;

}  // namespace vastopo::nn
