#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "logicrec/common.hpp"

namespace logicrec {

/// Dense row-major matrix of doubles, rank <= 2. Vectors are 1 x n.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  static Tensor vector(std::vector<double> values);
  static Tensor scalar(double v) { return Tensor(1, 1, v); }

  std::size_t size() const noexcept { return data.size(); }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double item() const;
  bool same_shape(const Tensor& o) const noexcept { return rows == o.rows && cols == o.cols; }
  bool all_finite() const noexcept;
  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// A learnable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols) {}
  void zero_grad() { grad.fill(0.0); }
};

/// Handle to a node on a Tape.
struct Var {
  std::uint32_t index = 0;
};

/// Reverse-mode record over a closed operation vocabulary.
///
/// Subgradient conventions: relu'(0) = 0, sign(0) = 0 in l1_distance, and
/// elementwise_max routes ties to its first operand.
class Tape {
public:
  Var constant(Tensor value);
  /// Whole parameter as a leaf; gradients accumulate into `p.grad`.
  Var param(Parameter& p);
  /// Row `row` of an embedding table as a 1 x cols vector; backward scatters
  /// into that row only.
  Var gather(Parameter& table, std::size_t row);

  Var add(Var a, Var b);
  Var scale(Var a, double factor);
  Var add_scalar(Var a, double offset);
  /// sum_i coefficients[i] * terms[i]; all terms share one shape.
  Var linear_combination(std::span<const Var> terms, std::span<const double> coefficients);
  Var concat(Var a, Var b);
  Var slice(Var a, std::size_t offset, std::size_t length);
  /// k vectors of length n -> n x k matrix whose column j is vectors[j].
  Var stack_columns(std::span<const Var> vectors);
  Var column(Var m, std::size_t j);
  /// x (1 x d_in) times weight ((d_in + 1) x d_out); the last weight row is the bias.
  Var affine(Var weight, Var x);
  Var relu(Var a);
  Var softmax(Var a);
  Var elementwise_max(Var a, Var b);
  Var elementwise_mul(Var a, Var b);
  /// sum_s weights[s] * stack[s]; weights is 1 x k.
  Var weighted_sum(Var weights, std::span<const Var> stack);
  Var l1_distance(Var a, Var b);
  Var sigmoid(Var a);
  /// Mean binary cross-entropy of scalar probabilities against 0/1 labels.
  /// Probabilities produced by sigmoid() are evaluated from their logits.
  Var bce_loss(std::span<const Var> probs, std::span<const double> labels);
  Var sum(Var a);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  /// Accumulates d(loss)/d(param) into every reachable Parameter::grad.
  void backward(Var loss);

private:
  enum class Op {
    Constant, Param, Gather, Add, Scale, AddScalar, LinearCombination, Concat, Slice, StackColumns,
    Column, Affine, Relu, Softmax, Max, Mul, WeightedSum, L1Distance, Sigmoid, Bce, Sum
  };

  struct Node {
    Op op;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    Tensor grad;
    Parameter* param = nullptr;
    std::size_t aux = 0;
    double scalar = 0.0;
    std::vector<double> extra;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  [[noreturn]] void shape_error(const char* op, Var a, Var b) const;
  Tensor& grad_slot(std::uint32_t index);

  std::vector<Node> nodes_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moments are shaped like their parameters, in the order of the parameter
/// list passed on the first step.
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

/// One bias-corrected Adam update from the gradients stored in `params`.
void adam_step(std::span<Parameter* const> params, AdamState& state);

}  // namespace logicrec
