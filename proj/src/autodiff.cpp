#include "logicrec/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace logicrec {
namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

bool is_row_vector(const Tensor& t) { return t.rows == 1; }

}  // namespace

Tensor Tensor::vector(std::vector<double> values) {
  Tensor t;
  t.rows = 1;
  t.cols = values.size();
  t.data = std::move(values);
  return t;
}

double Tensor::item() const {
  if (data.size() != 1) throw ContractViolation(fmt::format("item() on a {}x{} tensor", rows, cols));
  return data[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.index >= nodes_.size()) throw ContractViolation("variable does not belong to this tape");
  return nodes_[v.index];
}

const Tensor& Tape::value(Var v) const {
  const Node& n = node(v);
  return n.op == Op::Param ? n.param->value : n.value;
}

const Tensor& Tape::grad(Var v) const { return node(v).grad; }

void Tape::shape_error(const char* op, Var a, Var b) const {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  throw ContractViolation(fmt::format("{}: incompatible shapes {}x{} and {}x{}", op, x.rows, x.cols, y.rows, y.cols));
}

Tensor& Tape::grad_slot(std::uint32_t index) {
  Node& n = nodes_[index];
  if (n.grad.size() == 0) {
    const Tensor& v = n.op == Op::Param ? n.param->value : n.value;
    n.grad = Tensor(v.rows, v.cols);
  }
  return n.grad;
}

Var Tape::constant(Tensor value) {
  Node n{Op::Constant, {}, std::move(value)};
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  Node n{Op::Param, {}, {}};
  n.param = &p;
  return push(std::move(n));
}

Var Tape::gather(Parameter& table, std::size_t row) {
  if (row >= table.value.rows) {
    throw ContractViolation(fmt::format("gather: row {} outside table '{}' with {} rows", row, table.name,
                                        table.value.rows));
  }
  Tensor v(1, table.value.cols);
  std::copy_n(table.value.data.begin() + static_cast<std::ptrdiff_t>(row * table.value.cols), table.value.cols,
              v.data.begin());
  Node n{Op::Gather, {}, std::move(v)};
  n.param = &table;
  n.aux = row;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (!x.same_shape(y)) shape_error("add", a, b);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += y.data[i];
  return push(Node{Op::Add, {a.index, b.index}, std::move(out)});
}

Var Tape::scale(Var a, double factor) {
  Tensor out = value(a);
  for (auto& v : out.data) v *= factor;
  Node n{Op::Scale, {a.index}, std::move(out)};
  n.scalar = factor;
  return push(std::move(n));
}

Var Tape::add_scalar(Var a, double offset) {
  Tensor out = value(a);
  for (auto& v : out.data) v += offset;
  return push(Node{Op::AddScalar, {a.index}, std::move(out)});
}

Var Tape::linear_combination(std::span<const Var> terms, std::span<const double> coefficients) {
  if (terms.empty() || terms.size() != coefficients.size()) {
    throw ContractViolation("linear_combination: need one coefficient per term");
  }
  const Tensor& first = value(terms[0]);
  Tensor out(first.rows, first.cols);
  Node n{Op::LinearCombination, {}, {}};
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const Tensor& x = value(terms[t]);
    if (!x.same_shape(first)) shape_error("linear_combination", terms[0], terms[t]);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += coefficients[t] * x.data[i];
    n.inputs.push_back(terms[t].index);
  }
  n.value = std::move(out);
  n.extra.assign(coefficients.begin(), coefficients.end());
  return push(std::move(n));
}

Var Tape::concat(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (!is_row_vector(x) || !is_row_vector(y)) shape_error("concat", a, b);
  Tensor out(1, x.cols + y.cols);
  std::copy(x.data.begin(), x.data.end(), out.data.begin());
  std::copy(y.data.begin(), y.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(x.cols));
  return push(Node{Op::Concat, {a.index, b.index}, std::move(out)});
}

Var Tape::slice(Var a, std::size_t offset, std::size_t length) {
  const Tensor& x = value(a);
  if (!is_row_vector(x) || offset + length > x.cols) {
    throw ContractViolation(fmt::format("slice: [{}, {}) outside a 1x{} vector", offset, offset + length, x.cols));
  }
  Tensor out(1, length);
  std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(offset), length, out.data.begin());
  Node n{Op::Slice, {a.index}, std::move(out)};
  n.aux = offset;
  return push(std::move(n));
}

Var Tape::stack_columns(std::span<const Var> vectors) {
  if (vectors.empty()) throw ContractViolation("stack_columns: no inputs");
  const Tensor& first = value(vectors[0]);
  const std::size_t n_rows = first.cols;
  Tensor out(n_rows, vectors.size());
  Node n{Op::StackColumns, {}, {}};
  for (std::size_t j = 0; j < vectors.size(); ++j) {
    const Tensor& v = value(vectors[j]);
    if (!is_row_vector(v) || v.cols != n_rows) shape_error("stack_columns", vectors[0], vectors[j]);
    for (std::size_t i = 0; i < n_rows; ++i) out.at(i, j) = v.data[i];
    n.inputs.push_back(vectors[j].index);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::column(Var m, std::size_t j) {
  const Tensor& x = value(m);
  if (j >= x.cols) throw ContractViolation(fmt::format("column: index {} outside {} columns", j, x.cols));
  Tensor out(1, x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out.data[i] = x.at(i, j);
  Node n{Op::Column, {m.index}, std::move(out)};
  n.aux = j;
  return push(std::move(n));
}

Var Tape::affine(Var weight, Var x) {
  const Tensor& w = value(weight);
  const Tensor& v = value(x);
  if (!is_row_vector(v) || w.rows != v.cols + 1) shape_error("affine", weight, x);
  Tensor out(1, w.cols);
  for (std::size_t o = 0; o < w.cols; ++o) out.data[o] = w.at(v.cols, o);
  for (std::size_t i = 0; i < v.cols; ++i) {
    const double xi = v.data[i];
    for (std::size_t o = 0; o < w.cols; ++o) out.data[o] += xi * w.at(i, o);
  }
  return push(Node{Op::Affine, {weight.index, x.index}, std::move(out)});
}

Var Tape::relu(Var a) {
  Tensor out = value(a);
  for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
  return push(Node{Op::Relu, {a.index}, std::move(out)});
}

Var Tape::softmax(Var a) {
  Tensor out = value(a);
  for (std::size_t r = 0; r < out.rows; ++r) {
    double* row = out.data.data() + r * out.cols;
    const double peak = *std::max_element(row, row + out.cols);
    double total = 0.0;
    for (std::size_t c = 0; c < out.cols; ++c) total += (row[c] = std::exp(row[c] - peak));
    for (std::size_t c = 0; c < out.cols; ++c) row[c] /= total;
  }
  return push(Node{Op::Softmax, {a.index}, std::move(out)});
}

Var Tape::elementwise_max(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (!x.same_shape(y)) shape_error("elementwise_max", a, b);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = x.data[i] >= y.data[i] ? x.data[i] : y.data[i];
  return push(Node{Op::Max, {a.index, b.index}, std::move(out)});
}

Var Tape::elementwise_mul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (!x.same_shape(y)) shape_error("elementwise_mul", a, b);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= y.data[i];
  return push(Node{Op::Mul, {a.index, b.index}, std::move(out)});
}

Var Tape::weighted_sum(Var weights, std::span<const Var> stack) {
  const Tensor& w = value(weights);
  if (!is_row_vector(w) || w.cols != stack.size() || stack.empty()) {
    throw ContractViolation(fmt::format("weighted_sum: {} weights for {} operands", w.cols, stack.size()));
  }
  const Tensor& first = value(stack[0]);
  Tensor out(first.rows, first.cols);
  Node n{Op::WeightedSum, {weights.index}, {}};
  for (std::size_t s = 0; s < stack.size(); ++s) {
    const Tensor& v = value(stack[s]);
    if (!v.same_shape(first)) shape_error("weighted_sum", stack[0], stack[s]);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += w.data[s] * v.data[i];
    n.inputs.push_back(stack[s].index);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::l1_distance(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (!x.same_shape(y)) shape_error("l1_distance", a, b);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += std::abs(x.data[i] - y.data[i]);
  return push(Node{Op::L1Distance, {a.index, b.index}, Tensor::scalar(total)});
}

Var Tape::sigmoid(Var a) {
  Tensor out = value(a);
  for (auto& v : out.data) v = stable_sigmoid(v);
  return push(Node{Op::Sigmoid, {a.index}, std::move(out)});
}

Var Tape::bce_loss(std::span<const Var> probs, std::span<const double> labels) {
  if (probs.empty() || probs.size() != labels.size()) {
    throw ContractViolation(fmt::format("bce_loss: {} probabilities for {} labels", probs.size(), labels.size()));
  }
  constexpr double kFloor = 1e-12;
  Node n{Op::Bce, {}, {}};
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const Node& src = node(probs[i]);
    if (value(probs[i]).size() != 1) throw ContractViolation("bce_loss: probabilities must be scalars");
    const double y = labels[i];
    if (src.op == Op::Sigmoid) {
      const double z = value(Var{src.inputs[0]}).item();
      total += softplus(z) - y * z;
    } else {
      const double p = std::clamp(value(probs[i]).item(), kFloor, 1.0 - kFloor);
      total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    n.inputs.push_back(probs[i].index);
  }
  n.value = Tensor::scalar(total / static_cast<double>(probs.size()));
  n.extra.assign(labels.begin(), labels.end());
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  double total = 0.0;
  for (double v : value(a).data) total += v;
  return push(Node{Op::Sum, {a.index}, Tensor::scalar(total)});
}

void Tape::backward(Var loss) {
  if (nodes_.empty()) throw ContractViolation("backward on an empty tape");
  if (value(loss).size() != 1) throw ContractViolation("backward needs a scalar loss");
  for (auto& n : nodes_) n.grad = Tensor();
  grad_slot(loss.index).data[0] = 1.0;

  for (std::uint32_t idx = loss.index + 1; idx-- > 0;) {
    if (nodes_[idx].grad.size() == 0) continue;
    // Inputs always precede their consumer, so `g` is never written below.
    const Tensor& g = nodes_[idx].grad;
    Node& n = nodes_[idx];
    switch (n.op) {
      case Op::Constant:
        break;
      case Op::Param: {
        auto& pg = n.param->grad;
        for (std::size_t i = 0; i < g.size(); ++i) pg.data[i] += g.data[i];
        break;
      }
      case Op::Gather: {
        auto& pg = n.param->grad;
        for (std::size_t i = 0; i < g.size(); ++i) pg.data[n.aux * pg.cols + i] += g.data[i];
        break;
      }
      case Op::Add:
        for (auto in : n.inputs) {
          Tensor& gi = grad_slot(in);
          for (std::size_t i = 0; i < g.size(); ++i) gi.data[i] += g.data[i];
        }
        break;
      case Op::Scale: {
        Tensor& gi = grad_slot(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gi.data[i] += n.scalar * g.data[i];
        break;
      }
      case Op::AddScalar: {
        Tensor& gi = grad_slot(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gi.data[i] += g.data[i];
        break;
      }
      case Op::LinearCombination:
        for (std::size_t t = 0; t < n.inputs.size(); ++t) {
          Tensor& gi = grad_slot(n.inputs[t]);
          for (std::size_t i = 0; i < g.size(); ++i) gi.data[i] += n.extra[t] * g.data[i];
        }
        break;
      case Op::Concat: {
        Tensor& ga = grad_slot(n.inputs[0]);
        Tensor& gb = grad_slot(n.inputs[1]);
        for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += g.data[i];
        for (std::size_t i = 0; i < gb.size(); ++i) gb.data[i] += g.data[ga.size() + i];
        break;
      }
      case Op::Slice: {
        Tensor& gi = grad_slot(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gi.data[n.aux + i] += g.data[i];
        break;
      }
      case Op::StackColumns:
        for (std::size_t j = 0; j < n.inputs.size(); ++j) {
          Tensor& gi = grad_slot(n.inputs[j]);
          for (std::size_t i = 0; i < g.rows; ++i) gi.data[i] += g.at(i, j);
        }
        break;
      case Op::Column: {
        Tensor& gi = grad_slot(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gi.at(i, n.aux) += g.data[i];
        break;
      }
      case Op::Affine: {
        const Tensor& w = value(Var{n.inputs[0]});
        const Tensor& x = value(Var{n.inputs[1]});
        Tensor& gw = grad_slot(n.inputs[0]);
        Tensor& gx = grad_slot(n.inputs[1]);
        for (std::size_t i = 0; i < x.cols; ++i) {
          double acc = 0.0;
          for (std::size_t o = 0; o < w.cols; ++o) {
            acc += w.at(i, o) * g.data[o];
            gw.at(i, o) += x.data[i] * g.data[o];
          }
          gx.data[i] += acc;
        }
        for (std::size_t o = 0; o < w.cols; ++o) gw.at(x.cols, o) += g.data[o];
        break;
      }
      case Op::Relu: {
        const Tensor& x = value(Var{n.inputs[0]});
        Tensor& gi = grad_slot(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gi.data[i] += x.data[i] > 0.0 ? g.data[i] : 0.0;
        break;
      }
      case Op::Softmax: {
        Tensor& gi = grad_slot(n.inputs[0]);
        const Tensor& y = n.value;
        for (std::size_t r = 0; r < y.rows; ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < y.cols; ++c) dot += g.at(r, c) * y.at(r, c);
          for (std::size_t c = 0; c < y.cols; ++c) gi.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
        }
        break;
      }
      case Op::Max: {
        const Tensor& x = value(Var{n.inputs[0]});
        const Tensor& y = value(Var{n.inputs[1]});
        Tensor& ga = grad_slot(n.inputs[0]);
        Tensor& gb = grad_slot(n.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) (x.data[i] >= y.data[i] ? ga : gb).data[i] += g.data[i];
        break;
      }
      case Op::Mul: {
        const Tensor& x = value(Var{n.inputs[0]});
        const Tensor& y = value(Var{n.inputs[1]});
        Tensor& ga = grad_slot(n.inputs[0]);
        Tensor& gb = grad_slot(n.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i] * y.data[i];
          gb.data[i] += g.data[i] * x.data[i];
        }
        break;
      }
      case Op::WeightedSum: {
        const Tensor& w = value(Var{n.inputs[0]});
        for (std::size_t s = 1; s < n.inputs.size(); ++s) {
          const Tensor& v = value(Var{n.inputs[s]});
          double dot = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) dot += g.data[i] * v.data[i];
          grad_slot(n.inputs[0]).data[s - 1] += dot;
          Tensor& gv = grad_slot(n.inputs[s]);
          for (std::size_t i = 0; i < g.size(); ++i) gv.data[i] += w.data[s - 1] * g.data[i];
        }
        break;
      }
      case Op::L1Distance: {
        const Tensor& x = value(Var{n.inputs[0]});
        const Tensor& y = value(Var{n.inputs[1]});
        Tensor& ga = grad_slot(n.inputs[0]);
        Tensor& gb = grad_slot(n.inputs[1]);
        const double up = g.data[0];
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double s = sign(x.data[i] - y.data[i]) * up;
          ga.data[i] += s;
          gb.data[i] -= s;
        }
        break;
      }
      case Op::Sigmoid: {
        Tensor& gi = grad_slot(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value.data[i];
          gi.data[i] += g.data[i] * y * (1.0 - y);
        }
        break;
      }
      case Op::Bce: {
        constexpr double kFloor = 1e-12;
        const double scale = g.data[0] / static_cast<double>(n.inputs.size());
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
          const Node& src = nodes_[n.inputs[i]];
          const double y = n.extra[i];
          if (src.op == Op::Sigmoid) {
            // d/dz [softplus(z) - y z] = sigmoid(z) - y, routed past the sigmoid node.
            const std::uint32_t logit = src.inputs[0];
            const double p = src.value.item();
            grad_slot(logit).data[0] += scale * (p - y);
          } else {
            const double p = value(Var{n.inputs[i]}).item();
            if (p <= kFloor || p >= 1.0 - kFloor) continue;
            grad_slot(n.inputs[i]).data[0] += scale * ((1.0 - y) / (1.0 - p) - y / p);
          }
        }
        break;
      }
      case Op::Sum: {
        Tensor& gi = grad_slot(n.inputs[0]);
        for (auto& v : gi.data) v += g.data[0];
        break;
      }
    }
  }
}

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const Parameter* p : params) {
      state.first_moment.emplace_back(p->value.rows, p->value.cols);
      state.second_moment.emplace_back(p->value.rows, p->value.cols);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ContractViolation("adam_step: parameter list changed between steps");
  }
  ++state.step;
  const auto& c = state.config;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    if (!m.same_shape(p.value) || !p.grad.same_shape(p.value)) {
      throw ContractViolation(fmt::format("adam_step: shape mismatch on '{}'", p.name));
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.data[i];
      m.data[i] = c.beta1 * m.data[i] + (1.0 - c.beta1) * g;
      v.data[i] = c.beta2 * v.data[i] + (1.0 - c.beta2) * g * g;
      const double m_hat = m.data[i] / correction1;
      const double v_hat = v.data[i] / correction2;
      p.value.data[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace logicrec
