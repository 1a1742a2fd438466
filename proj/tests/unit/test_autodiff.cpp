#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "logicrec/autodiff.hpp"
#include "support/test_support.hpp"

using namespace logicrec;
using logicrec::testing::central_difference_check;

namespace {

Parameter random_param(const std::string& name, std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(rows, cols);
  for (auto& v : t.data) v = u(rng);
  return Parameter(name, t);
}

// Builds the graph once for the analytic gradient, then reruns it for every
// finite-difference probe.
double check(std::vector<Parameter*> params, const std::function<Var(Tape&)>& build) {
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(build(tape));
  }
  auto loss = [&] {
    Tape tape;
    return tape.value(build(tape)).item();
  };
  return central_difference_check(params, loss).max_rel_error;
}

// Contracts a tensor-valued node to a scalar with fixed random weights so
// every output element contributes a distinct gradient.
Var contract(Tape& tape, Var v) {
  const Tensor& x = tape.value(v);
  Tensor w(x.rows, x.cols);
  for (std::size_t i = 0; i < w.size(); ++i) w.data[i] = std::sin(1.0 + static_cast<double>(i));
  return tape.sum(tape.elementwise_mul(v, tape.constant(w)));
}

constexpr double kTol = 1e-7;

}  // namespace

TEST(Autodiff, ElementwiseOps) {
  auto a = random_param("a", 1, 5, 1);
  auto b = random_param("b", 1, 5, 2);
  EXPECT_LT(check({&a, &b}, [&](Tape& t) { return contract(t, t.add(t.param(a), t.param(b))); }), kTol);
  EXPECT_LT(check({&a}, [&](Tape& t) { return contract(t, t.scale(t.param(a), -2.5)); }), kTol);
  EXPECT_LT(check({&a}, [&](Tape& t) { return contract(t, t.add_scalar(t.param(a), 3.0)); }), kTol);
  EXPECT_LT(check({&a, &b}, [&](Tape& t) { return contract(t, t.elementwise_mul(t.param(a), t.param(b))); }), kTol);
  EXPECT_LT(check({&a, &b}, [&](Tape& t) { return contract(t, t.elementwise_max(t.param(a), t.param(b))); }), kTol);
  EXPECT_LT(check({&a}, [&](Tape& t) { return contract(t, t.relu(t.param(a))); }), kTol);
  EXPECT_LT(check({&a}, [&](Tape& t) { return contract(t, t.softmax(t.param(a))); }), kTol);
  EXPECT_LT(check({&a, &b}, [&](Tape& t) { return t.l1_distance(t.param(a), t.param(b)); }), kTol);
  EXPECT_LT(check({&a}, [&](Tape& t) { return contract(t, t.sigmoid(t.param(a))); }), kTol);
}

TEST(Autodiff, StructuralOps) {
  auto a = random_param("a", 1, 4, 3);
  auto b = random_param("b", 1, 3, 4);
  auto c = random_param("c", 1, 4, 5);
  EXPECT_LT(check({&a, &b}, [&](Tape& t) { return contract(t, t.concat(t.param(a), t.param(b))); }), kTol);
  EXPECT_LT(check({&a}, [&](Tape& t) { return contract(t, t.slice(t.param(a), 1, 2)); }), kTol);
  EXPECT_LT(check({&a, &c},
                  [&](Tape& t) {
                    const Var cols[] = {t.param(a), t.param(c)};
                    Var m = t.softmax(t.stack_columns(cols));
                    return contract(t, t.add(t.column(m, 0), t.scale(t.column(m, 1), 3.0)));
                  }),
            kTol);
  EXPECT_LT(check({&a, &c},
                  [&](Tape& t) {
                    const Var terms[] = {t.param(a), t.param(c)};
                    const double coef[] = {0.3, -1.7};
                    return contract(t, t.linear_combination(terms, coef));
                  }),
            kTol);
}

TEST(Autodiff, AffineAndMixing) {
  auto x = random_param("x", 1, 3, 6);
  auto w = random_param("w", 4, 2, 7);
  EXPECT_LT(check({&x, &w}, [&](Tape& t) { return contract(t, t.affine(t.param(w), t.param(x))); }), kTol);
  auto g = random_param("g", 1, 3, 8);
  auto e0 = random_param("e0", 1, 4, 9);
  auto e1 = random_param("e1", 1, 4, 10);
  auto e2 = random_param("e2", 1, 4, 11);
  EXPECT_LT(check({&g, &e0, &e1, &e2},
                  [&](Tape& t) {
                    const Var stack[] = {t.param(e0), t.param(e1), t.param(e2)};
                    return contract(t, t.weighted_sum(t.softmax(t.param(g)), stack));
                  }),
            kTol);
}

TEST(Autodiff, GatherScattersIntoRow) {
  auto table = random_param("table", 5, 3, 12);
  table.zero_grad();
  Tape tape;
  Var r = tape.gather(table, 2);
  tape.backward(tape.sum(tape.add(r, tape.gather(table, 2))));
  for (std::size_t row = 0; row < 5; ++row) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(table.grad.at(row, c), row == 2 ? 2.0 : 0.0);
  }
  EXPECT_LT(check({&table}, [&](Tape& t) { return t.l1_distance(t.gather(table, 1), t.gather(table, 4)); }), kTol);
}

TEST(Autodiff, BceFromLogitsAndPlainProbabilities) {
  auto z = random_param("z", 1, 1, 13);
  auto z2 = random_param("z2", 1, 1, 14);
  EXPECT_LT(check({&z, &z2},
                  [&](Tape& t) {
                    const Var p[] = {t.sigmoid(t.param(z)), t.sigmoid(t.param(z2))};
                    const double y[] = {1.0, 0.0};
                    return t.bce_loss(p, y);
                  }),
            kTol);
  // Probability not produced by a sigmoid node: the clamped log path.
  auto q = Parameter("q", Tensor::scalar(0.3));
  EXPECT_LT(check({&q},
                  [&](Tape& t) {
                    const Var p[] = {t.param(q)};
                    const double y[] = {1.0};
                    return t.bce_loss(p, y);
                  }),
            kTol);
}

TEST(Autodiff, SigmoidValues) {
  Tape t;
  EXPECT_NEAR(t.value(t.sigmoid(t.constant(Tensor::scalar(2.0)))).item(), 0.8807970779778823, 1e-12);
  EXPECT_EQ(t.value(t.sigmoid(t.constant(Tensor::scalar(0.0)))).item(), 0.5);
  // Large magnitudes stay finite.
  EXPECT_EQ(t.value(t.sigmoid(t.constant(Tensor::scalar(-1000.0)))).item(), 0.0);
  EXPECT_EQ(t.value(t.sigmoid(t.constant(Tensor::scalar(1000.0)))).item(), 1.0);
  const Var p[] = {t.sigmoid(t.constant(Tensor::scalar(-800.0)))};
  const double y[] = {1.0};
  EXPECT_NEAR(t.value(t.bce_loss(p, y)).item(), 800.0, 1e-9);
}

TEST(Autodiff, SubgradientConventions) {
  Parameter a("a", Tensor::vector({0.0, 1.0}));
  Parameter b("b", Tensor::vector({0.0, 1.0}));
  Tape t;
  t.backward(t.sum(t.add(t.relu(t.param(a)), t.elementwise_max(t.param(a), t.param(b)))));
  // relu'(0) = 0; max ties go to the first operand.
  EXPECT_EQ(a.grad.data, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(b.grad.data, (std::vector<double>{0.0, 0.0}));
  a.zero_grad();
  b.zero_grad();
  Tape t2;
  t2.backward(t2.l1_distance(t2.param(a), t2.param(b)));
  EXPECT_EQ(a.grad.data, (std::vector<double>{0.0, 0.0}));
}

TEST(Autodiff, SoftmaxRowsSumToOne) {
  auto m = random_param("m", 4, 6, 15);
  for (auto& v : m.value.data) v *= 50.0;
  Tape t;
  const Tensor& s = t.value(t.softmax(t.param(m)));
  for (std::size_t r = 0; r < s.rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < s.cols; ++c) total += s.at(r, c);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Autodiff, Contracts) {
  Tape t;
  EXPECT_THROW(t.backward(Var{0}), ContractViolation);
  Var v = t.constant(Tensor::vector({1.0, 2.0}));
  EXPECT_THROW(t.backward(v), ContractViolation);
  EXPECT_THROW(t.add(v, t.constant(Tensor::vector({1.0}))), ContractViolation);
  const Var p[] = {t.constant(Tensor::scalar(0.5))};
  const double y[] = {1.0, 0.0};
  EXPECT_THROW(t.bce_loss(p, y), ContractViolation);
}

TEST(Autodiff, GradientsAccumulateAcrossTapes) {
  Parameter a("a", Tensor::vector({1.0, -2.0}));
  a.zero_grad();
  for (int i = 0; i < 2; ++i) {
    Tape t;
    t.backward(t.sum(t.param(a)));
  }
  EXPECT_EQ(a.grad.data, (std::vector<double>{2.0, 2.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter p("p", Tensor::vector({1.0, 1.0, 1.0}));
  p.grad = Tensor::vector({0.5, -3.0, 0.0});
  AdamState state;
  state.config.lr = 0.1;
  Parameter* list[] = {&p};
  adam_step(list, state);
  // With bias correction the first update is lr * g / (|g| + eps').
  EXPECT_NEAR(p.value.data[0], 0.9, 1e-7);
  EXPECT_NEAR(p.value.data[1], 1.1, 1e-7);
  EXPECT_EQ(p.value.data[2], 1.0);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, MatchesHandComputedSecondStep) {
  Parameter p("p", Tensor::scalar(0.0));
  AdamState state;
  Parameter* list[] = {&p};
  double m = 0, v = 0, x = 0;
  const double grads[] = {1.0, -0.5, 2.0};
  for (int k = 0; k < 3; ++k) {
    p.grad = Tensor::scalar(grads[k]);
    adam_step(list, state);
    m = 0.9 * m + 0.1 * grads[k];
    v = 0.999 * v + 0.001 * grads[k] * grads[k];
    const double mh = m / (1 - std::pow(0.9, k + 1));
    const double vh = v / (1 - std::pow(0.999, k + 1));
    x -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(p.value.item(), x, 1e-15);
  }
}
