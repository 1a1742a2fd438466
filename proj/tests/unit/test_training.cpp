#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "logicrec/dataset.hpp"
#include "logicrec/oracle.hpp"
#include "logicrec/synthetic.hpp"
#include "logicrec/training.hpp"
#include "support/test_support.hpp"

using namespace logicrec;

namespace {

struct Fixture {
  KgSplit split;
  BenchmarkSet data;
};

Fixture make_fixture(std::size_t train_per_shape, std::size_t eval_per_shape, std::uint64_t seed = 1) {
  SyntheticConfig sc;
  sc.seed = seed;
  Fixture f{split_edges(make_synthetic_graph(sc), 0.1, seed), {}};
  DatasetConfig dc;
  dc.seed = seed;
  for (auto s : kBasicShapes) dc.train[shape_index(s)] = train_per_shape;
  for (auto s : kAllShapes) dc.valid[shape_index(s)] = eval_per_shape;
  f.data = build_dataset(f.split, dc);
  return f;
}

// Rank by brute force: sort all candidates after dropping filtered ones.
std::size_t brute_rank(const std::vector<double>& logits, const IdSet& items, EntityId target, const IdSet& known) {
  std::vector<std::pair<double, EntityId>> rows;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i] != target && std::find(known.begin(), known.end(), items[i]) != known.end()) continue;
    rows.push_back({logits[i], items[i]});
  }
  std::sort(rows.begin(), rows.end(), [](auto a, auto b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (rows[r].second == target) return r + 1;
  return 0;
}

}  // namespace

TEST(Metrics, UnitCases) {
  EXPECT_EQ(hit_at_k(5, 20), 1.0);
  EXPECT_EQ(hit_at_k(21, 20), 0.0);
  EXPECT_EQ(hit_at_k(20, 20), 1.0);
  EXPECT_NEAR(ndcg_at_k(2, 2), 1.0 / std::log2(3.0), 1e-12);
  EXPECT_NEAR(ndcg_at_k(2, 2), 0.6309297535714574, 1e-12);
  EXPECT_EQ(ndcg_at_k(1, 10), 1.0);
  EXPECT_EQ(ndcg_at_k(11, 10), 0.0);
}

TEST(Metrics, FilteredRankMatchesBruteForce) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 2000; ++rep) {
    const std::size_t n = 1 + rng() % 20;
    IdSet items(n);
    std::iota(items.begin(), items.end(), 0);
    std::vector<double> logits(n);
    // Few distinct values so ties are common.
    for (auto& l : logits) l = static_cast<double>(rng() % 5);
    IdSet known;
    for (auto i : items)
      if (rng() % 3 == 0) known.push_back(i);
    const EntityId target = items[rng() % n];
    EXPECT_EQ(filtered_rank(logits, items, target, known), brute_rank(logits, items, target, known));
  }
}

TEST(Ranking, OrderAndTies) {
  SyntheticConfig sc;
  sc.items = 6;
  sc.users = 2;
  sc.clusters = 2;
  auto kg = make_synthetic_graph(sc);
  ModelConfig mc;
  mc.dim = 2;
  mc.experts = 1;
  LogicRecModel m(kg, mc);
  m.entity_embedding().value.fill(0.0);
  Tensor q(1, 2, 0.0);
  // All ties: ascending id.
  EXPECT_EQ(rank_items(m, q, kg.items()), kg.items());
  m.entity_embedding().value.at(static_cast<std::size_t>(kg.items()[3]), 0) = 1.0;
  auto order = rank_items(m, q, kg.items(), {kg.items()[0]});
  EXPECT_EQ(order.back(), kg.items()[3]);
  EXPECT_EQ(order.size(), kg.items().size() - 1);
  EXPECT_EQ(order.front(), kg.items()[1]);
}

TEST(Negatives, DisjointFromAnswers) {
  std::mt19937_64 rng(1);
  IdSet items(30);
  std::iota(items.begin(), items.end(), 0);
  IdSet answers = {1, 4, 9, 16, 25};
  for (int rep = 0; rep < 10000; ++rep) {
    for (auto n : sample_negatives(answers, items, 3, rng)) EXPECT_FALSE(contains(answers, n));
  }
  auto forced = sample_negatives({0}, {0, 1, 2}, 2, rng);
  std::sort(forced.begin(), forced.end());
  EXPECT_EQ(forced, (std::vector<EntityId>{1, 2}));
  EXPECT_TRUE(sample_negatives({0}, {0, 1, 2}, 0, rng).empty());
  auto repeated = sample_negatives({0, 1}, {0, 1, 2}, 4, rng);
  EXPECT_EQ(repeated, (std::vector<EntityId>{2, 2, 2, 2}));
  EXPECT_THROW(sample_negatives({0, 1, 2}, {0, 1, 2}, 1, rng), Error);
}

TEST(Loss, ZeroParametersGiveLn2) {
  auto f = make_fixture(4, 0);
  ModelConfig mc;
  mc.dim = 4;
  mc.experts = 2;
  mc.gamma = 0.0;
  LogicRecModel m(f.split.train, mc);
  m.fill(0.0);
  std::mt19937_64 rng(2);
  std::vector<const LogicRecInstance*> ptrs;
  for (const auto& r : f.data.train) ptrs.push_back(&r);
  const std::array<double, 3> w{1.0, 0.0, 0.0};
  auto batch = make_batch(ptrs, f.split.train.items(), 5, w, rng);
  Tape t;
  EXPECT_NEAR(t.value(compute_loss(t, m, batch, w)).item(), std::log(2.0), 1e-12);
  const std::array<double, 3> all{1.0, 1.0, 1.0};
  auto batch3 = make_batch(ptrs, f.split.train.items(), 5, all, rng);
  Tape t3;
  EXPECT_NEAR(t3.value(compute_loss(t3, m, batch3, all)).item(), 3 * std::log(2.0), 1e-12);
  Tape t0;
  EXPECT_THROW(compute_loss(t0, m, {}, all), ContractViolation);
}

TEST(Loss, TaskWeightsSelectTerms) {
  auto f = make_fixture(4, 0);
  ModelConfig mc;
  mc.dim = 6;
  mc.experts = 2;
  LogicRecModel m(f.split.train, mc);
  std::vector<const LogicRecInstance*> ptrs;
  for (const auto& r : f.data.train) ptrs.push_back(&r);
  std::mt19937_64 rng(3);
  auto batch = make_batch(ptrs, f.split.train.items(), 4, {1.0, 1.0, 1.0}, rng);
  auto value = [&](std::array<double, 3> w) {
    Tape t;
    return t.value(compute_loss(t, m, batch, w)).item();
  };
  EXPECT_NEAR(value({1, 1, 1}), value({1, 0, 0}) + value({0, 1, 0}) + value({0, 0, 1}), 1e-12);
  EXPECT_NEAR(value({2, 0, 0}), 2 * value({1, 0, 0}), 1e-12);
}

TEST(Train, LossDecreasesOnToySet) {
  auto f = make_fixture(10, 0);
  TrainConfig tc;
  tc.model.dim = 16;
  tc.model.experts = 2;
  tc.model.gamma = 6.0;
  tc.lr = 0.01;
  tc.epochs = 200;
  tc.batch_size = 50;
  tc.n_neg = 8;
  auto res = train(f.split.train, f.data.train, {}, tc);
  ASSERT_EQ(res.log.size(), 200u);
  EXPECT_LT(res.log.back().loss, 0.5 * res.log.front().loss);
}

TEST(Train, DeterministicAndPatience) {
  auto f = make_fixture(6, 2);
  TrainConfig tc;
  tc.model.dim = 8;
  tc.model.experts = 2;
  tc.epochs = 30;
  tc.batch_size = 16;
  tc.n_neg = 4;
  tc.lr = 0.01;
  const ValidationSet vs{&f.data.valid, EvalTarget::Hard};
  auto a = train(f.split.train, f.data.train, vs, tc);
  auto b = train(f.split.train, f.data.train, vs, tc);
  for (std::size_t i = 0; i < a.best.parameters().size(); ++i)
    EXPECT_EQ(a.best.parameters()[i]->value, b.best.parameters()[i]->value);

  tc.patience = 0;
  auto p = train(f.split.train, f.data.train, vs, tc);
  EXPECT_EQ(p.epochs_run, 1u);
  ASSERT_EQ(p.log.size(), 1u);
  EXPECT_TRUE(p.log[0].valid_hit.has_value());
}

TEST(Train, NonFiniteLossAborts) {
  logicrec::testing::TempDir dir("nan");
  auto f = make_fixture(2, 0);
  TrainConfig tc;
  tc.model.dim = 4;
  tc.model.experts = 1;
  // Steps this large overflow the embeddings within a few batches.
  tc.lr = 1e300;
  tc.epochs = 50;
  tc.batch_size = 1;
  tc.diagnostic_dir = dir.path();
  EXPECT_THROW(train(f.split.train, f.data.train, {}, tc), NumericFailure);
  EXPECT_TRUE(std::filesystem::exists(dir / "nonfinite_loss.ckpt"));
}

TEST(Eval, HandComputedMetrics) {
  // Two items tied at the top plus known answers filtered away.
  SyntheticConfig sc;
  sc.items = 8;
  sc.users = 2;
  sc.clusters = 2;
  auto kg = make_synthetic_graph(sc);
  ModelConfig mc;
  mc.dim = 2;
  mc.experts = 1;
  mc.variant = Variant::SingleTask;
  LogicRecModel m(kg, mc);
  m.fill(0.0);
  // Every item ties, so ranks follow ascending id.
  LogicRecInstance r;
  r.user = kg.users()[0];
  r.requirement = QueryNode::project(1, QueryNode::anchor(kg.items()[0]));
  r.shape = QueryShape::OneP;
  r.answers.logicrec = {kg.items()[0], kg.items()[2]};
  r.hard = AnswerSets{{kg.items()[2]}, {}, {}};
  // Filtered rank of items[2]: items[0] is removed, items[1] precedes -> 2.
  auto row = evaluate(m, {r}, kg.items(), {1, 2});
  ASSERT_TRUE(row.shapes[0].has_value());
  EXPECT_EQ(row.shapes[0]->hit[0], 0.0);
  EXPECT_EQ(row.shapes[0]->hit[1], 1.0);
  EXPECT_NEAR(row.shapes[0]->ndcg[1], 1.0 / std::log2(3.0), 1e-12);
  EXPECT_NEAR(row.average.ndcg[1], 1.0 / std::log2(3.0), 1e-12);
  LogicRecInstance no_hard = r;
  no_hard.hard.reset();
  EXPECT_THROW(evaluate(m, {no_hard}, kg.items(), {1}), ContractViolation);
  EXPECT_NO_THROW(evaluate(m, {no_hard}, kg.items(), {1}, EvalTarget::All));
}

TEST(Eval, AverageIsUnweightedOverShapes) {
  auto f = make_fixture(0, 3);
  ModelConfig mc;
  mc.dim = 8;
  mc.experts = 2;
  LogicRecModel m(f.split.full, mc);
  auto row = evaluate(m, f.data.valid, f.split.full.items(), {10, 20});
  double total = 0.0;
  std::size_t present = 0;
  for (const auto& s : row.shapes) {
    if (!s) continue;
    ++present;
    total += s->hit[1];
    for (double v : s->hit) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
    for (double v : s->ndcg) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  }
  EXPECT_EQ(present, 9u);
  EXPECT_NEAR(row.average.hit[1], total / 9.0, 1e-12);
  EvalReport rep{{10, 20}, {row}};
  EXPECT_NE(rep.to_table().find("hit@20"), std::string::npos);
  EXPECT_EQ(rep.to_json()["rows"].size(), 1u);
}
