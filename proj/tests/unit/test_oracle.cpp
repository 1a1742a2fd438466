#include <gtest/gtest.h>

#include <random>

#include "logicrec/oracle.hpp"
#include "support/test_support.hpp"

using namespace logicrec;
using logicrec::testing::BruteForce;

namespace {

// Books example: two items, one author each, one user liking both.
struct Books {
  std::shared_ptr<Vocabulary> ents = std::make_shared<Vocabulary>();
  std::shared_ptr<Vocabulary> rels = std::make_shared<Vocabulary>();
  KnowledgeGraph kg;

  static KnowledgeGraph make(std::shared_ptr<Vocabulary> e, std::shared_ptr<Vocabulary> r) {
    const auto b1 = e->intern("b1"), b2 = e->intern("b2"), b3 = e->intern("b3");
    const auto a1 = e->intern("a1"), a2 = e->intern("a2"), u = e->intern("u");
    const auto likes = r->intern("likes"), by = r->intern("author_of");
    std::vector<Triple> t = {{a1, by, b1}, {a1, by, b2}, {a2, by, b3}, {u, likes, b2}, {u, likes, b3}};
    return KnowledgeGraph::build(e, r, t, {b1, b2, b3}, {u}, likes);
  }
  Books() : kg(make(ents, rels)) {}
  QueryPtr q(const std::string& s) const { return parse_query(s, kg); }
};

}  // namespace

TEST(Oracle, OneHop) {
  Books b;
  auto q = b.q("(p author_of (e a1))");
  EXPECT_EQ(answer_requirement(b.kg, *q), (IdSet{b.kg.entity_id("b1"), b.kg.entity_id("b2")}));
  EXPECT_EQ(answer_preference(b.kg, b.kg.entity_id("u")), (IdSet{b.kg.entity_id("b2"), b.kg.entity_id("b3")}));
  EXPECT_EQ(answer_logicrec(b.kg, b.kg.entity_id("u"), *q), (IdSet{b.kg.entity_id("b2")}));
}

TEST(Oracle, UnionAndIntersection) {
  Books b;
  auto u = b.q("(or (p author_of (e a1)) (p author_of (e a2)))");
  EXPECT_EQ(answer_requirement(b.kg, *u).size(), 3u);
  auto i = b.q("(and (p author_of (e a1)) (p author_of (e a2)))");
  EXPECT_TRUE(answer_requirement(b.kg, *i).empty());
}

TEST(Oracle, RootFilteredToItems) {
  Books b;
  // Reverse traversal lands on authors, which are not items.
  auto ents = b.ents;
  auto q = b.q("(p author_of (e a1))");
  auto all = evaluate_entities(b.kg, *q);
  auto items = answer_requirement(b.kg, *q);
  for (auto e : items) EXPECT_TRUE(b.kg.is_item(e));
  EXPECT_EQ(set_intersection(all, b.kg.items()), items);
}

TEST(Oracle, AnswerAllConsistent) {
  Books b;
  auto q = b.q("(p author_of (e a1))");
  auto sets = answer_all(b.kg, b.kg.entity_id("u"), *q);
  EXPECT_EQ(sets.logicrec, set_intersection(sets.requirement, sets.preference));
}

TEST(Oracle, HardAnswersNeedHeldOutEdges) {
  Books b;
  const auto by = b.kg.relation_id("author_of");
  auto split = make_split(b.kg, {{b.kg.entity_id("a1"), by, b.kg.entity_id("b2")}}, 0.2, 0);
  auto q = b.q("(p author_of (e a1))");
  auto eh = hard_answers(split, b.kg.entity_id("u"), *q);
  EXPECT_TRUE(eh.easy.empty());
  EXPECT_EQ(eh.hard, (IdSet{b.kg.entity_id("b2")}));
}

TEST(Oracle, MatchesBruteForceOnRandomGraphs) {
  std::mt19937_64 rng(99);
  for (std::uint64_t g = 0; g < 10; ++g) {
    auto kg = logicrec::testing::random_graph({}, 1000 + g);
    BruteForce bf(kg);
    for (int rep = 0; rep < 20; ++rep) {
      for (auto shape : kAllShapes) {
        auto q = logicrec::testing::random_query(kg, shape, rng);
        ASSERT_EQ(answer_requirement(kg, *q), bf.answers(*q, kg.items())) << serialize_query(*q, kg);
        std::vector<EntityId> all(kg.num_entities());
        std::iota(all.begin(), all.end(), 0);
        ASSERT_EQ(evaluate_entities(kg, *q), bf.answers(*q, all));
        const auto user = kg.users()[rep % kg.users().size()];
        ASSERT_EQ(answer_logicrec(kg, user, *q), logicrec::testing::brute_logicrec(kg, user, *q));
      }
    }
  }
}
