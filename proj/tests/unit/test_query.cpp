#include <gtest/gtest.h>

#include <random>

#include "logicrec/query.hpp"
#include "support/test_support.hpp"

using namespace logicrec;

namespace {

struct Vocab {
  Vocabulary ents, rels;
  Vocab() {
    for (const char* n : {"book_1", "book_2", "Tolkien", "fantasy", "Great Britain", "a\"b"}) ents.intern(n);
    for (const char* n : {"likes", "wrote", "genre", "born_in"}) rels.intern(n);
  }
  QueryPtr parse(const std::string& s) const { return parse_query(s, ents, rels); }
  std::string show(const QueryNode& q) const { return serialize_query(q, ents, rels); }
};

}  // namespace

TEST(Query, ParseProjection) {
  Vocab v;
  auto q = v.parse("(p wrote (e Tolkien))");
  ASSERT_EQ(q->kind(), QueryKind::Project);
  EXPECT_EQ(q->relation(), 1);
  EXPECT_EQ(q->child()->entity(), 2);
  EXPECT_EQ(q->key(), "(p 1 (e 2))");
  EXPECT_EQ(classify_shape(*q), QueryShape::OneP);
}

TEST(Query, QuotedNamesRoundTrip) {
  Vocab v;
  auto q = v.parse("(and (p born_in (e \"Great Britain\")) (p genre (e \"a\\\"b\")))");
  const std::string text = v.show(*q);
  EXPECT_NE(text.find("\"Great Britain\""), std::string::npos);
  EXPECT_EQ(*v.parse(text), *q);
  EXPECT_EQ(v.show(*v.parse(text)), text);
}

TEST(Query, CanonicalChildOrder) {
  Vocab v;
  auto a = v.parse("(and (p wrote (e Tolkien)) (p genre (e fantasy)))");
  auto b = v.parse("(and (p genre (e fantasy)) (p wrote (e Tolkien)))");
  EXPECT_EQ(*a, *b);
  EXPECT_EQ(v.show(*a), v.show(*b));
  auto u1 = v.parse("(or (p wrote (e Tolkien)) (p genre (e fantasy)))");
  auto u2 = v.parse("(or (p genre (e fantasy)) (p wrote (e Tolkien)))");
  EXPECT_EQ(*u1, *u2);
  EXPECT_NE(*a, *u1);
}

TEST(Query, ErrorsCarryOffsets) {
  Vocab v;
  try {
    v.parse("(p wrote (e Tolkien)");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 20u);
  }
  try {
    v.parse("(q wrote (e Tolkien))");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 1u);
  }
  EXPECT_THROW(v.parse("(and (p wrote (e Tolkien)))"), ParseError);
  EXPECT_THROW(v.parse("(e Tolkien)"), ParseError);
  EXPECT_THROW(v.parse("(p wrote (e Tolkien)) x"), ParseError);
  EXPECT_THROW(v.parse("(p wrote (e \"Tolk"), ParseError);
  EXPECT_THROW(v.parse(""), ParseError);
}

TEST(Query, UnknownSymbols) {
  Vocab v;
  EXPECT_THROW(v.parse("(p wrote (e Orwell))"), UnknownSymbolError);
  EXPECT_THROW(v.parse("(p published (e Tolkien))"), UnknownSymbolError);
}

TEST(Query, ShapeClassification) {
  Vocab v;
  const std::pair<const char*, QueryShape> cases[] = {
      {"(p genre (e book_1))", QueryShape::OneP},
      {"(p genre (p wrote (e Tolkien)))", QueryShape::TwoP},
      {"(p genre (p wrote (p born_in (e Tolkien))))", QueryShape::ThreeP},
      {"(and (p genre (e fantasy)) (p wrote (e Tolkien)))", QueryShape::TwoI},
      {"(and (p genre (e fantasy)) (p wrote (e Tolkien)) (p born_in (e book_1)))", QueryShape::ThreeI},
      {"(p genre (and (p genre (e fantasy)) (p wrote (e Tolkien))))", QueryShape::IP},
      {"(and (p genre (p wrote (e Tolkien))) (p wrote (e Tolkien)))", QueryShape::PI},
      {"(or (p genre (e fantasy)) (p wrote (e Tolkien)))", QueryShape::TwoU},
      {"(p genre (or (p genre (e fantasy)) (p wrote (e Tolkien))))", QueryShape::UP},
      {"(and (p genre (p wrote (e Tolkien))) (p wrote (p wrote (e Tolkien))))", QueryShape::Unclassified},
      {"(or (p genre (e fantasy)) (p wrote (e Tolkien)) (p wrote (e book_1)))", QueryShape::Unclassified},
  };
  for (const auto& [text, shape] : cases) EXPECT_EQ(classify_shape(*v.parse(text)), shape) << text;
}

TEST(Query, ShapeNames) {
  for (auto s : kAllShapes) EXPECT_EQ(parse_shape(shape_name(s)), s);
  EXPECT_THROW(parse_shape("4p"), Error);
  EXPECT_TRUE(is_zero_shot(QueryShape::IP));
  EXPECT_TRUE(is_zero_shot(QueryShape::UP));
  EXPECT_FALSE(is_zero_shot(QueryShape::ThreeI));
  for (std::size_t i = 0; i < kAllShapes.size(); ++i) EXPECT_EQ(shape_index(kAllShapes[i]), i);
}

TEST(Query, ConjunctionNeedsTwoOperands) {
  EXPECT_THROW(QueryNode::conj({QueryNode::anchor(0)}), ContractViolation);
  EXPECT_THROW(QueryNode::disj({}), ContractViolation);
}

// Property: serialize then parse is the identity on random queries, and the
// shape survives the round trip.
TEST(Query, RandomRoundTrip) {
  auto kg = logicrec::testing::random_graph({}, 17);
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    for (auto shape : kAllShapes) {
      auto q = logicrec::testing::random_query(kg, shape, rng);
      const auto text = serialize_query(*q, kg);
      auto back = parse_query(text, kg);
      EXPECT_EQ(*back, *q) << text;
      EXPECT_EQ(serialize_query(*back, kg), text);
      // Duplicate branches can collapse a shape (e.g. 2i with equal operands
      // still classifies as 2i), so only check against the template.
      EXPECT_EQ(classify_shape(*back), shape) << text;
    }
  }
}
