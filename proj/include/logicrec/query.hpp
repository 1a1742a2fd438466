#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "logicrec/common.hpp"

namespace logicrec {

class KnowledgeGraph;
class Vocabulary;

enum class QueryKind { Anchor, Project, And, Or };

class QueryNode;
using QueryPtr = std::shared_ptr<const QueryNode>;

/// Immutable logical requirement tree. And/Or children are kept in canonical
/// order (by their id-level key) so structurally equal queries compare and
/// serialize identically. Subtrees may be shared.
class QueryNode {
public:
  static QueryPtr anchor(EntityId e);
  static QueryPtr project(RelationId r, QueryPtr child);
  /// Throws ContractViolation for fewer than two children.
  static QueryPtr conj(std::vector<QueryPtr> children);
  static QueryPtr disj(std::vector<QueryPtr> children);

  QueryKind kind() const noexcept { return kind_; }
  EntityId entity() const noexcept { return symbol_; }
  RelationId relation() const noexcept { return symbol_; }
  const QueryPtr& child() const { return children_.front(); }
  const std::vector<QueryPtr>& children() const noexcept { return children_; }

  /// Canonical id-level s-expression, e.g. "(p 3 (e 7))". Vocabulary independent.
  const std::string& key() const noexcept { return key_; }

  friend bool operator==(const QueryNode& a, const QueryNode& b) { return a.key_ == b.key_; }

private:
  QueryNode(QueryKind kind, std::int32_t symbol, std::vector<QueryPtr> children);

  QueryKind kind_;
  std::int32_t symbol_;
  std::vector<QueryPtr> children_;
  std::string key_;
};

enum class QueryShape { OneP, TwoP, ThreeP, TwoI, ThreeI, IP, PI, TwoU, UP, Unclassified };

inline constexpr std::array<QueryShape, 9> kAllShapes = {
    QueryShape::OneP, QueryShape::TwoP, QueryShape::ThreeP, QueryShape::TwoI, QueryShape::ThreeI,
    QueryShape::IP,   QueryShape::PI,   QueryShape::TwoU,   QueryShape::UP};
inline constexpr std::array<QueryShape, 5> kBasicShapes = {
    QueryShape::OneP, QueryShape::TwoP, QueryShape::ThreeP, QueryShape::TwoI, QueryShape::ThreeI};
inline constexpr std::array<QueryShape, 4> kZeroShotShapes = {QueryShape::IP, QueryShape::PI,
                                                              QueryShape::TwoU, QueryShape::UP};

std::string_view shape_name(QueryShape shape);
/// Accepts "1p", "2p", ..., "up". Throws Error on anything else.
QueryShape parse_shape(std::string_view name);
bool is_zero_shot(QueryShape shape);
std::size_t shape_index(QueryShape shape);

/// Exact Fig.-2-style template match; Unclassified when nothing matches.
QueryShape classify_shape(const QueryNode& q);

/// Grammar: (p REL Q) | (and Q Q ...) | (or Q Q ...) | (e NAME). Names may be
/// double-quoted. The root must not be a bare anchor. Errors carry the byte
/// offset of the offending token.
QueryPtr parse_query(std::string_view text, const Vocabulary& entities, const Vocabulary& relations);
QueryPtr parse_query(std::string_view text, const KnowledgeGraph& kg);

std::string serialize_query(const QueryNode& q, const Vocabulary& entities, const Vocabulary& relations);
std::string serialize_query(const QueryNode& q, const KnowledgeGraph& kg);

/// Answer sets of one LogicRec query; all ids are items.
struct AnswerSets {
  IdSet logicrec;     // A = A_l ∩ A_u
  IdSet requirement;  // A_l
  IdSet preference;   // A_u
  friend bool operator==(const AnswerSets&, const AnswerSets&) = default;
};

/// A (user, requirement) pair with its answers. `hard` is present for
/// valid/test instances only.
struct LogicRecInstance {
  EntityId user = 0;
  QueryPtr requirement;
  QueryShape shape = QueryShape::Unclassified;
  AnswerSets answers;
  std::optional<AnswerSets> hard;
};

}  // namespace logicrec
