#include "logicrec/query.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>

#include "logicrec/kg_store.hpp"

namespace logicrec {
namespace {

const char* kind_tag(QueryKind kind) {
  switch (kind) {
    case QueryKind::Anchor: return "e";
    case QueryKind::Project: return "p";
    case QueryKind::And: return "and";
    case QueryKind::Or: return "or";
  }
  return "?";
}

std::vector<QueryPtr> canonical_children(std::vector<QueryPtr> children, const char* op) {
  if (children.size() < 2) {
    throw ContractViolation(fmt::format("'{}' needs at least two operands, got {}", op, children.size()));
  }
  for (const auto& c : children)
    if (!c) throw ContractViolation(fmt::format("'{}' operand is null", op));
  std::stable_sort(children.begin(), children.end(),
                   [](const QueryPtr& a, const QueryPtr& b) { return a->key() < b->key(); });
  return children;
}

bool is_chain(const QueryNode& q, int hops) {
  const QueryNode* n = &q;
  for (int i = 0; i < hops; ++i) {
    if (n->kind() != QueryKind::Project) return false;
    n = n->child().get();
  }
  return n->kind() == QueryKind::Anchor;
}

bool all_one_hop(const QueryNode& q, std::size_t arity) {
  if (q.children().size() != arity) return false;
  return std::all_of(q.children().begin(), q.children().end(),
                     [](const QueryPtr& c) { return is_chain(*c, 1); });
}

bool needs_quotes(std::string_view name) {
  if (name.empty()) return true;
  return std::any_of(name.begin(), name.end(), [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '"' || c == '\\';
  });
}

void append_name(std::string& out, std::string_view name) {
  if (!needs_quotes(name)) {
    out += name;
    return;
  }
  out += '"';
  for (char c : name) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
}

void serialize_into(std::string& out, const QueryNode& q, const Vocabulary& entities,
                    const Vocabulary& relations) {
  out += '(';
  out += kind_tag(q.kind());
  out += ' ';
  switch (q.kind()) {
    case QueryKind::Anchor:
      append_name(out, entities.name(q.entity()));
      break;
    case QueryKind::Project:
      append_name(out, relations.name(q.relation()));
      out += ' ';
      serialize_into(out, *q.child(), entities, relations);
      break;
    case QueryKind::And:
    case QueryKind::Or:
      for (std::size_t i = 0; i < q.children().size(); ++i) {
        if (i) out += ' ';
        serialize_into(out, *q.children()[i], entities, relations);
      }
      break;
  }
  out += ')';
}

class Parser {
public:
  Parser(std::string_view text, const Vocabulary& entities, const Vocabulary& relations)
      : text_(text), entities_(entities), relations_(relations) {}

  QueryPtr parse_root() {
    skip_ws();
    const std::size_t start = pos_;
    QueryPtr q = parse_node();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    if (q->kind() == QueryKind::Anchor) {
      throw ParseError(fmt::format("offset {}: a bare anchor is not a requirement", start), start);
    }
    return q;
  }

private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(fmt::format("offset {}: {}", pos_, msg), pos_);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != c) fail(fmt::format("expected '{}'", c));
    ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  std::string atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    std::string out;
    if (text_[pos_] == '"') {
      ++pos_;
      while (true) {
        if (pos_ >= text_.size()) fail("unterminated string");
        char c = text_[pos_++];
        if (c == '"') break;
        if (c == '\\') {
          if (pos_ >= text_.size()) fail("dangling escape");
          c = text_[pos_++];
        }
        out += c;
      }
      return out;
    }
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '"') break;
      out += c;
      ++pos_;
    }
    if (out.empty()) fail("expected a name");
    return out;
  }

  QueryPtr parse_node() {
    expect('(');
    const std::size_t op_pos = (skip_ws(), pos_);
    const std::string op = atom();
    QueryPtr result;
    if (op == "e") {
      const std::size_t at = (skip_ws(), pos_);
      const std::string name = atom();
      const auto id = entities_.find(name);
      if (!id) throw UnknownSymbolError(fmt::format("offset {}: unknown entity '{}'", at, name));
      result = QueryNode::anchor(*id);
    } else if (op == "p") {
      const std::size_t at = (skip_ws(), pos_);
      const std::string name = atom();
      const auto id = relations_.find(name);
      if (!id) throw UnknownSymbolError(fmt::format("offset {}: unknown relation '{}'", at, name));
      result = QueryNode::project(*id, parse_node());
    } else if (op == "and" || op == "or") {
      std::vector<QueryPtr> children;
      while (!peek(')')) {
        if (pos_ >= text_.size()) fail("unexpected end of input");
        children.push_back(parse_node());
      }
      if (children.size() < 2) {
        throw ParseError(fmt::format("offset {}: '{}' needs at least two operands", op_pos, op), op_pos);
      }
      result = op == "and" ? QueryNode::conj(std::move(children)) : QueryNode::disj(std::move(children));
    } else {
      throw ParseError(fmt::format("offset {}: unknown operator '{}'", op_pos, op), op_pos);
    }
    expect(')');
    return result;
  }

  std::string_view text_;
  const Vocabulary& entities_;
  const Vocabulary& relations_;
  std::size_t pos_ = 0;
};

}  // namespace

QueryNode::QueryNode(QueryKind kind, std::int32_t symbol, std::vector<QueryPtr> children)
    : kind_(kind), symbol_(symbol), children_(std::move(children)) {
  key_ = fmt::format("({}", kind_tag(kind_));
  if (kind_ == QueryKind::Anchor || kind_ == QueryKind::Project) key_ += fmt::format(" {}", symbol_);
  for (const auto& c : children_) {
    key_ += ' ';
    key_ += c->key();
  }
  key_ += ')';
}

QueryPtr QueryNode::anchor(EntityId e) {
  return QueryPtr(new QueryNode(QueryKind::Anchor, e, {}));
}

QueryPtr QueryNode::project(RelationId r, QueryPtr child) {
  if (!child) throw ContractViolation("projection operand is null");
  return QueryPtr(new QueryNode(QueryKind::Project, r, {std::move(child)}));
}

QueryPtr QueryNode::conj(std::vector<QueryPtr> children) {
  return QueryPtr(new QueryNode(QueryKind::And, -1, canonical_children(std::move(children), "and")));
}

QueryPtr QueryNode::disj(std::vector<QueryPtr> children) {
  return QueryPtr(new QueryNode(QueryKind::Or, -1, canonical_children(std::move(children), "or")));
}

std::string_view shape_name(QueryShape shape) {
  switch (shape) {
    case QueryShape::OneP: return "1p";
    case QueryShape::TwoP: return "2p";
    case QueryShape::ThreeP: return "3p";
    case QueryShape::TwoI: return "2i";
    case QueryShape::ThreeI: return "3i";
    case QueryShape::IP: return "ip";
    case QueryShape::PI: return "pi";
    case QueryShape::TwoU: return "2u";
    case QueryShape::UP: return "up";
    case QueryShape::Unclassified: return "unclassified";
  }
  return "unclassified";
}

QueryShape parse_shape(std::string_view name) {
  for (auto s : kAllShapes)
    if (shape_name(s) == name) return s;
  throw Error(fmt::format("unknown query shape '{}'", name));
}

bool is_zero_shot(QueryShape shape) {
  return std::find(kZeroShotShapes.begin(), kZeroShotShapes.end(), shape) != kZeroShotShapes.end();
}

std::size_t shape_index(QueryShape shape) {
  auto it = std::find(kAllShapes.begin(), kAllShapes.end(), shape);
  if (it == kAllShapes.end()) throw Error("unclassified shape has no index");
  return static_cast<std::size_t>(it - kAllShapes.begin());
}

QueryShape classify_shape(const QueryNode& q) {
  switch (q.kind()) {
    case QueryKind::Anchor:
      return QueryShape::Unclassified;
    case QueryKind::Project: {
      if (is_chain(q, 1)) return QueryShape::OneP;
      if (is_chain(q, 2)) return QueryShape::TwoP;
      if (is_chain(q, 3)) return QueryShape::ThreeP;
      const QueryNode& inner = *q.child();
      if (inner.kind() == QueryKind::And && all_one_hop(inner, 2)) return QueryShape::IP;
      if (inner.kind() == QueryKind::Or && all_one_hop(inner, 2)) return QueryShape::UP;
      return QueryShape::Unclassified;
    }
    case QueryKind::And: {
      if (all_one_hop(q, 2)) return QueryShape::TwoI;
      if (all_one_hop(q, 3)) return QueryShape::ThreeI;
      if (q.children().size() == 2) {
        const auto& a = *q.children()[0];
        const auto& b = *q.children()[1];
        if ((is_chain(a, 2) && is_chain(b, 1)) || (is_chain(a, 1) && is_chain(b, 2))) return QueryShape::PI;
      }
      return QueryShape::Unclassified;
    }
    case QueryKind::Or:
      return all_one_hop(q, 2) ? QueryShape::TwoU : QueryShape::Unclassified;
  }
  return QueryShape::Unclassified;
}

QueryPtr parse_query(std::string_view text, const Vocabulary& entities, const Vocabulary& relations) {
  return Parser(text, entities, relations).parse_root();
}

QueryPtr parse_query(std::string_view text, const KnowledgeGraph& kg) {
  return parse_query(text, kg.entities(), kg.relations());
}

std::string serialize_query(const QueryNode& q, const Vocabulary& entities, const Vocabulary& relations) {
  std::string out;
  serialize_into(out, q, entities, relations);
  return out;
}

std::string serialize_query(const QueryNode& q, const KnowledgeGraph& kg) {
  return serialize_query(q, kg.entities(), kg.relations());
}

}  // namespace logicrec
