#include "logicrec/oracle.hpp"

#include <unordered_map>

namespace logicrec {
namespace {

class Evaluator {
public:
  explicit Evaluator(const KnowledgeGraph& kg) : kg_(kg) {}

  const IdSet& eval(const QueryNode& q) {
    if (auto it = memo_.find(&q); it != memo_.end()) return it->second;
    IdSet out;
    switch (q.kind()) {
      case QueryKind::Anchor:
        out = {q.entity()};
        break;
      case QueryKind::Project: {
        const IdSet base = eval(*q.child());
        for (auto e : base) {
          const auto& tails = kg_.neighbors_out(e, q.relation());
          out.insert(out.end(), tails.begin(), tails.end());
        }
        normalize(out);
        break;
      }
      case QueryKind::And: {
        out = eval(*q.children().front());
        for (std::size_t i = 1; i < q.children().size() && !out.empty(); ++i) {
          out = set_intersection(out, eval(*q.children()[i]));
        }
        break;
      }
      case QueryKind::Or:
        for (const auto& c : q.children()) out = set_union(out, eval(*c));
        break;
    }
    return memo_.emplace(&q, std::move(out)).first->second;
  }

private:
  const KnowledgeGraph& kg_;
  std::unordered_map<const QueryNode*, IdSet> memo_;
};

}  // namespace

IdSet evaluate_entities(const KnowledgeGraph& kg, const QueryNode& q) {
  Evaluator ev(kg);
  return ev.eval(q);
}

IdSet answer_requirement(const KnowledgeGraph& kg, const QueryNode& q) {
  return set_intersection(evaluate_entities(kg, q), kg.items());
}

IdSet answer_preference(const KnowledgeGraph& kg, EntityId user) {
  return set_intersection(kg.neighbors_out(user, kg.like_rel()), kg.items());
}

IdSet answer_logicrec(const KnowledgeGraph& kg, EntityId user, const QueryNode& q) {
  return set_intersection(answer_requirement(kg, q), answer_preference(kg, user));
}

AnswerSets answer_all(const KnowledgeGraph& kg, EntityId user, const QueryNode& q) {
  AnswerSets a;
  a.requirement = answer_requirement(kg, q);
  a.preference = answer_preference(kg, user);
  a.logicrec = set_intersection(a.requirement, a.preference);
  return a;
}

EasyHard hard_answers(const KgSplit& split, EntityId user, const QueryNode& q) {
  EasyHard out;
  out.easy = answer_logicrec(split.train, user, q);
  out.hard = set_difference(answer_logicrec(split.full, user, q), out.easy);
  return out;
}

}  // namespace logicrec
