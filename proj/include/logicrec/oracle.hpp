#pragma once

#include "logicrec/common.hpp"
#include "logicrec/kg_store.hpp"
#include "logicrec/query.hpp"

namespace logicrec {

/// Exact answers of a requirement by traversal: intermediate variables range
/// over all entities, only the root set is restricted to items. Shared
/// subtrees are evaluated once.
IdSet answer_requirement(const KnowledgeGraph& kg, const QueryNode& q);

/// Entity set of `q` before the item filter.
IdSet evaluate_entities(const KnowledgeGraph& kg, const QueryNode& q);

IdSet answer_preference(const KnowledgeGraph& kg, EntityId user);

IdSet answer_logicrec(const KnowledgeGraph& kg, EntityId user, const QueryNode& q);

/// All three answer sets on one graph.
AnswerSets answer_all(const KnowledgeGraph& kg, EntityId user, const QueryNode& q);

struct EasyHard {
  IdSet easy;
  IdSet hard;
};

/// easy = answers on the train graph, hard = full-graph answers minus easy.
EasyHard hard_answers(const KgSplit& split, EntityId user, const QueryNode& q);

}  // namespace logicrec
