#include "logicrec/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "logicrec/oracle.hpp"

namespace logicrec {
namespace {

using Json = nlohmann::ordered_json;

class BackwardSampler {
public:
  BackwardSampler(const KnowledgeGraph& kg, std::mt19937_64& rng, bool allow_like)
      : kg_(kg), rng_(rng), allow_like_(allow_like) {}

  QueryPtr instantiate(QueryShape shape, EntityId target) {
    switch (shape) {
      case QueryShape::OneP: return chain(target, 1);
      case QueryShape::TwoP: return chain(target, 2);
      case QueryShape::ThreeP: return chain(target, 3);
      case QueryShape::TwoI: return intersection(target, 2);
      case QueryShape::ThreeI: return intersection(target, 3);
      case QueryShape::IP: {
        auto edge = one_edge(target);
        if (!edge) return nullptr;
        auto inner = intersection(edge->head, 2);
        return inner ? QueryNode::project(edge->rel, inner) : nullptr;
      }
      case QueryShape::PI: {
        auto edges = distinct_edges(target, 2);
        if (edges.empty()) return nullptr;
        auto longer = chain(edges[0].head, 1);
        if (!longer) return nullptr;
        auto a = QueryNode::project(edges[0].rel, longer);
        auto b = QueryNode::project(edges[1].rel, QueryNode::anchor(edges[1].head));
        return QueryNode::conj({a, b});
      }
      case QueryShape::TwoU: return union_of(target);
      case QueryShape::UP: {
        auto edge = one_edge(target);
        if (!edge) return nullptr;
        auto inner = union_of(edge->head);
        return inner ? QueryNode::project(edge->rel, inner) : nullptr;
      }
      case QueryShape::Unclassified: break;
    }
    throw Error("cannot sample an unclassified shape");
  }

private:
  std::vector<InEdge> usable(EntityId t) const {
    std::vector<InEdge> out;
    for (const auto& e : kg_.in_edges(t))
      if (allow_like_ || e.rel != kg_.like_rel()) out.push_back(e);
    return out;
  }

  std::optional<InEdge> one_edge(EntityId t) {
    auto edges = usable(t);
    if (edges.empty()) return std::nullopt;
    std::uniform_int_distribution<std::size_t> pick(0, edges.size() - 1);
    return edges[pick(rng_)];
  }

  std::vector<InEdge> distinct_edges(EntityId t, std::size_t n) {
    auto edges = usable(t);
    if (edges.size() < n) return {};
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, edges.size() - 1);
      std::swap(edges[i], edges[pick(rng_)]);
    }
    edges.resize(n);
    return edges;
  }

  QueryPtr chain(EntityId t, int hops) {
    if (hops == 0) return QueryNode::anchor(t);
    auto edge = one_edge(t);
    if (!edge) return nullptr;
    auto inner = chain(edge->head, hops - 1);
    return inner ? QueryNode::project(edge->rel, inner) : nullptr;
  }

  QueryPtr intersection(EntityId t, std::size_t arity) {
    auto edges = distinct_edges(t, arity);
    if (edges.empty()) return nullptr;
    std::vector<QueryPtr> branches;
    for (const auto& e : edges) branches.push_back(QueryNode::project(e.rel, QueryNode::anchor(e.head)));
    return QueryNode::conj(std::move(branches));
  }

  // First branch reaches `t`; the second is any one-hop query over the graph.
  QueryPtr union_of(EntityId t) {
    auto edge = one_edge(t);
    if (!edge) return nullptr;
    auto first = QueryNode::project(edge->rel, QueryNode::anchor(edge->head));
    const auto& items = kg_.items();
    std::uniform_int_distribution<std::size_t> pick_item(0, items.size() - 1);
    for (int attempt = 0; attempt < 16; ++attempt) {
      auto other = one_edge(items[pick_item(rng_)]);
      if (!other) continue;
      auto second = QueryNode::project(other->rel, QueryNode::anchor(other->head));
      if (second->key() != first->key()) return QueryNode::disj({first, second});
    }
    return nullptr;
  }

  const KnowledgeGraph& kg_;
  std::mt19937_64& rng_;
  bool allow_like_;
};

Json names_json(const KnowledgeGraph& kg, const IdSet& ids) {
  Json arr = Json::array();
  for (auto id : ids) arr.push_back(kg.entities().name(id));
  return arr;
}

Json answers_json(const KnowledgeGraph& kg, const AnswerSets& a) {
  Json o;
  o["A"] = names_json(kg, a.logicrec);
  o["A_l"] = names_json(kg, a.requirement);
  o["A_u"] = names_json(kg, a.preference);
  return o;
}

IdSet ids_from_json(const KnowledgeGraph& kg, const Json& arr) {
  IdSet ids;
  for (const auto& n : arr) ids.push_back(kg.entity_id(n.get<std::string>()));
  normalize(ids);
  return ids;
}

AnswerSets answers_from_json(const KnowledgeGraph& kg, const Json& o) {
  return AnswerSets{ids_from_json(kg, o.at("A")), ids_from_json(kg, o.at("A_l")),
                    ids_from_json(kg, o.at("A_u"))};
}

std::vector<LogicRecInstance>& mutable_records(BenchmarkSet& set, SplitKind kind) {
  switch (kind) {
    case SplitKind::Train: return set.train;
    case SplitKind::Valid: return set.valid;
    case SplitKind::Test: return set.test;
  }
  return set.train;
}

constexpr std::array<SplitKind, 3> kSplits = {SplitKind::Train, SplitKind::Valid, SplitKind::Test};

}  // namespace

std::string_view split_name(SplitKind kind) {
  switch (kind) {
    case SplitKind::Train: return "train";
    case SplitKind::Valid: return "valid";
    case SplitKind::Test: return "test";
  }
  return "train";
}

const ShapeCounts& DatasetConfig::counts(SplitKind kind) const {
  switch (kind) {
    case SplitKind::Train: return train;
    case SplitKind::Valid: return valid;
    case SplitKind::Test: return test;
  }
  return train;
}

ShapeCounts& DatasetConfig::counts(SplitKind kind) {
  return const_cast<ShapeCounts&>(std::as_const(*this).counts(kind));
}

void DatasetConfig::validate() const {
  for (auto s : kZeroShotShapes) {
    if (train[shape_index(s)] != 0) {
      throw Error(fmt::format("zero-shot shape '{}' cannot be used for training", shape_name(s)));
    }
  }
  if (max_retries < 1) throw Error("max_retries must be positive");
  if (answer_cap < 1) throw Error("answer_cap must be positive");
}

const std::vector<LogicRecInstance>& BenchmarkSet::records(SplitKind kind) const {
  return mutable_records(const_cast<BenchmarkSet&>(*this), kind);
}

QueryPtr sample_requirement(const KnowledgeGraph& kg, QueryShape shape, std::mt19937_64& rng,
                            int max_retries, bool like_in_requirements) {
  if (kg.items().empty()) throw SamplingFailure("graph has no items");
  BackwardSampler sampler(kg, rng, like_in_requirements);
  std::uniform_int_distribution<std::size_t> pick(0, kg.items().size() - 1);
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    if (auto q = sampler.instantiate(shape, kg.items()[pick(rng)])) return q;
  }
  throw SamplingFailure(fmt::format("no '{}' query found after {} attempts", shape_name(shape), max_retries));
}

LogicRecInstance sample_instance(const KgSplit& split, QueryShape shape, SplitKind kind,
                                 std::mt19937_64& rng, const DatasetConfig& cfg) {
  const KnowledgeGraph& kg = kind == SplitKind::Train ? split.train : split.full;
  constexpr std::size_t kUsersPerRequirement = 8;
  for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
    QueryPtr q;
    try {
      q = sample_requirement(kg, shape, rng, 1, cfg.like_in_requirements);
    } catch (const SamplingFailure&) {
      continue;
    }
    const IdSet requirement = answer_requirement(kg, *q);
    if (requirement.empty() || requirement.size() > cfg.answer_cap) continue;

    IdSet candidates;
    for (auto item : requirement) {
      const auto& fans = kg.neighbors_in(kg.like_rel(), item);
      candidates.insert(candidates.end(), fans.begin(), fans.end());
    }
    normalize(candidates);
    if (candidates.empty()) continue;
    std::shuffle(candidates.begin(), candidates.end(), rng);

    const std::size_t tries = kind == SplitKind::Train ? 1 : std::min(candidates.size(), kUsersPerRequirement);
    for (std::size_t c = 0; c < tries; ++c) {
      LogicRecInstance inst;
      inst.user = candidates[c];
      inst.requirement = q;
      inst.shape = shape;
      inst.answers = answer_all(kg, inst.user, *q);
      if (kind == SplitKind::Train) return inst;
      const AnswerSets easy = answer_all(split.train, inst.user, *q);
      AnswerSets hard{set_difference(inst.answers.logicrec, easy.logicrec),
                      set_difference(inst.answers.requirement, easy.requirement),
                      set_difference(inst.answers.preference, easy.preference)};
      if (hard.logicrec.empty()) continue;
      inst.hard = std::move(hard);
      return inst;
    }
  }
  throw SamplingFailure(fmt::format("no {} '{}' instance after {} attempts", split_name(kind),
                                    shape_name(shape), cfg.max_retries));
}

BenchmarkSet build_dataset(const KgSplit& split, const DatasetConfig& cfg) {
  cfg.validate();
  BenchmarkSet out;
  for (std::size_t si = 0; si < kSplits.size(); ++si) {
    const SplitKind kind = kSplits[si];
    auto& records = mutable_records(out, kind);
    for (std::size_t shi = 0; shi < kAllShapes.size(); ++shi) {
      const std::size_t wanted = cfg.counts(kind)[shi];
      if (wanted == 0) continue;
      const QueryShape shape = kAllShapes[shi];
      std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                        static_cast<std::uint32_t>(si), static_cast<std::uint32_t>(shi)};
      std::mt19937_64 rng(seq);
      std::set<std::pair<EntityId, std::string>> seen;
      std::size_t got = 0;
      // Duplicates consume retry budget like any rejected draw.
      std::size_t duplicate_budget = static_cast<std::size_t>(cfg.max_retries);
      while (got < wanted) {
        LogicRecInstance inst;
        try {
          inst = sample_instance(split, shape, kind, rng, cfg);
        } catch (const SamplingFailure&) {
          break;
        }
        if (!seen.emplace(inst.user, inst.requirement->key()).second) {
          if (duplicate_budget-- == 0) break;
          continue;
        }
        records.push_back(std::move(inst));
        ++got;
      }
      if (got < wanted) {
        out.shortfalls.push_back(
            fmt::format("{}/{}: got {} of {}", split_name(kind), shape_name(shape), got, wanted));
      }
    }
  }
  return out;
}

std::string dataset_stats(const BenchmarkSet& set) {
  std::ostringstream os;
  os << fmt::format("{:<6} {:<5} {:>7} {:>10} {:>10}\n", "split", "shape", "count", "mean|A_l|",
                    "mean hard");
  for (auto kind : kSplits) {
    const auto& records = set.records(kind);
    for (auto shape : kAllShapes) {
      std::size_t count = 0;
      double sum_req = 0.0, sum_hard = 0.0;
      for (const auto& r : records) {
        if (r.shape != shape) continue;
        ++count;
        sum_req += static_cast<double>(r.answers.requirement.size());
        if (r.hard) sum_hard += static_cast<double>(r.hard->logicrec.size());
      }
      if (count == 0) continue;
      const double n = static_cast<double>(count);
      os << fmt::format("{:<6} {:<5} {:>7} {:>10.2f} {:>10.2f}\n", split_name(kind), shape_name(shape), count,
                        sum_req / n, sum_hard / n);
    }
  }
  return os.str();
}

std::vector<std::string> verify_records(const KgSplit& split, const std::vector<LogicRecInstance>& records,
                                        SplitKind kind) {
  std::vector<std::string> violations;
  const KnowledgeGraph& kg = kind == SplitKind::Train ? split.train : split.full;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto report = [&](std::string_view what) {
      violations.push_back(fmt::format("{} record {}: {}", split_name(kind), i, what));
    };
    if (classify_shape(*r.requirement) != r.shape) report("shape label disagrees with query structure");
    if (kind == SplitKind::Train && is_zero_shot(r.shape)) report("zero-shot shape in train split");
    if (r.answers != answer_all(kg, r.user, *r.requirement)) report("answer sets differ from oracle");
    if (r.answers.logicrec != set_intersection(r.answers.requirement, r.answers.preference)) {
      report("A != A_l ∩ A_u");
    }
    if (r.answers.logicrec.empty()) report("empty LogicRec answer set");
    if (kind == SplitKind::Train) {
      if (r.hard) report("train record carries hard answers");
      continue;
    }
    if (!r.hard || r.hard->logicrec.empty()) {
      report("no hard LogicRec answer");
      continue;
    }
    const IdSet easy = answer_logicrec(split.train, r.user, *r.requirement);
    for (auto h : r.hard->logicrec) {
      if (contains(easy, h)) report(fmt::format("hard answer {} reachable in train graph", h));
      if (!contains(r.answers.logicrec, h)) report(fmt::format("hard answer {} not an answer", h));
    }
  }
  return violations;
}

std::string record_to_json(const KnowledgeGraph& kg, const LogicRecInstance& inst) {
  Json o;
  o["user"] = kg.entities().name(inst.user);
  o["query"] = serialize_query(*inst.requirement, kg);
  o["shape"] = std::string(shape_name(inst.shape));
  o["answers"] = answers_json(kg, inst.answers);
  if (inst.hard) o["hard"] = answers_json(kg, *inst.hard);
  return o.dump();
}

LogicRecInstance record_from_json(const KnowledgeGraph& kg, std::string_view line) {
  const Json o = Json::parse(line);
  LogicRecInstance inst;
  inst.user = kg.entity_id(o.at("user").get<std::string>());
  inst.requirement = parse_query(o.at("query").get<std::string>(), kg);
  inst.shape = parse_shape(o.at("shape").get<std::string>());
  inst.answers = answers_from_json(kg, o.at("answers"));
  if (o.contains("hard")) inst.hard = answers_from_json(kg, o.at("hard"));
  return inst;
}

void write_records(const KnowledgeGraph& kg, const std::vector<LogicRecInstance>& records,
                   const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write '{}'", file.string()));
  for (const auto& r : records) out << record_to_json(kg, r) << '\n';
}

std::vector<LogicRecInstance> read_records(const KnowledgeGraph& kg, const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(fmt::format("cannot open '{}'", file.string()));
  std::vector<LogicRecInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(kg, line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("{}:{}: {}", file.string(), line_no, e.what()), line_no);
    }
  }
  return out;
}

}  // namespace logicrec
