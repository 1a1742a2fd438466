#include "logicrec/kg_store.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace logicrec {
namespace {

std::uint64_t pack(std::int32_t a, std::int32_t b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    return std::hash<std::uint64_t>{}(pack(t.head, t.rel) ^
                                      (static_cast<std::uint64_t>(t.tail) * 0x9e3779b97f4a7c15ULL));
  }
};

const IdSet& empty_set() {
  static const IdSet kEmpty;
  return kEmpty;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open '{}'", path.string()));
  return in;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

struct NameTriple {
  std::string head, rel, tail;
};

// Calls `fn(line_no, NameTriple)` for every non-blank line.
template <typename Fn>
void read_triple_lines(const std::filesystem::path& path, Fn&& fn) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto first = line.find('\t');
    const auto second = first == std::string::npos ? first : line.find('\t', first + 1);
    if (second == std::string::npos || line.find('\t', second + 1) != std::string::npos) {
      throw ParseError(fmt::format("{}:{}: expected exactly two tab separators", path.string(), line_no),
                       line_no);
    }
    NameTriple t{line.substr(0, first), line.substr(first + 1, second - first - 1),
                 line.substr(second + 1)};
    if (t.head.empty() || t.rel.empty() || t.tail.empty()) {
      throw ParseError(fmt::format("{}:{}: empty field", path.string(), line_no), line_no);
    }
    fn(line_no, std::move(t));
  }
}

IdSet read_name_list(const std::filesystem::path& path, const Vocabulary& entities) {
  auto in = open_input(path);
  IdSet ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto id = entities.find(line);
    if (!id) {
      throw UnknownSymbolError(
          fmt::format("{}:{}: unknown entity '{}'", path.string(), line_no, line));
    }
    ids.push_back(*id);
  }
  normalize(ids);
  return ids;
}

}  // namespace

std::int32_t Vocabulary::intern(std::string_view name) {
  auto [it, inserted] = ids_.try_emplace(std::string(name), static_cast<std::int32_t>(names_.size()));
  if (inserted) names_.emplace_back(name);
  return it->second;
}

std::optional<std::int32_t> Vocabulary::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::fingerprint() const {
  Fnv1a h;
  for (const auto& n : names_) {
    h.update(n);
    h.update_separator();
  }
  return h.hex();
}

KnowledgeGraph KnowledgeGraph::build(std::shared_ptr<const Vocabulary> entities,
                                     std::shared_ptr<const Vocabulary> relations,
                                     std::vector<Triple> triples, IdSet items, IdSet users,
                                     RelationId like_rel) {
  KnowledgeGraph kg;
  const auto n_ent = static_cast<EntityId>(entities->size());
  const auto n_rel = static_cast<RelationId>(relations->size());
  if (like_rel < 0 || like_rel >= n_rel) throw UnknownSymbolError("like relation out of range");
  normalize(items);
  normalize(users);
  for (auto e : items)
    if (e < 0 || e >= n_ent) throw UnknownSymbolError(fmt::format("item id {} out of range", e));
  for (auto e : users)
    if (e < 0 || e >= n_ent) throw UnknownSymbolError(fmt::format("user id {} out of range", e));

  kg.in_edges_.resize(entities->size());
  std::unordered_set<Triple, TripleHash> seen;
  kg.triples_.reserve(triples.size());
  for (const auto& t : triples) {
    if (t.head < 0 || t.head >= n_ent || t.tail < 0 || t.tail >= n_ent || t.rel < 0 || t.rel >= n_rel) {
      throw UnknownSymbolError(fmt::format("triple ({}, {}, {}) out of vocabulary range", t.head, t.rel, t.tail));
    }
    if (t.rel == like_rel && (!contains(users, t.head) || !contains(items, t.tail))) {
      throw Error(fmt::format("interaction <{}, {}, {}> must link a user to an item",
                              entities->name(t.head), relations->name(t.rel), entities->name(t.tail)));
    }
    if (!seen.insert(t).second) continue;
    kg.triples_.push_back(t);
    kg.out_index_[pack(t.head, t.rel)].push_back(t.tail);
    kg.in_index_[pack(t.rel, t.tail)].push_back(t.head);
    kg.in_edges_[static_cast<std::size_t>(t.tail)].push_back({t.rel, t.head});
  }
  for (auto& [_, s] : kg.out_index_) std::sort(s.begin(), s.end());
  for (auto& [_, s] : kg.in_index_) std::sort(s.begin(), s.end());
  for (auto& v : kg.in_edges_) std::sort(v.begin(), v.end());

  kg.entities_ = std::move(entities);
  kg.relations_ = std::move(relations);
  kg.items_ = std::move(items);
  kg.users_ = std::move(users);
  kg.like_rel_ = like_rel;
  return kg;
}

const IdSet& KnowledgeGraph::neighbors_out(EntityId e, RelationId r) const {
  auto it = out_index_.find(pack(e, r));
  return it == out_index_.end() ? empty_set() : it->second;
}

const IdSet& KnowledgeGraph::neighbors_in(RelationId r, EntityId t) const {
  auto it = in_index_.find(pack(r, t));
  return it == in_index_.end() ? empty_set() : it->second;
}

std::span<const InEdge> KnowledgeGraph::in_edges(EntityId t) const {
  return in_edges_.at(static_cast<std::size_t>(t));
}

bool KnowledgeGraph::has_triple(const Triple& t) const {
  return contains(neighbors_out(t.head, t.rel), t.tail);
}

std::size_t KnowledgeGraph::out_index_size() const noexcept {
  std::size_t n = 0;
  for (const auto& [_, s] : out_index_) n += s.size();
  return n;
}

EntityId KnowledgeGraph::entity_id(std::string_view name) const {
  auto id = entities_->find(name);
  if (!id) throw UnknownSymbolError(fmt::format("unknown entity '{}'", name));
  return *id;
}

RelationId KnowledgeGraph::relation_id(std::string_view name) const {
  auto id = relations_->find(name);
  if (!id) throw UnknownSymbolError(fmt::format("unknown relation '{}'", name));
  return *id;
}

KnowledgeGraph load_graph(const std::filesystem::path& triple_file,
                          const std::filesystem::path& item_file,
                          const std::filesystem::path& user_file, std::string_view like_rel_name) {
  auto entities = std::make_shared<Vocabulary>();
  auto relations = std::make_shared<Vocabulary>();
  std::vector<Triple> triples;
  read_triple_lines(triple_file, [&](std::size_t, NameTriple t) {
    const auto h = entities->intern(t.head);
    const auto r = relations->intern(t.rel);
    const auto tl = entities->intern(t.tail);
    triples.push_back({h, r, tl});
  });
  if (triples.empty()) throw Error("empty graph");
  auto items = read_name_list(item_file, *entities);
  auto users = read_name_list(user_file, *entities);
  const auto like = relations->find(like_rel_name);
  if (!like) throw UnknownSymbolError(fmt::format("unknown relation '{}'", like_rel_name));
  return KnowledgeGraph::build(std::move(entities), std::move(relations), std::move(triples),
                               std::move(items), std::move(users), *like);
}

std::vector<Triple> load_triples(const KnowledgeGraph& kg, const std::filesystem::path& file) {
  std::vector<Triple> out;
  read_triple_lines(file, [&](std::size_t line_no, NameTriple t) {
    const auto h = kg.entities().find(t.head);
    const auto r = kg.relations().find(t.rel);
    const auto tl = kg.entities().find(t.tail);
    if (!h || !r || !tl) {
      throw UnknownSymbolError(fmt::format("{}:{}: triple uses a name outside the vocabulary",
                                           file.string(), line_no));
    }
    out.push_back({*h, *r, *tl});
  });
  return out;
}

void write_triples(const KnowledgeGraph& kg, std::span<const Triple> triples,
                   const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write '{}'", file.string()));
  for (const auto& t : triples) {
    out << kg.entities().name(t.head) << '\t' << kg.relations().name(t.rel) << '\t'
        << kg.entities().name(t.tail) << '\n';
  }
}

void write_names(const KnowledgeGraph& kg, const IdSet& ids, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write '{}'", file.string()));
  for (auto id : ids) out << kg.entities().name(id) << '\n';
}

void write_graph(const KnowledgeGraph& kg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_triples(kg, kg.triples(), dir / "triples.tsv");
  write_names(kg, kg.items(), dir / "items.txt");
  write_names(kg, kg.users(), dir / "users.txt");
}

KnowledgeGraph with_triples(const KnowledgeGraph& kg, std::vector<Triple> triples) {
  return KnowledgeGraph::build(kg.entity_vocab(), kg.relation_vocab(), std::move(triples), kg.items(),
                               kg.users(), kg.like_rel());
}

KgSplit make_split(const KnowledgeGraph& full, std::vector<Triple> held_out, double fraction,
                   std::uint64_t seed) {
  std::vector<Triple> sorted_held = held_out;
  std::sort(sorted_held.begin(), sorted_held.end());
  std::vector<Triple> train;
  train.reserve(full.triples().size());
  for (const auto& t : full.triples()) {
    if (!std::binary_search(sorted_held.begin(), sorted_held.end(), t)) train.push_back(t);
  }
  if (train.size() + held_out.size() != full.triples().size()) {
    throw Error("held-out triples must be a duplicate-free subset of the full graph");
  }
  return KgSplit{full, with_triples(full, std::move(train)), std::move(held_out), fraction, seed};
}

KgSplit split_edges(const KnowledgeGraph& kg, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error("split fraction must lie in (0, 1)");
  const auto& triples = kg.triples();
  const std::size_t n = triples.size();
  const auto n_hold = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<char> held(n, 0);
  for (std::size_t i = 0; i < n_hold; ++i) held[order[i]] = 1;

  // Occurrence counts of every symbol within the train part.
  std::vector<std::int64_t> ent_count(kg.num_entities(), 0), rel_count(kg.num_relations(), 0);
  auto adjust = [&](const Triple& t, std::int64_t delta) {
    ent_count[static_cast<std::size_t>(t.head)] += delta;
    ent_count[static_cast<std::size_t>(t.tail)] += delta;
    rel_count[static_cast<std::size_t>(t.rel)] += delta;
  };
  for (std::size_t i = 0; i < n; ++i)
    if (!held[i]) adjust(triples[i], 1);

  auto orphans = [&](const Triple& t) {
    return ent_count[static_cast<std::size_t>(t.head)] == 0 ||
           ent_count[static_cast<std::size_t>(t.tail)] == 0 ||
           rel_count[static_cast<std::size_t>(t.rel)] == 0;
  };
  // Removing a kept triple must leave each of its symbols with >= 1 occurrence.
  auto removable = [&](const Triple& t) {
    const std::int64_t head_use = t.head == t.tail ? 2 : 1;
    return ent_count[static_cast<std::size_t>(t.head)] > head_use &&
           ent_count[static_cast<std::size_t>(t.tail)] > head_use &&
           rel_count[static_cast<std::size_t>(t.rel)] > 1;
  };

  constexpr int kRandomAttempts = 64;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t slot = 0; slot < n_hold; ++slot) {
    const std::size_t idx = order[slot];
    if (!orphans(triples[idx])) continue;
    held[idx] = 0;
    adjust(triples[idx], 1);
    std::optional<std::size_t> replacement;
    for (int attempt = 0; attempt < kRandomAttempts && !replacement; ++attempt) {
      const std::size_t c = pick(rng);
      if (!held[c] && c != idx && removable(triples[c])) replacement = c;
    }
    if (!replacement) {
      for (std::size_t j = n_hold; j < n && !replacement; ++j) {
        const std::size_t c = order[j];
        if (!held[c] && removable(triples[c])) replacement = c;
      }
    }
    if (!replacement) {
      throw SplitInfeasibleError(fmt::format(
          "cannot hold out {} of {} triples without orphaning an entity or relation", n_hold, n));
    }
    held[*replacement] = 1;
    adjust(triples[*replacement], -1);
    order[slot] = *replacement;
  }

  std::vector<Triple> train, held_out;
  train.reserve(n - n_hold);
  held_out.reserve(n_hold);
  for (std::size_t i = 0; i < n; ++i) (held[i] ? held_out : train).push_back(triples[i]);
  return KgSplit{kg, with_triples(kg, std::move(train)), std::move(held_out), fraction, seed};
}

}  // namespace logicrec

namespace logicrec {
namespace {

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open '{}'", p.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string save_split(const KgSplit& split, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_triples(split.full, split.full.triples(), dir / "full.tsv");
  write_triples(split.full, split.train.triples(), dir / "train.tsv");
  write_triples(split.full, split.held_out, dir / "held_out.tsv");
  write_names(split.full, split.full.items(), dir / "items.txt");
  write_names(split.full, split.full.users(), dir / "users.txt");

  Fnv1a h;
  for (const char* f : {"full.tsv", "train.tsv", "held_out.tsv", "items.txt", "users.txt"}) {
    h.update(f);
    h.update_separator();
    h.update(file_bytes(dir / f));
  }
  nlohmann::ordered_json manifest;
  manifest["seed"] = split.seed;
  manifest["fraction"] = split.fraction;
  manifest["like_rel"] = split.full.relations().name(split.full.like_rel());
  manifest["counts"] = {{"full", split.full.triples().size()},
                        {"train", split.train.triples().size()},
                        {"held_out", split.held_out.size()}};
  manifest["content_hash"] = h.hex();
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
  return h.hex();
}

KgSplit load_split(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(fmt::format("no split manifest in '{}'", dir.string()));
  const auto manifest = nlohmann::json::parse(in);
  const auto like = manifest.at("like_rel").get<std::string>();
  auto full = load_graph(dir / "full.tsv", dir / "items.txt", dir / "users.txt", like);
  auto held = load_triples(full, dir / "held_out.tsv");
  return make_split(full, std::move(held), manifest.at("fraction").get<double>(),
                    manifest.at("seed").get<std::uint64_t>());
}

}  // namespace logicrec
