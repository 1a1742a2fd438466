#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "logicrec/common.hpp"

namespace logicrec {

struct Triple {
  EntityId head = 0;
  RelationId rel = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

/// Name <-> dense id map. Ids are assigned in insertion order.
class Vocabulary {
public:
  std::int32_t intern(std::string_view name);
  std::optional<std::int32_t> find(std::string_view name) const;
  const std::string& name(std::int32_t id) const { return names_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  /// Order-sensitive fingerprint of the name list.
  std::string fingerprint() const;

private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

/// Incoming edge of an entity, as seen from its tail.
struct InEdge {
  RelationId rel;
  EntityId head;
  friend auto operator<=>(const InEdge&, const InEdge&) = default;
};

/// Immutable, fully indexed triple store. User-item interactions are stored
/// as ordinary triples under `like_rel`.
class KnowledgeGraph {
public:
  /// Validates the invariants and builds the traversal indices. Duplicate
  /// triples are dropped (first occurrence kept).
  static KnowledgeGraph build(std::shared_ptr<const Vocabulary> entities,
                              std::shared_ptr<const Vocabulary> relations,
                              std::vector<Triple> triples, IdSet items, IdSet users,
                              RelationId like_rel);

  const Vocabulary& entities() const noexcept { return *entities_; }
  const Vocabulary& relations() const noexcept { return *relations_; }
  std::shared_ptr<const Vocabulary> entity_vocab() const noexcept { return entities_; }
  std::shared_ptr<const Vocabulary> relation_vocab() const noexcept { return relations_; }
  std::size_t num_entities() const noexcept { return entities_->size(); }
  std::size_t num_relations() const noexcept { return relations_->size(); }

  const std::vector<Triple>& triples() const noexcept { return triples_; }
  const IdSet& items() const noexcept { return items_; }
  const IdSet& users() const noexcept { return users_; }
  RelationId like_rel() const noexcept { return like_rel_; }
  bool is_item(EntityId e) const { return contains(items_, e); }
  bool is_user(EntityId e) const { return contains(users_, e); }

  /// Tails t with <e, r, t> in the graph; empty when none.
  const IdSet& neighbors_out(EntityId e, RelationId r) const;
  /// Heads h with <h, r, t> in the graph; empty when none.
  const IdSet& neighbors_in(RelationId r, EntityId t) const;
  /// All incoming (relation, head) pairs of `t`, sorted.
  std::span<const InEdge> in_edges(EntityId t) const;
  bool has_triple(const Triple& t) const;

  /// Number of (key, value) entries across the out index; equals |triples|.
  std::size_t out_index_size() const noexcept;

  EntityId entity_id(std::string_view name) const;
  RelationId relation_id(std::string_view name) const;

private:
  KnowledgeGraph() = default;

  std::shared_ptr<const Vocabulary> entities_;
  std::shared_ptr<const Vocabulary> relations_;
  std::vector<Triple> triples_;
  IdSet items_;
  IdSet users_;
  RelationId like_rel_ = 0;
  std::unordered_map<std::uint64_t, IdSet> out_index_;
  std::unordered_map<std::uint64_t, IdSet> in_index_;
  std::vector<std::vector<InEdge>> in_edges_;
};

/// A knowledge graph with a held-out edge set. `train` shares the
/// vocabularies of `full`.
struct KgSplit {
  KnowledgeGraph full;
  KnowledgeGraph train;
  std::vector<Triple> held_out;
  double fraction = 0.0;
  std::uint64_t seed = 0;
};

/// Loads a tab-separated triple file plus item and user name lists. Entity
/// and relation ids follow first appearance in the triple file.
KnowledgeGraph load_graph(const std::filesystem::path& triple_file,
                          const std::filesystem::path& item_file,
                          const std::filesystem::path& user_file, std::string_view like_rel_name);

/// Reads a triple file whose names must already exist in `kg`'s vocabularies.
std::vector<Triple> load_triples(const KnowledgeGraph& kg, const std::filesystem::path& file);

void write_triples(const KnowledgeGraph& kg, std::span<const Triple> triples,
                   const std::filesystem::path& file);
void write_names(const KnowledgeGraph& kg, const IdSet& ids, const std::filesystem::path& file);
/// Writes triples.tsv, items.txt and users.txt into `dir`. Reloading them
/// with load_graph reproduces identical ids and indices.
void write_graph(const KnowledgeGraph& kg, const std::filesystem::path& dir);

/// Same vocabularies, items, users and like relation as `kg`, different triples.
KnowledgeGraph with_triples(const KnowledgeGraph& kg, std::vector<Triple> triples);

/// Uniform random hold-out of round(fraction * |triples|) edges followed by a
/// repair pass that keeps every entity and relation present in the train
/// graph. Deterministic in (kg, fraction, seed).
KgSplit split_edges(const KnowledgeGraph& kg, double fraction, std::uint64_t seed);

/// Rebuilds a split from a full graph and an explicit held-out list.
KgSplit make_split(const KnowledgeGraph& full, std::vector<Triple> held_out, double fraction,
                   std::uint64_t seed);

}  // namespace logicrec

namespace logicrec {

/// Writes full.tsv, train.tsv, held_out.tsv, items.txt, users.txt and
/// manifest.json into `dir`. Returns the manifest content hash.
std::string save_split(const KgSplit& split, const std::filesystem::path& dir);
KgSplit load_split(const std::filesystem::path& dir);

}  // namespace logicrec
