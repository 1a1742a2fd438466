#pragma once

#include <cstdint>

#include "logicrec/kg_store.hpp"

namespace logicrec {

/// Clustered toy catalogue: items with authors, genres and similar items,
/// authors with home countries, users liking items. Every entity belongs to
/// one of `clusters` latent groups and edges stay inside the group except
/// with probability `noise`, which makes held-out edges predictable.
struct SyntheticConfig {
  std::size_t items = 100;
  std::size_t users = 50;
  std::size_t authors = 30;
  std::size_t genres = 12;
  std::size_t countries = 8;
  std::size_t clusters = 4;
  std::size_t genres_per_item = 2;
  std::size_t similar_per_item = 2;
  std::size_t likes_per_user = 8;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

/// Relation names: likes, wrote, genre_of, similar_to, home_of.
KnowledgeGraph make_synthetic_graph(const SyntheticConfig& config);

}  // namespace logicrec
