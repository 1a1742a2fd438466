#include "logicrec/synthetic.hpp"

#include <random>

#include <fmt/format.h>

namespace logicrec {
namespace {

class Builder {
public:
  Builder(const SyntheticConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  KnowledgeGraph build() {
    if (cfg_.clusters == 0 || cfg_.items < cfg_.clusters || cfg_.users == 0) {
      throw Error("synthetic graph needs at least one user and one item per cluster");
    }
    auto entities = std::make_shared<Vocabulary>();
    auto relations = std::make_shared<Vocabulary>();
    const RelationId likes = relations->intern("likes");
    const RelationId wrote = relations->intern("wrote");
    const RelationId genre_of = relations->intern("genre_of");
    const RelationId similar = relations->intern("similar_to");
    const RelationId home_of = relations->intern("home_of");

    auto make_group = [&](const char* prefix, std::size_t n) {
      std::vector<EntityId> ids;
      for (std::size_t i = 0; i < n; ++i) ids.push_back(entities->intern(fmt::format("{}_{}", prefix, i)));
      return ids;
    };
    const auto items = make_group("item", cfg_.items);
    const auto users = make_group("user", cfg_.users);
    const auto authors = make_group("author", cfg_.authors);
    const auto genres = make_group("genre", cfg_.genres);
    const auto countries = make_group("country", cfg_.countries);

    std::vector<Triple> triples;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::size_t c = i % cfg_.clusters;
      if (!authors.empty()) triples.push_back({pick(authors, c), wrote, items[i]});
      for (std::size_t g = 0; g < cfg_.genres_per_item && !genres.empty(); ++g) {
        triples.push_back({pick(genres, c), genre_of, items[i]});
      }
      for (std::size_t s = 0; s < cfg_.similar_per_item; ++s) {
        const EntityId other = pick(items, c);
        if (other != items[i]) triples.push_back({items[i], similar, other});
      }
    }
    for (std::size_t a = 0; a < authors.size() && !countries.empty(); ++a) {
      triples.push_back({pick(countries, a % cfg_.clusters), home_of, authors[a]});
    }
    for (std::size_t u = 0; u < users.size(); ++u) {
      for (std::size_t l = 0; l < cfg_.likes_per_user; ++l) {
        triples.push_back({users[u], likes, pick(items, u % cfg_.clusters)});
      }
    }

    // Entities that drew no edge get one in-cluster edge so the vocabulary is
    // fully connected.
    std::vector<char> used(entities->size(), 0);
    for (const auto& t : triples) used[static_cast<std::size_t>(t.head)] = used[static_cast<std::size_t>(t.tail)] = 1;
    for (std::size_t i = 0; i < genres.size(); ++i)
      if (!used[static_cast<std::size_t>(genres[i])])
        triples.push_back({genres[i], genre_of, pick_strict(items, i % cfg_.clusters)});
    for (std::size_t i = 0; i < countries.size(); ++i)
      if (!used[static_cast<std::size_t>(countries[i])] && !authors.empty())
        triples.push_back({countries[i], home_of, pick_strict(authors, i % cfg_.clusters)});
    for (std::size_t i = 0; i < authors.size(); ++i)
      if (!used[static_cast<std::size_t>(authors[i])])
        triples.push_back({authors[i], wrote, pick_strict(items, i % cfg_.clusters)});

    IdSet item_set(items.begin(), items.end());
    IdSet user_set(users.begin(), users.end());
    return KnowledgeGraph::build(std::move(entities), std::move(relations), std::move(triples), std::move(item_set),
                                 std::move(user_set), likes);
  }

private:
  // Member of `group` in cluster `c`, or a uniformly random member with
  // probability noise.
  EntityId pick(const std::vector<EntityId>& group, std::size_t c) {
    std::bernoulli_distribution off_cluster(cfg_.noise);
    if (off_cluster(rng_)) {
      std::uniform_int_distribution<std::size_t> any(0, group.size() - 1);
      return group[any(rng_)];
    }
    return pick_strict(group, c);
  }

  EntityId pick_strict(const std::vector<EntityId>& group, std::size_t c) {
    const std::size_t k = cfg_.clusters;
    const std::size_t c_eff = c % std::min(k, group.size());
    const std::size_t members = (group.size() - c_eff + k - 1) / k;
    std::uniform_int_distribution<std::size_t> which(0, members - 1);
    return group[c_eff + k * which(rng_)];
  }

  const SyntheticConfig& cfg_;
  std::mt19937_64 rng_;
};

}  // namespace

KnowledgeGraph make_synthetic_graph(const SyntheticConfig& config) { return Builder(config).build(); }

}  // namespace logicrec
