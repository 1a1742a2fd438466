#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "logicrec/kg_store.hpp"
#include "logicrec/query.hpp"

namespace logicrec {

enum class SplitKind { Train, Valid, Test };

std::string_view split_name(SplitKind kind);

/// Number of instances to sample per shape, indexed like kAllShapes.
using ShapeCounts = std::array<std::size_t, kAllShapes.size()>;

struct DatasetConfig {
  ShapeCounts train{};
  ShapeCounts valid{};
  ShapeCounts test{};
  std::uint64_t seed = 0;
  /// Attempts per emitted record before a shape is reported short.
  int max_retries = 1000;
  /// Instances with |A_l| above this are discarded as over-broad.
  std::size_t answer_cap = 100;
  /// Whether requirement paths may traverse the interaction relation.
  bool like_in_requirements = false;

  const ShapeCounts& counts(SplitKind kind) const;
  ShapeCounts& counts(SplitKind kind);
  /// Throws Error when train requests a zero-shot shape.
  void validate() const;
};

/// Backward sampling from a uniformly drawn seed item. The returned query
/// has the seed item among its answers on `kg`. Throws SamplingFailure after
/// `max_retries` dead ends.
QueryPtr sample_requirement(const KnowledgeGraph& kg, QueryShape shape, std::mt19937_64& rng,
                            int max_retries = 100, bool like_in_requirements = false);

/// Pairs a sampled requirement with a user whose LogicRec answer set is
/// nonempty. Train instances use the train graph only; valid/test instances
/// use the full graph and must have at least one hard LogicRec answer.
LogicRecInstance sample_instance(const KgSplit& split, QueryShape shape, SplitKind kind,
                                 std::mt19937_64& rng, const DatasetConfig& cfg);

struct BenchmarkSet {
  std::vector<LogicRecInstance> train;
  std::vector<LogicRecInstance> valid;
  std::vector<LogicRecInstance> test;
  /// "split/shape: got N of M" for every shape that fell short.
  std::vector<std::string> shortfalls;

  const std::vector<LogicRecInstance>& records(SplitKind kind) const;
};

/// Deterministic in (split, cfg). Each (split, shape) pair draws from its own
/// seeded stream.
BenchmarkSet build_dataset(const KgSplit& split, const DatasetConfig& cfg);

/// Plain-text per-split, per-shape table: count, mean |A_l|, mean hard |A|.
std::string dataset_stats(const BenchmarkSet& set);

/// Re-derives every record with the oracle: answer consistency, zero-shot
/// discipline and the hard-answer guarantee. Returns one message per violation.
std::vector<std::string> verify_records(const KgSplit& split, const std::vector<LogicRecInstance>& records,
                                        SplitKind kind);

/// JSON-lines I/O. Names are resolved against `kg`'s vocabularies.
std::string record_to_json(const KnowledgeGraph& kg, const LogicRecInstance& inst);
LogicRecInstance record_from_json(const KnowledgeGraph& kg, std::string_view line);
void write_records(const KnowledgeGraph& kg, const std::vector<LogicRecInstance>& records,
                   const std::filesystem::path& file);
std::vector<LogicRecInstance> read_records(const KnowledgeGraph& kg, const std::filesystem::path& file);

}  // namespace logicrec
