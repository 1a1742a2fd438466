#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "logicrec/model.hpp"
#include "logicrec/query.hpp"

namespace logicrec {

// ---------------------------------------------------------------------------
// Ranking metrics

/// 1 when rank <= k. Ranks are 1-based.
double hit_at_k(std::size_t rank, std::size_t k);
/// Binary-relevance DCG of a single answer: 1 / log2(rank + 1) when rank <= k.
double ndcg_at_k(std::size_t rank, std::size_t k);

/// Items ordered by descending logit, ties by ascending id, `exclude` skipped.
std::vector<EntityId> rank_items(const LogicRecModel& model, const Tensor& q_task, const IdSet& items,
                                 const IdSet& exclude = {});

/// 1-based rank of `target` among `items` after removing every id in `known`
/// other than the target itself. `logits` is aligned with `items`.
std::size_t filtered_rank(std::span<const double> logits, const IdSet& items, EntityId target, const IdSet& known);

// ---------------------------------------------------------------------------
// Training

/// Per task: one positive and n_neg negatives drawn outside that task's
/// answer set.
struct TrainExample {
  const LogicRecInstance* instance = nullptr;
  std::array<EntityId, 3> positive{};
  std::array<std::vector<EntityId>, 3> negatives;
};
using TrainBatch = std::vector<TrainExample>;

/// Uniform without replacement when |items \ answers| >= n_neg, uniform with
/// replacement otherwise. Throws Error when the answers cover the catalogue
/// and n_neg > 0.
std::vector<EntityId> sample_negatives(const IdSet& answers, const IdSet& items, std::size_t n_neg,
                                       std::mt19937_64& rng);

TrainBatch make_batch(std::span<const LogicRecInstance* const> instances, const IdSet& items, std::size_t n_neg,
                      const std::array<double, 3>& task_weights, std::mt19937_64& rng);

/// sum_t w_t * BCE_t averaged over the batch, each BCE_t the mean over its
/// 1 + n_neg terms. Tasks with zero weight are not built.
Var compute_loss(Tape& tape, LogicRecModel& model, const TrainBatch& batch, const std::array<double, 3>& task_weights);

struct TrainConfig {
  ModelConfig model;
  double lr = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::size_t n_neg = 32;
  std::array<double, 3> task_weights{1.0, 1.0, 1.0};
  /// Validation rounds without improvement before stopping.
  std::size_t patience = 10;
  /// Epochs between validation rounds.
  std::size_t eval_every = 1;
  std::size_t valid_k = 20;
  /// Stop as soon as the validation metric reaches this value.
  std::optional<double> stop_at;
  /// Where to dump the model when the loss turns non-finite.
  std::optional<std::filesystem::path> diagnostic_dir;
};

/// How evaluation chooses the answers it ranks.
enum class EvalTarget {
  Hard,  // hard LogicRec answers (valid/test records)
  All,   // every LogicRec answer (train records)
};

struct TrainLogEntry {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<double> valid_hit;
};

struct TrainResult {
  LogicRecModel best;
  std::optional<double> best_valid_hit;
  std::size_t epochs_run = 0;
  std::vector<TrainLogEntry> log;
};

struct ValidationSet {
  const std::vector<LogicRecInstance>* records = nullptr;
  EvalTarget target = EvalTarget::Hard;
};

/// Seeded epoch loop over shuffled batches with Adam, periodic validation
/// (avg hit@valid_k) and best-on-validation retention. Throws NumericFailure
/// on a non-finite loss.
TrainResult train(const KnowledgeGraph& kg, const std::vector<LogicRecInstance>& train_records,
                  const ValidationSet& validation, const TrainConfig& config,
                  const std::function<void(const TrainLogEntry&)>& on_epoch = {});

std::string log_entry_json(const TrainLogEntry& entry);

// ---------------------------------------------------------------------------
// Evaluation

struct ShapeMetrics {
  std::size_t records = 0;
  std::vector<double> hit;   // aligned with EvalReport::ks
  std::vector<double> ndcg;
};

struct EvalRow {
  std::string label;
  std::array<std::optional<ShapeMetrics>, kAllShapes.size()> shapes;
  /// Unweighted mean over the shapes present.
  ShapeMetrics average;
};

struct EvalReport {
  std::vector<std::size_t> ks;
  std::vector<EvalRow> rows;

  /// Shapes as columns plus avg; one line per (row, metric, K).
  std::string to_table() const;
  nlohmann::ordered_json to_json() const;
};

/// Scores every item with the LogicRec task embedding and ranks each target
/// answer after filtering the other known answers of its record.
EvalRow evaluate(LogicRecModel& model, const std::vector<LogicRecInstance>& records, const IdSet& items,
                 const std::vector<std::size_t>& ks, EvalTarget target = EvalTarget::Hard, std::string label = {});

}  // namespace logicrec
