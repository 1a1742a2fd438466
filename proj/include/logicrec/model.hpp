#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "logicrec/autodiff.hpp"
#include "logicrec/kg_store.hpp"
#include "logicrec/query.hpp"

namespace logicrec {

/// Model variants: the full multi-gate model and its ablations.
enum class Variant {
  FullMtl,        // k experts, one gate per task
  SharedBottom,   // uniform expert mixture shared by all tasks
  SingleTask,     // plain GQE: LogicRec embedding scored directly, A only
  NoRequirement,  // full model without the A_l loss term
  NoPreference,   // full model without the A_u loss term
};

std::string_view variant_name(Variant v);
/// Accepts mtl|full-mtl, shared-bottom, single-task|gqe, no-al, no-au.
Variant parse_variant(std::string_view name);

enum class Task { LogicRec = 0, Requirement = 1, Preference = 2 };
inline constexpr std::array<Task, 3> kTasks = {Task::LogicRec, Task::Requirement, Task::Preference};

/// Loss weights per task after the variant has masked its dropped terms.
std::array<double, 3> effective_task_weights(Variant v, std::array<double, 3> configured);

struct ModelConfig {
  std::size_t dim = 64;
  std::size_t experts = 4;
  double gamma = 12.0;
  Variant variant = Variant::FullMtl;
  std::uint64_t seed = 0;
};

/// Task-specific query embeddings q*, q_l*, q_u* and the gate outputs that
/// mixed them (absent for variants without gates).
struct TaskEmbeddings {
  Var logicrec;
  Var requirement;
  Var preference;
  std::array<std::optional<Var>, 3> gate_weights;

  Var operator[](Task t) const {
    return t == Task::LogicRec ? logicrec : (t == Task::Requirement ? requirement : preference);
  }
};

/// Learnable LogicRec query embedding model.
///
/// Requirement embeddings: anchors are entity rows, projections add the
/// relation row, intersections mix operands with per-dimension softmax
/// attention from a two-layer network, unions take the elementwise max.
/// The user preference is the one-hop query user + like-relation, and the
/// LogicRec query intersects it with the requirement through the same
/// attention network. k relu experts read the LogicRec query only; each task
/// gate reads its own task query and mixes the shared expert outputs.
class LogicRecModel {
public:
  LogicRecModel(const KnowledgeGraph& kg, const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t dim() const noexcept { return config_.dim; }
  RelationId like_rel() const noexcept { return like_rel_; }
  const std::string& entity_fingerprint() const noexcept { return entity_fp_; }
  const std::string& relation_fingerprint() const noexcept { return relation_fp_; }

  /// Fixed order: entity, relation, intersection hidden/out, experts, gates.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  void zero_grad();
  /// Sets every learnable value to `v` (tests, degenerate-case checks).
  void fill(double v);

  Parameter& entity_embedding() { return params_[0]; }
  Parameter& relation_embedding() { return params_[1]; }
  const Parameter& entity_embedding() const { return params_[0]; }
  const Parameter& relation_embedding() const { return params_[1]; }

  Var embed_requirement(Tape& tape, const QueryNode& q);
  Var embed_projection(Tape& tape, Var base, RelationId r);
  Var embed_intersection(Tape& tape, Var q1, Var q2);
  /// Per-dimension attention weights (w1, w2) used by embed_intersection.
  std::pair<Var, Var> intersection_weights(Tape& tape, Var q1, Var q2);
  Var embed_union(Tape& tape, Var q1, Var q2);
  Var embed_user_preference(Tape& tape, EntityId user);
  Var embed_logicrec(Tape& tape, Var requirement, Var preference);
  TaskEmbeddings mtl_transform(Tape& tape, Var q, Var q_requirement, Var q_preference);
  /// embed requirement, preference, LogicRec query, then mtl_transform.
  TaskEmbeddings forward(Tape& tape, EntityId user, const QueryNode& requirement);

  /// gamma - ||q - item||_1
  Var logit(Tape& tape, Var q_task, EntityId item);
  /// sigmoid(gamma - ||q - item||_1)
  Var score(Tape& tape, Var q_task, EntityId item);

  /// Logit of every item in `items` for a fixed task embedding (no tape).
  std::vector<double> item_logits(const Tensor& q_task, const IdSet& items) const;
  /// Value of the task embedding for one instance.
  Tensor task_embedding(EntityId user, const QueryNode& requirement, Task task = Task::LogicRec);

  void save(const std::filesystem::path& file) const;
  /// Throws ArtifactMismatch when the checkpoint does not fit `kg`.
  static LogicRecModel load(const std::filesystem::path& file, const KnowledgeGraph& kg);

private:
  Parameter& expert(std::size_t s) { return params_[4 + s]; }
  Parameter& gate(Task t) { return params_[4 + config_.experts + static_cast<std::size_t>(t)]; }

  ModelConfig config_;
  RelationId like_rel_ = 0;
  std::string entity_fp_;
  std::string relation_fp_;
  std::vector<Parameter> params_;
};

}  // namespace logicrec
