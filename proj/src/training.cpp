#include "logicrec/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

namespace logicrec {
namespace {

const IdSet& task_answers(const LogicRecInstance& inst, Task t) {
  switch (t) {
    case Task::LogicRec: return inst.answers.logicrec;
    case Task::Requirement: return inst.answers.requirement;
    case Task::Preference: return inst.answers.preference;
  }
  return inst.answers.logicrec;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double hit_at_k(std::size_t rank, std::size_t k) { return rank >= 1 && rank <= k ? 1.0 : 0.0; }

double ndcg_at_k(std::size_t rank, std::size_t k) {
  if (rank < 1 || rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

std::vector<EntityId> rank_items(const LogicRecModel& model, const Tensor& q_task, const IdSet& items,
                                 const IdSet& exclude) {
  const auto logits = model.item_logits(q_task, items);
  std::vector<std::size_t> order;
  order.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i)
    if (!contains(exclude, items[i])) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (logits[a] != logits[b]) return logits[a] > logits[b];
    return items[a] < items[b];
  });
  std::vector<EntityId> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back(items[i]);
  return out;
}

std::size_t filtered_rank(std::span<const double> logits, const IdSet& items, EntityId target, const IdSet& known) {
  const auto it = std::lower_bound(items.begin(), items.end(), target);
  if (it == items.end() || *it != target) throw ContractViolation("filtered_rank: target is not an item");
  const double own = logits[static_cast<std::size_t>(it - items.begin())];
  std::size_t rank = 1;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const EntityId c = items[i];
    if (c == target || contains(known, c)) continue;
    if (logits[i] > own || (logits[i] == own && c < target)) ++rank;
  }
  return rank;
}

std::vector<EntityId> sample_negatives(const IdSet& answers, const IdSet& items, std::size_t n_neg,
                                       std::mt19937_64& rng) {
  if (n_neg == 0) return {};
  IdSet pool = set_difference(items, answers);
  if (pool.empty()) throw Error("answer set covers the whole item catalogue; no negatives exist");
  std::vector<EntityId> out;
  out.reserve(n_neg);
  if (pool.size() >= n_neg) {
    for (std::size_t i = 0; i < n_neg; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      out.push_back(pool[i]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t i = 0; i < n_neg; ++i) out.push_back(pool[pick(rng)]);
  }
  return out;
}

TrainBatch make_batch(std::span<const LogicRecInstance* const> instances, const IdSet& items, std::size_t n_neg,
                      const std::array<double, 3>& task_weights, std::mt19937_64& rng) {
  TrainBatch batch;
  batch.reserve(instances.size());
  for (const LogicRecInstance* inst : instances) {
    TrainExample ex;
    ex.instance = inst;
    for (Task t : kTasks) {
      const auto ti = static_cast<std::size_t>(t);
      if (task_weights[ti] == 0.0) continue;
      const IdSet& answers = task_answers(*inst, t);
      if (answers.empty()) throw Error("training instance with an empty answer set");
      std::uniform_int_distribution<std::size_t> pick(0, answers.size() - 1);
      ex.positive[ti] = answers[pick(rng)];
      ex.negatives[ti] = sample_negatives(answers, items, n_neg, rng);
    }
    batch.push_back(std::move(ex));
  }
  return batch;
}

Var compute_loss(Tape& tape, LogicRecModel& model, const TrainBatch& batch, const std::array<double, 3>& task_weights) {
  if (batch.empty()) throw ContractViolation("compute_loss on an empty batch");
  std::vector<Var> terms;
  std::vector<double> coefficients;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    const TaskEmbeddings emb = model.forward(tape, ex.instance->user, *ex.instance->requirement);
    for (Task t : kTasks) {
      const auto ti = static_cast<std::size_t>(t);
      if (task_weights[ti] == 0.0) continue;
      std::vector<Var> probs;
      std::vector<double> labels;
      probs.push_back(model.score(tape, emb[t], ex.positive[ti]));
      labels.push_back(1.0);
      for (auto neg : ex.negatives[ti]) {
        probs.push_back(model.score(tape, emb[t], neg));
        labels.push_back(0.0);
      }
      terms.push_back(tape.bce_loss(probs, labels));
      coefficients.push_back(task_weights[ti] * inv_batch);
    }
  }
  if (terms.empty()) throw ContractViolation("compute_loss: every task weight is zero");
  return tape.linear_combination(terms, coefficients);
}

std::string log_entry_json(const TrainLogEntry& entry) {
  nlohmann::ordered_json o;
  o["epoch"] = entry.epoch;
  o["loss"] = entry.loss;
  if (entry.valid_hit) {
    o["val_hit20"] = *entry.valid_hit;
  } else {
    o["val_hit20"] = nullptr;
  }
  return o.dump();
}

TrainResult train(const KnowledgeGraph& kg, const std::vector<LogicRecInstance>& train_records,
                  const ValidationSet& validation, const TrainConfig& config,
                  const std::function<void(const TrainLogEntry&)>& on_epoch) {
  if (train_records.empty()) throw Error("no training records");
  if (config.batch_size == 0) throw Error("batch_size must be positive");
  if (config.eval_every == 0) throw Error("eval_every must be positive");
  const auto weights = effective_task_weights(config.model.variant, config.task_weights);

  LogicRecModel model(kg, config.model);
  TrainResult result{model, std::nullopt, 0, {}};
  AdamState adam;
  adam.config.lr = config.lr;
  const auto params = model.parameters();

  std::seed_seq seq{static_cast<std::uint32_t>(config.model.seed), static_cast<std::uint32_t>(config.model.seed >> 32),
                    0x7472u};
  std::mt19937_64 rng(seq);
  std::vector<const LogicRecInstance*> order;
  for (const auto& r : train_records) order.push_back(&r);

  std::size_t rounds_without_gain = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const auto batch = make_batch(std::span(order).subspan(start, end - start), kg.items(), config.n_neg, weights, rng);
      Tape tape;
      model.zero_grad();
      const Var loss = compute_loss(tape, model, batch, weights);
      const double value = tape.value(loss).item();
      if (!std::isfinite(value)) {
        std::string where;
        if (config.diagnostic_dir) {
          std::filesystem::create_directories(*config.diagnostic_dir);
          const auto dump = *config.diagnostic_dir / "nonfinite_loss.ckpt";
          model.save(dump);
          where = fmt::format("; model dumped to {}", dump.string());
        }
        throw NumericFailure(fmt::format("non-finite loss at epoch {} batch {}{}", epoch, n_batches, where));
      }
      tape.backward(loss);
      adam_step(params, adam);
      loss_sum += value;
      ++n_batches;
    }

    TrainLogEntry entry{epoch, loss_sum / static_cast<double>(n_batches), std::nullopt};
    result.epochs_run = epoch;
    bool stop = false;
    if (validation.records && !validation.records->empty() && epoch % config.eval_every == 0) {
      const EvalRow row = evaluate(model, *validation.records, kg.items(), {config.valid_k}, validation.target);
      const double hit = row.average.hit.front();
      entry.valid_hit = hit;
      if (!result.best_valid_hit || hit > *result.best_valid_hit) {
        result.best_valid_hit = hit;
        result.best = model;
        rounds_without_gain = 0;
      } else {
        ++rounds_without_gain;
      }
      stop = rounds_without_gain >= config.patience || (config.stop_at && hit >= *config.stop_at);
    } else if (!validation.records || validation.records->empty()) {
      result.best = model;
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    if (stop) break;
  }
  return result;
}

EvalRow evaluate(LogicRecModel& model, const std::vector<LogicRecInstance>& records, const IdSet& items,
                 const std::vector<std::size_t>& ks, EvalTarget target, std::string label) {
  if (ks.empty()) throw Error("evaluate needs at least one K");
  struct Accum {
    std::size_t records = 0;
    std::vector<double> hit, ndcg;
  };
  std::array<Accum, kAllShapes.size()> per_shape;
  for (auto& a : per_shape) {
    a.hit.assign(ks.size(), 0.0);
    a.ndcg.assign(ks.size(), 0.0);
  }

  for (std::size_t ri = 0; ri < records.size(); ++ri) {
    const auto& rec = records[ri];
    const IdSet* targets = &rec.answers.logicrec;
    if (target == EvalTarget::Hard) {
      if (!rec.hard || rec.hard->logicrec.empty()) {
        throw ContractViolation(fmt::format("evaluation record {} has no hard answers", ri));
      }
      targets = &rec.hard->logicrec;
    }
    if (targets->empty()) throw ContractViolation(fmt::format("evaluation record {} has no answers", ri));
    const Tensor q = model.task_embedding(rec.user, *rec.requirement, Task::LogicRec);
    const auto logits = model.item_logits(q, items);

    std::vector<double> hit(ks.size(), 0.0), ndcg(ks.size(), 0.0);
    for (auto answer : *targets) {
      const std::size_t rank = filtered_rank(logits, items, answer, rec.answers.logicrec);
      for (std::size_t k = 0; k < ks.size(); ++k) {
        hit[k] += hit_at_k(rank, ks[k]);
        ndcg[k] += ndcg_at_k(rank, ks[k]);
      }
    }
    auto& acc = per_shape[shape_index(rec.shape)];
    ++acc.records;
    const double n = static_cast<double>(targets->size());
    for (std::size_t k = 0; k < ks.size(); ++k) {
      acc.hit[k] += hit[k] / n;
      acc.ndcg[k] += ndcg[k] / n;
    }
  }

  EvalRow row;
  row.label = std::move(label);
  row.average.hit.assign(ks.size(), 0.0);
  row.average.ndcg.assign(ks.size(), 0.0);
  std::size_t present = 0;
  for (std::size_t s = 0; s < kAllShapes.size(); ++s) {
    const auto& acc = per_shape[s];
    if (acc.records == 0) continue;
    ShapeMetrics m{acc.records, acc.hit, acc.ndcg};
    for (std::size_t k = 0; k < ks.size(); ++k) {
      m.hit[k] /= static_cast<double>(acc.records);
      m.ndcg[k] /= static_cast<double>(acc.records);
      row.average.hit[k] += m.hit[k];
      row.average.ndcg[k] += m.ndcg[k];
    }
    row.average.records += acc.records;
    row.shapes[s] = std::move(m);
    ++present;
  }
  if (present > 0) {
    for (std::size_t k = 0; k < ks.size(); ++k) {
      row.average.hit[k] /= static_cast<double>(present);
      row.average.ndcg[k] /= static_cast<double>(present);
    }
  }
  return row;
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << fmt::format("{:<24}", "");
  for (auto s : kAllShapes) os << fmt::format(" {:>7}", shape_name(s));
  os << fmt::format(" {:>7}\n", "avg");
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < ks.size(); ++k) {
      for (int metric = 0; metric < 2; ++metric) {
        const std::string name = fmt::format("{}@{}", metric == 0 ? "hit" : "ndcg", ks[k]);
        os << fmt::format("{:<24}", row.label.empty() ? name : fmt::format("{} {}", row.label, name));
        for (const auto& m : row.shapes) {
          if (!m) {
            os << fmt::format(" {:>7}", "-");
          } else {
            os << fmt::format(" {:>7.3f}", metric == 0 ? m->hit[k] : m->ndcg[k]);
          }
        }
        os << fmt::format(" {:>7.3f}\n", metric == 0 ? row.average.hit[k] : row.average.ndcg[k]);
      }
    }
  }
  return os.str();
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json out;
  out["ks"] = ks;
  auto rows_json = nlohmann::ordered_json::array();
  auto metrics_json = [&](const ShapeMetrics& m) {
    nlohmann::ordered_json o;
    o["records"] = m.records;
    for (std::size_t k = 0; k < ks.size(); ++k) {
      o[fmt::format("hit@{}", ks[k])] = m.hit[k];
      o[fmt::format("ndcg@{}", ks[k])] = m.ndcg[k];
    }
    return o;
  };
  for (const auto& row : rows) {
    nlohmann::ordered_json r;
    r["label"] = row.label;
    nlohmann::ordered_json shapes = nlohmann::ordered_json::object();
    for (std::size_t s = 0; s < kAllShapes.size(); ++s) {
      if (row.shapes[s]) shapes[std::string(shape_name(kAllShapes[s]))] = metrics_json(*row.shapes[s]);
    }
    r["shapes"] = shapes;
    r["avg"] = metrics_json(row.average);
    rows_json.push_back(r);
  }
  out["rows"] = rows_json;
  return out;
}

}  // namespace logicrec
