#include "logicrec/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace logicrec {
namespace {

constexpr char kMagic[8] = {'L', 'R', 'C', 'K', 'P', 'T', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw ArtifactMismatch("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

void init_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data) v = dist(rng);
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::FullMtl: return "mtl";
    case Variant::SharedBottom: return "shared-bottom";
    case Variant::SingleTask: return "single-task";
    case Variant::NoRequirement: return "no-al";
    case Variant::NoPreference: return "no-au";
  }
  return "mtl";
}

Variant parse_variant(std::string_view name) {
  if (name == "mtl" || name == "full-mtl") return Variant::FullMtl;
  if (name == "shared-bottom") return Variant::SharedBottom;
  if (name == "single-task" || name == "gqe") return Variant::SingleTask;
  if (name == "no-al") return Variant::NoRequirement;
  if (name == "no-au") return Variant::NoPreference;
  throw Error(fmt::format("unknown model variant '{}'", name));
}

std::array<double, 3> effective_task_weights(Variant v, std::array<double, 3> w) {
  switch (v) {
    case Variant::SingleTask: w[1] = w[2] = 0.0; break;
    case Variant::NoRequirement: w[1] = 0.0; break;
    case Variant::NoPreference: w[2] = 0.0; break;
    default: break;
  }
  return w;
}

LogicRecModel::LogicRecModel(const KnowledgeGraph& kg, const ModelConfig& config)
    : config_(config),
      like_rel_(kg.like_rel()),
      entity_fp_(kg.entities().fingerprint()),
      relation_fp_(kg.relations().fingerprint()) {
  if (config_.dim == 0) throw Error("embedding dimension must be positive");
  if (config_.experts == 0) throw Error("at least one expert is required");
  if (!(config_.gamma >= 0.0) || !std::isfinite(config_.gamma)) throw Error("margin gamma must be finite and >= 0");
  const std::size_t d = config_.dim;
  const std::size_t k = config_.experts;
  std::mt19937_64 rng(config_.seed);

  params_.emplace_back("entity", Tensor(kg.num_entities(), d));
  params_.emplace_back("relation", Tensor(kg.num_relations(), d));
  params_.emplace_back("intersect.hidden", Tensor(2 * d + 1, d));
  params_.emplace_back("intersect.out", Tensor(d + 1, 2 * d));
  for (std::size_t s = 0; s < k; ++s) params_.emplace_back(fmt::format("expert.{}", s), Tensor(d + 1, d));
  for (const char* g : {"gate.logicrec", "gate.requirement", "gate.preference"}) {
    params_.emplace_back(g, Tensor(d + 1, k));
  }

  const double emb_bound = 0.5 / std::sqrt(static_cast<double>(d));
  init_uniform(params_[0].value, emb_bound, rng);
  init_uniform(params_[1].value, emb_bound, rng);
  for (std::size_t i = 2; i < params_.size(); ++i) {
    auto& w = params_[i].value;
    init_uniform(w, 1.0 / std::sqrt(static_cast<double>(w.rows - 1)), rng);
  }
}

std::vector<Parameter*> LogicRecModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> LogicRecModel::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

void LogicRecModel::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void LogicRecModel::fill(double v) {
  for (auto& p : params_) p.value.fill(v);
}

Var LogicRecModel::embed_projection(Tape& tape, Var base, RelationId r) {
  return tape.add(base, tape.gather(relation_embedding(), static_cast<std::size_t>(r)));
}

std::pair<Var, Var> LogicRecModel::intersection_weights(Tape& tape, Var q1, Var q2) {
  const std::size_t d = config_.dim;
  Var hidden = tape.relu(tape.affine(tape.param(params_[2]), tape.concat(q1, q2)));
  Var logits = tape.affine(tape.param(params_[3]), hidden);
  const Var branches[] = {tape.slice(logits, 0, d), tape.slice(logits, d, d)};
  Var weights = tape.softmax(tape.stack_columns(branches));
  return {tape.column(weights, 0), tape.column(weights, 1)};
}

Var LogicRecModel::embed_intersection(Tape& tape, Var q1, Var q2) {
  auto [w1, w2] = intersection_weights(tape, q1, q2);
  return tape.add(tape.elementwise_mul(w1, q1), tape.elementwise_mul(w2, q2));
}

Var LogicRecModel::embed_union(Tape& tape, Var q1, Var q2) { return tape.elementwise_max(q1, q2); }

Var LogicRecModel::embed_requirement(Tape& tape, const QueryNode& q) {
  switch (q.kind()) {
    case QueryKind::Anchor:
      return tape.gather(entity_embedding(), static_cast<std::size_t>(q.entity()));
    case QueryKind::Project:
      return embed_projection(tape, embed_requirement(tape, *q.child()), q.relation());
    case QueryKind::And: {
      Var acc = embed_requirement(tape, *q.children()[0]);
      for (std::size_t i = 1; i < q.children().size(); ++i) {
        acc = embed_intersection(tape, acc, embed_requirement(tape, *q.children()[i]));
      }
      return acc;
    }
    case QueryKind::Or: {
      Var acc = embed_requirement(tape, *q.children()[0]);
      for (std::size_t i = 1; i < q.children().size(); ++i) {
        acc = embed_union(tape, acc, embed_requirement(tape, *q.children()[i]));
      }
      return acc;
    }
  }
  throw ContractViolation("unknown query node kind");
}

Var LogicRecModel::embed_user_preference(Tape& tape, EntityId user) {
  return embed_projection(tape, tape.gather(entity_embedding(), static_cast<std::size_t>(user)), like_rel_);
}

Var LogicRecModel::embed_logicrec(Tape& tape, Var requirement, Var preference) {
  return embed_intersection(tape, requirement, preference);
}

TaskEmbeddings LogicRecModel::mtl_transform(Tape& tape, Var q, Var q_requirement, Var q_preference) {
  if (config_.variant == Variant::SingleTask) {
    return TaskEmbeddings{q, q_requirement, q_preference, {}};
  }
  const std::size_t k = config_.experts;
  std::vector<Var> experts;
  experts.reserve(k);
  for (std::size_t s = 0; s < k; ++s) experts.push_back(tape.relu(tape.affine(tape.param(expert(s)), q)));

  if (config_.variant == Variant::SharedBottom) {
    Var uniform = tape.constant(Tensor(1, k, 1.0 / static_cast<double>(k)));
    Var shared = tape.weighted_sum(uniform, experts);
    return TaskEmbeddings{shared, shared, shared, {}};
  }

  TaskEmbeddings out{};
  const Var inputs[] = {q, q_requirement, q_preference};
  Var mixed[3];
  for (Task t : kTasks) {
    const auto i = static_cast<std::size_t>(t);
    Var weights = tape.softmax(tape.affine(tape.param(gate(t)), inputs[i]));
    out.gate_weights[i] = weights;
    mixed[i] = tape.weighted_sum(weights, experts);
  }
  out.logicrec = mixed[0];
  out.requirement = mixed[1];
  out.preference = mixed[2];
  return out;
}

TaskEmbeddings LogicRecModel::forward(Tape& tape, EntityId user, const QueryNode& requirement) {
  Var ql = embed_requirement(tape, requirement);
  Var qu = embed_user_preference(tape, user);
  Var q = embed_logicrec(tape, ql, qu);
  return mtl_transform(tape, q, ql, qu);
}

Var LogicRecModel::logit(Tape& tape, Var q_task, EntityId item) {
  Var dist = tape.l1_distance(q_task, tape.gather(entity_embedding(), static_cast<std::size_t>(item)));
  return tape.add_scalar(tape.scale(dist, -1.0), config_.gamma);
}

Var LogicRecModel::score(Tape& tape, Var q_task, EntityId item) { return tape.sigmoid(logit(tape, q_task, item)); }

std::vector<double> LogicRecModel::item_logits(const Tensor& q_task, const IdSet& items) const {
  const auto& table = entity_embedding().value;
  if (q_task.size() != table.cols) throw ContractViolation("item_logits: embedding dimension mismatch");
  std::vector<double> out;
  out.reserve(items.size());
  for (auto item : items) {
    const double* row = table.data.data() + static_cast<std::size_t>(item) * table.cols;
    double dist = 0.0;
    for (std::size_t i = 0; i < table.cols; ++i) dist += std::abs(q_task.data[i] - row[i]);
    out.push_back(config_.gamma - dist);
  }
  return out;
}

Tensor LogicRecModel::task_embedding(EntityId user, const QueryNode& requirement, Task task) {
  Tape tape;
  const TaskEmbeddings emb = forward(tape, user, requirement);
  return tape.value(emb[task]);
}

void LogicRecModel::save(const std::filesystem::path& file) const {
  nlohmann::ordered_json header;
  header["format"] = 1;
  header["dim"] = config_.dim;
  header["experts"] = config_.experts;
  header["gamma"] = config_.gamma;
  header["variant"] = std::string(variant_name(config_.variant));
  header["seed"] = config_.seed;
  header["like_rel"] = like_rel_;
  header["entity_vocab"] = entity_fp_;
  header["relation_vocab"] = relation_fp_;
  auto arrays = nlohmann::ordered_json::array();
  for (const auto& p : params_) arrays.push_back({{"name", p.name}, {"rows", p.value.rows}, {"cols", p.value.cols}});
  header["arrays"] = arrays;
  const std::string text = header.dump();

  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write checkpoint '{}'", file.string()));
  out.write(kMagic, sizeof(kMagic));
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : params_) {
    for (double v : p.value.data) write_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw Error(fmt::format("failed writing checkpoint '{}'", file.string()));
}

LogicRecModel LogicRecModel::load(const std::filesystem::path& file, const KnowledgeGraph& kg) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open checkpoint '{}'", file.string()));
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ArtifactMismatch(fmt::format("'{}' is not a LogicRec checkpoint", file.string()));
  }
  const std::uint64_t header_len = read_u64(in);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ArtifactMismatch("truncated checkpoint header");
  const auto header = nlohmann::json::parse(text);

  if (header.at("entity_vocab").get<std::string>() != kg.entities().fingerprint() ||
      header.at("relation_vocab").get<std::string>() != kg.relations().fingerprint()) {
    throw ArtifactMismatch("checkpoint vocabulary does not match the knowledge graph");
  }
  if (header.at("like_rel").get<RelationId>() != kg.like_rel()) {
    throw ArtifactMismatch("checkpoint like relation does not match the knowledge graph");
  }
  ModelConfig cfg;
  cfg.dim = header.at("dim").get<std::size_t>();
  cfg.experts = header.at("experts").get<std::size_t>();
  cfg.gamma = header.at("gamma").get<double>();
  cfg.variant = parse_variant(header.at("variant").get<std::string>());
  cfg.seed = header.at("seed").get<std::uint64_t>();
  LogicRecModel model(kg, cfg);

  const auto& arrays = header.at("arrays");
  if (arrays.size() != model.params_.size()) throw ArtifactMismatch("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    auto& p = model.params_[i];
    if (arrays[i].at("name").get<std::string>() != p.name || arrays[i].at("rows").get<std::size_t>() != p.value.rows ||
        arrays[i].at("cols").get<std::size_t>() != p.value.cols) {
      throw ArtifactMismatch(fmt::format("checkpoint tensor '{}' has unexpected shape", p.name));
    }
    for (auto& v : p.value.data) v = std::bit_cast<double>(read_u64(in));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ArtifactMismatch("trailing bytes in checkpoint");
  return model;
}

}  // namespace logicrec
