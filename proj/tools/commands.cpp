#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "logicrec/config.hpp"
#include "logicrec/dataset.hpp"
#include "logicrec/kg_store.hpp"
#include "logicrec/model.hpp"
#include "logicrec/oracle.hpp"
#include "logicrec/synthetic.hpp"
#include "logicrec/training.hpp"

namespace fs = std::filesystem;

namespace logicrec::cli {
namespace {

struct UsageError : Error {
  using Error::Error;
};

std::string file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open '{}'", p.string()));
  Fnv1a h;
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  h.update(buf);
  return h.hex();
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write '{}'", p.string()));
  out << text;
}

std::string join_names(const KnowledgeGraph& kg, const IdSet& ids) {
  std::string out = "{";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ", ";
    out += kg.entities().name(ids[i]);
  }
  return out + "}";
}

struct SynthOptions {
  SyntheticConfig cfg;
  std::string out;
};

struct SplitOptions {
  std::string triples, items, users, like, out;
  double fraction = 0.05;
  std::uint64_t seed = 0;
};

struct BuildOptions {
  std::string split_dir, config, out_dir;
  std::optional<std::uint64_t> seed;
};

struct TrainOptions {
  std::string data, config, variant, out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

struct EvalOptions {
  std::string data, checkpoints, ks = "10,20", out, split = "test";
};

struct AnswerOptions {
  std::string kg, checkpoint, mode = "symbolic", graph = "train";
  std::size_t top = 10;
};

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  const auto kg = make_synthetic_graph(o.cfg);
  write_graph(kg, o.out);
  out << fmt::format("wrote {} entities, {} relations, {} triples to {}\n", kg.num_entities(), kg.num_relations(),
                     kg.triples().size(), o.out);
  return kOk;
}

int cmd_split(const SplitOptions& o, std::ostream& out) {
  if (!(o.fraction > 0.0 && o.fraction < 1.0)) throw UsageError("--fraction must lie strictly between 0 and 1");
  const auto kg = load_graph(o.triples, o.items, o.users, o.like);
  const auto split = split_edges(kg, o.fraction, o.seed);
  const auto hash = save_split(split, o.out);
  out << fmt::format("train={} held_out={} content_hash={}\n", split.train.triples().size(), split.held_out.size(),
                     hash);
  out << fmt::format("manifest hash {}\n", file_hash(fs::path(o.out) / "manifest.json"));
  return kOk;
}

int cmd_build_dataset(const BuildOptions& o, std::ostream& out, std::ostream& err) {
  if (!fs::exists(o.config)) throw UsageError(fmt::format("config file '{}' not found", o.config));
  auto cfg = dataset_config_from(KeyValueConfig::load(o.config));
  if (o.seed) cfg.seed = *o.seed;
  const auto split = load_split(o.split_dir);
  const auto set = build_dataset(split, cfg);

  fs::create_directories(o.out_dir);
  save_split(split, o.out_dir);
  for (auto kind : {SplitKind::Train, SplitKind::Valid, SplitKind::Test}) {
    write_records(split.full, set.records(kind), fs::path(o.out_dir) / fmt::format("{}.jsonl", split_name(kind)));
  }
  const std::string stats = dataset_stats(set);
  write_text(fs::path(o.out_dir) / "stats.txt", stats);
  out << stats;

  // Re-read what was written and check it against the oracle.
  std::size_t checked = 0;
  std::vector<std::string> violations;
  for (auto kind : {SplitKind::Train, SplitKind::Valid, SplitKind::Test}) {
    const auto records = read_records(split.full, fs::path(o.out_dir) / fmt::format("{}.jsonl", split_name(kind)));
    checked += records.size();
    auto v = verify_records(split, records, kind);
    violations.insert(violations.end(), v.begin(), v.end());
  }
  out << fmt::format("verified {} records: {} violations\n", checked, violations.size());
  for (const auto& v : violations) err << "violation: " << v << '\n';
  if (!violations.empty()) return kInternalError;
  if (!set.shortfalls.empty()) {
    for (const auto& s : set.shortfalls) err << "shortfall: " << s << '\n';
    return kUsageError;
  }
  return kOk;
}

int cmd_train(const TrainOptions& o, std::ostream& out) {
  if (!o.seed) throw UsageError("--seed is required");
  KeyValueConfig kv;
  if (!o.config.empty()) {
    if (!fs::exists(o.config)) throw UsageError(fmt::format("config file '{}' not found", o.config));
    kv = KeyValueConfig::load(o.config);
  }
  for (const auto& assignment : o.overrides) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw UsageError(fmt::format("--set expects key=value, got '{}'", assignment));
    kv.set(assignment.substr(0, eq), assignment.substr(eq + 1));
  }
  if (!o.variant.empty()) kv.set("variant", o.variant);
  kv.set("seed", std::to_string(*o.seed));
  TrainConfig cfg = train_config_from(kv);
  cfg.diagnostic_dir = fs::path(o.out) / "diagnostics";

  const auto split = load_split(o.data);
  const auto train_records = read_records(split.full, fs::path(o.data) / "train.jsonl");
  std::vector<LogicRecInstance> valid_records;
  if (fs::exists(fs::path(o.data) / "valid.jsonl")) {
    valid_records = read_records(split.full, fs::path(o.data) / "valid.jsonl");
  }

  fs::create_directories(o.out);
  std::ofstream log(fs::path(o.out) / "train_log.jsonl", std::ios::binary);
  const ValidationSet validation{&valid_records, EvalTarget::Hard};
  auto result = train(split.train, train_records, validation, cfg,
                      [&](const TrainLogEntry& e) { log << log_entry_json(e) << '\n'; });
  const auto ckpt = fs::path(o.out) / "best.ckpt";
  result.best.save(ckpt);
  out << fmt::format("variant={} epochs={} best_val_hit20={} checkpoint={} hash={}\n",
                     variant_name(cfg.model.variant), result.epochs_run,
                     result.best_valid_hit ? fmt::format("{:.4f}", *result.best_valid_hit) : "n/a", ckpt.string(),
                     file_hash(ckpt));
  return kOk;
}

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  std::vector<std::size_t> ks;
  for (const auto& k : split_list(o.ks)) {
    try {
      ks.push_back(static_cast<std::size_t>(std::stoul(k)));
    } catch (const std::exception&) {
      throw UsageError(fmt::format("invalid --k entry '{}'", k));
    }
  }
  if (ks.empty()) throw UsageError("--k needs at least one cutoff");
  const auto split = load_split(o.data);
  const auto records = read_records(split.full, fs::path(o.data) / fmt::format("{}.jsonl", o.split));
  const EvalTarget target = o.split == "train" ? EvalTarget::All : EvalTarget::Hard;

  EvalReport report;
  report.ks = ks;
  for (const auto& path : split_list(o.checkpoints)) {
    auto model = LogicRecModel::load(path, split.full);
    report.rows.push_back(evaluate(model, records, split.full.items(), ks, target,
                                   std::string(variant_name(model.config().variant))));
  }
  out << report.to_table();
  if (!o.out.empty()) write_text(o.out, report.to_json().dump(2) + "\n");
  return kOk;
}

int cmd_answer(const AnswerOptions& o, std::istream& in, std::ostream& out, std::ostream& err) {
  if (o.mode != "symbolic" && o.mode != "embedding" && o.mode != "both") {
    throw UsageError(fmt::format("unknown --mode '{}'", o.mode));
  }
  if (o.graph != "train" && o.graph != "full") throw UsageError("--graph must be train or full");
  const auto split = load_split(o.kg);
  const KnowledgeGraph& kg = o.graph == "train" ? split.train : split.full;
  std::optional<LogicRecModel> model;
  if (o.mode != "symbolic") {
    if (o.checkpoint.empty()) throw UsageError("--checkpoint is required for embedding mode");
    model = LogicRecModel::load(o.checkpoint, split.full);
  }

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "quit" || line == "exit") break;
    try {
      const auto bar = line.find('|');
      if (line.rfind("user ", 0) != 0 || bar == std::string::npos) {
        throw ParseError("expected 'user <name> | <query>'", 0);
      }
      std::string user_name = line.substr(5, bar - 5);
      user_name.erase(user_name.find_last_not_of(" \t") + 1);
      user_name.erase(0, user_name.find_first_not_of(" \t"));
      const EntityId user = kg.entity_id(user_name);
      if (!kg.is_user(user)) throw UnknownSymbolError(fmt::format("'{}' is not a user", user_name));
      const auto query = parse_query(std::string_view(line).substr(bar + 1), kg);
      out << fmt::format("shape: {}\n", shape_name(classify_shape(*query)));

      IdSet exact;
      if (o.mode != "embedding") {
        exact = answer_logicrec(kg, user, *query);
        out << fmt::format("symbolic ({} graph): {}\n", o.graph, join_names(kg, exact));
      }
      if (model) {
        const Tensor q = model->task_embedding(user, *query, Task::LogicRec);
        const auto ranked = rank_items(*model, q, kg.items());
        const std::size_t shown = std::min(o.top, ranked.size());
        for (std::size_t i = 0; i < shown; ++i) {
          const EntityId item = ranked[i];
          const double logit = model->item_logits(q, IdSet{item}).front();
          const double prob = 1.0 / (1.0 + std::exp(-logit));
          std::string mark;
          if (o.mode == "both") mark = contains(exact, item) ? "  [symbolic]" : "  [inferred]";
          out << fmt::format("{:>3}. {:<24} {:.4f}{}\n", i + 1, kg.entities().name(item), prob, mark);
        }
      }
    } catch (const ParseError& e) {
      err << "error: " << e.what() << '\n';
      out << "error: " << e.what() << '\n';
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      out << "error: " << e.what() << '\n';
    }
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"LogicRec: logical requirement recommendation over knowledge graphs"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a clustered synthetic knowledge graph");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--items", synth.cfg.items);
  c_synth->add_option("--users", synth.cfg.users);
  c_synth->add_option("--authors", synth.cfg.authors);
  c_synth->add_option("--genres", synth.cfg.genres);
  c_synth->add_option("--countries", synth.cfg.countries);
  c_synth->add_option("--clusters", synth.cfg.clusters);
  c_synth->add_option("--likes-per-user", synth.cfg.likes_per_user);
  c_synth->add_option("--noise", synth.cfg.noise);
  c_synth->add_option("--seed", synth.cfg.seed)->required();

  SplitOptions split;
  auto* c_split = app.add_subcommand("split", "Hold out a fraction of the graph's edges");
  c_split->add_option("--triples", split.triples, "Tab-separated triple file")->required();
  c_split->add_option("--items", split.items, "Item names, one per line")->required();
  c_split->add_option("--users", split.users, "User names, one per line")->required();
  c_split->add_option("--like", split.like, "Name of the user-likes-item relation")->required();
  c_split->add_option("--fraction", split.fraction, "Fraction of edges to hold out");
  c_split->add_option("--seed", split.seed)->required();
  c_split->add_option("--out", split.out, "Output directory")->required();

  BuildOptions build;
  auto* c_build = app.add_subcommand("build-dataset", "Sample LogicRec benchmark records from a split");
  c_build->add_option("--split-dir", build.split_dir)->required();
  c_build->add_option("--config", build.config)->required();
  c_build->add_option("--out-dir", build.out_dir)->required();
  c_build->add_option("--seed", build.seed, "Overrides the config seed");

  TrainOptions trn;
  auto* c_train = app.add_subcommand("train", "Train a model on a benchmark directory");
  c_train->add_option("--data", trn.data)->required();
  c_train->add_option("--config", trn.config);
  c_train->add_option("--variant", trn.variant)
      ->check(CLI::IsMember({"mtl", "full-mtl", "shared-bottom", "single-task", "gqe", "no-al", "no-au"}));
  c_train->add_option("--seed", trn.seed);
  c_train->add_option("--set", trn.overrides, "key=value override, repeatable");
  c_train->add_option("--out", trn.out)->required();

  EvalOptions ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate checkpoints on a benchmark split");
  c_eval->add_option("--data", ev.data)->required();
  c_eval->add_option("--checkpoint", ev.checkpoints, "Checkpoint path(s), comma separated")->required();
  c_eval->add_option("--k", ev.ks, "Cutoffs, comma separated");
  c_eval->add_option("--split", ev.split)->check(CLI::IsMember({"train", "valid", "test"}));
  c_eval->add_option("--out", ev.out, "JSON report path");

  AnswerOptions ans;
  auto* c_answer = app.add_subcommand("answer", "Interactive query REPL: 'user <name> | <query>'");
  c_answer->add_option("--kg", ans.kg, "Split or benchmark directory")->required();
  c_answer->add_option("--checkpoint", ans.checkpoint);
  c_answer->add_option("--mode", ans.mode)->check(CLI::IsMember({"symbolic", "embedding", "both"}));
  c_answer->add_option("--graph", ans.graph)->check(CLI::IsMember({"train", "full"}));
  c_answer->add_option("--top", ans.top);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (*c_synth) return cmd_synth(synth, out);
    if (*c_split) return cmd_split(split, out);
    if (*c_build) return cmd_build_dataset(build, out, err);
    if (*c_train) return cmd_train(trn, out);
    if (*c_eval) return cmd_eval(ev, out);
    if (*c_answer) return cmd_answer(ans, in, out, err);
  } catch (const NumericFailure& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const ArtifactMismatch& e) {
    err << "artifact mismatch: " << e.what() << '\n';
    return kArtifactMismatch;
  } catch (const ContractViolation& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
  return kUsageError;
}

}  // namespace logicrec::cli
