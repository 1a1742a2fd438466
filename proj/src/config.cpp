#include "logicrec/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace logicrec {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw Error(fmt::format("config key '{}': invalid number '{}'", key, text));
  return value;
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(fmt::format("config key '{}': invalid number '{}'", key, text));
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw Error(fmt::format("config key '{}': expected a boolean, got '{}'", key, text));
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(fmt::format("config line {}: expected key = value", line_no), line_no);
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw ParseError(fmt::format("config line {}: empty key", line_no), line_no);
    cfg.set(key, trim(std::string_view(body).substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(fmt::format("cannot open config '{}'", file.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

TrainConfig train_config_from(const KeyValueConfig& kv) {
  TrainConfig cfg;
  for (const auto& [key, value] : kv.values()) {
    if (key == "d") cfg.model.dim = parse_number<std::size_t>(key, value);
    else if (key == "k") cfg.model.experts = parse_number<std::size_t>(key, value);
    else if (key == "gamma") cfg.model.gamma = parse_double(key, value);
    else if (key == "variant") cfg.model.variant = parse_variant(value);
    else if (key == "seed") cfg.model.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "lr") cfg.lr = parse_double(key, value);
    else if (key == "epochs") cfg.epochs = parse_number<std::size_t>(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "n_neg") cfg.n_neg = parse_number<std::size_t>(key, value);
    else if (key == "patience") cfg.patience = parse_number<std::size_t>(key, value);
    else if (key == "eval_every") cfg.eval_every = parse_number<std::size_t>(key, value);
    else if (key == "task_weights") {
      std::array<double, 3> w{};
      std::istringstream parts(value);
      std::string part;
      std::size_t i = 0;
      while (std::getline(parts, part, ',')) {
        if (i >= 3) throw Error("config key 'task_weights': expected three values");
        w[i++] = parse_double(key, trim(part));
      }
      if (i != 3) throw Error("config key 'task_weights': expected three values");
      cfg.task_weights = w;
    } else {
      throw Error(fmt::format("unknown training config key '{}'", key));
    }
  }
  return cfg;
}

DatasetConfig dataset_config_from(const KeyValueConfig& kv) {
  DatasetConfig cfg;
  auto is_group = [](const std::string& key) {
    return key.ends_with(".basic") || key.ends_with(".all") || key.ends_with(".zero_shot");
  };
  // Group keys first so a single-shape key overrides its group.
  std::vector<std::pair<std::string, std::string>> ordered;
  for (const auto& entry : kv.values())
    if (is_group(entry.first)) ordered.push_back(entry);
  for (const auto& entry : kv.values())
    if (!is_group(entry.first)) ordered.push_back(entry);
  for (const auto& [key, value] : ordered) {
    if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "max_retries") cfg.max_retries = parse_number<int>(key, value);
    else if (key == "answer_cap") cfg.answer_cap = parse_number<std::size_t>(key, value);
    else if (key == "like_in_requirements") cfg.like_in_requirements = parse_bool(key, value);
    else if (const auto dot = key.find('.'); dot != std::string::npos) {
      const std::string split = key.substr(0, dot);
      const std::string shape = key.substr(dot + 1);
      ShapeCounts* counts = nullptr;
      if (split == "train") counts = &cfg.train;
      else if (split == "valid") counts = &cfg.valid;
      else if (split == "test") counts = &cfg.test;
      else throw Error(fmt::format("unknown dataset split '{}' in key '{}'", split, key));
      const auto n = parse_number<std::size_t>(key, value);
      if (shape == "basic" || shape == "all") {
        for (auto s : kBasicShapes) (*counts)[shape_index(s)] = n;
      }
      if (shape == "zero_shot" || shape == "all") {
        for (auto s : kZeroShotShapes) (*counts)[shape_index(s)] = n;
      }
      if (shape != "basic" && shape != "all" && shape != "zero_shot") (*counts)[shape_index(parse_shape(shape))] = n;
    } else {
      throw Error(fmt::format("unknown dataset config key '{}'", key));
    }
  }
  return cfg;
}

}  // namespace logicrec
