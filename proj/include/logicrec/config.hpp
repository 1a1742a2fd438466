#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "logicrec/dataset.hpp"
#include "logicrec/training.hpp"

namespace logicrec {

/// Plain-text `key = value` settings. `#` starts a comment; later
/// assignments override earlier ones.
class KeyValueConfig {
public:
  static KeyValueConfig load(const std::filesystem::path& file);
  static KeyValueConfig parse(std::string_view text);

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

private:
  std::map<std::string, std::string> values_;
};

/// Keys: d, k, gamma, lr, epochs, batch_size, n_neg, task_weights (a,b,c),
/// patience, variant, seed, eval_every. Unknown keys are rejected.
TrainConfig train_config_from(const KeyValueConfig& kv);

/// Keys: <split>.<shape> = count (split in train/valid/test, shape 1p..up or
/// `basic`/`zero_shot`/`all`), seed, max_retries, answer_cap,
/// like_in_requirements. Unknown keys are rejected.
DatasetConfig dataset_config_from(const KeyValueConfig& kv);

}  // namespace logicrec
