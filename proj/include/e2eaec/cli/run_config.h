#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "e2eaec/datasynth/dataset.h"
#include "e2eaec/model/config.h"
#include "e2eaec/runtime/engine.h"
#include "e2eaec/train/trainer.h"

namespace e2eaec::cli {

// Bad command line or configuration; the tool exits with status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigKey {
  std::string key;
  std::string default_value;
  std::string help;
};

// Every recognised key with its default, in echo order.
const std::vector<ConfigKey>& config_reference();

// key=value settings layered as defaults < config file < overrides.
class RunConfig {
 public:
  RunConfig();

  // `#` starts a comment; blank lines are skipped. Unknown keys and lines
  // without '=' raise UsageError with the file and line number.
  void load_file(const std::string& path);
  void load_text(const std::string& text, const std::string& origin);

  // Accepts "key=value".
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  double number(const std::string& key) const;
  long long integer(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  bool boolean(const std::string& key) const;

  // All keys as key=value lines, loadable by load_file.
  std::string echo() const;

  int sample_rate() const;
  model::ModelConfig model_config() const;
  datasynth::DatasetConfig dataset_config() const;
  train::TrainConfig train_config() const;
  runtime::EngineConfig engine_config() const;

 private:
  std::vector<std::string> values_;  // parallel to config_reference()
  std::size_t index_of(const std::string& key) const;
};

}  // namespace e2eaec::cli
