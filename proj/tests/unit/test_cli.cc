#include <set>

#include "doctest.h"
#include "e2eaec/cli/run_config.h"

using namespace e2eaec;
using cli::RunConfig;
using cli::UsageError;

TEST_CASE("defaults mirror the library defaults") {
  const RunConfig c;
  CHECK(c.model_config().channels == model::ModelConfig{}.channels);
  CHECK(c.model_config().bins == 257);
  CHECK(c.train_config().steps == train::TrainConfig{}.steps);
  CHECK(c.train_config().weights.delay == 100.0);
  CHECK(c.engine_config().mask_factor == 0.1);
  CHECK(c.engine_config().vad_smooth_frames == 5);
  CHECK(c.dataset_config().max_delay_frames == c.model_config().max_delay);

  std::set<std::string> keys;
  for (const auto& k : cli::config_reference()) CHECK(keys.insert(k.key).second);
}

TEST_CASE("file then overrides") {
  RunConfig c;
  c.load_text("# comment\n\nsample_rate = 8000  # trailing\ntrain.lr=0.01\n", "f");
  CHECK(c.sample_rate() == 8000);
  CHECK(c.model_config().bins == 129);
  CHECK(c.train_config().lr == 0.01);
  c.set("train.lr=0.002");
  CHECK(c.train_config().lr == 0.002);
  c.set("train.delay_loss", "ce");
  CHECK(c.train_config().weights.delay == 1.0);
  c.set("train.weight_delay", "7.5");
  CHECK(c.train_config().weights.delay == 7.5);
}

TEST_CASE("unknown keys and malformed values are usage errors") {
  RunConfig c;
  CHECK_THROWS_AS(c.set("model.chanels", "3"), UsageError);
  CHECK_THROWS_WITH_AS(c.load_text("sample_rate=8000\nnope=1\n", "cfg.txt"),
                       doctest::Contains("cfg.txt:2"), UsageError);
  CHECK_THROWS_AS(c.load_text("sample_rate 8000\n", "x"), UsageError);
  CHECK_THROWS_AS(c.set("no_equals_sign"), UsageError);
  c.set("train.lr", "fast");
  CHECK_THROWS_AS(c.train_config(), UsageError);
  c = RunConfig{};
  c.set("model.channels", "-4");
  CHECK_THROWS_AS(c.model_config(), UsageError);
  c = RunConfig{};
  c.set("model.features", "mel");
  CHECK_THROWS_AS(c.model_config(), UsageError);
  c = RunConfig{};
  c.set("engine.mask_factor", "0");
  CHECK_THROWS_AS(c.engine_config(), UsageError);
  c = RunConfig{};
  c.set("sample_rate", "8001");
  CHECK_THROWS_AS(c.sample_rate(), UsageError);
}

TEST_CASE("echo reloads to the same configuration") {
  RunConfig a;
  a.set("train.lr", "0.0031");
  a.set("synth.ser_db_min", "-12.5");
  a.set("model.features", "reim_logmag");
  RunConfig b;
  b.set("train.lr", "1");
  b.load_text(a.echo(), "echo");
  CHECK(b.echo() == a.echo());
  CHECK(b.model_config() == a.model_config());
  CHECK(b.train_config().lr == 0.0031);
}
