#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "airfi/config.hpp"
#include "test_util.hpp"

#include <json.hpp>

#include <fstream>

using namespace airfi;
using airfi::testing::TempDir;

TEST_CASE("defaults survive an empty config") {
  PipelineConfig c = parse_config_json("{}");
  CHECK(c.model.encoder.latent_dim == 128);
  CHECK(c.model.encoder.stages.size() == 3);
  CHECK(c.model.prior.family == PriorFamily::kLaplace);
  CHECK(c.train.w_ad == doctest::Approx(0.1f));
  CHECK(c.train.w_re == doctest::Approx(1.0f));
  CHECK(c.train.w_mmd == doctest::Approx(1.0f));
  CHECK(c.train.w_ce == doctest::Approx(1.0f));
  CHECK(c.train.steps == 300);
  CHECK(c.train.batch_per_env == 32);
  CHECK(c.train.d_steps == 1);
  CHECK(c.train.g_steps == 1);
  CHECK_FALSE(c.data_aug.noise_std.has_value());
  CHECK(c.data_aug.copies_per_sample == 1);
  CHECK(c.feat_aug.sigma == doctest::Approx(0.1f));
  CHECK(c.feat_aug.lambda == doctest::Approx(0.9f));
  CHECK(c.feat_aug.enabled);
  CHECK_FALSE(c.dg.gamma.has_value());
  CHECK(c.dg.recompute_gamma_every == 50);
  CHECK(c.fewshot.k == 10);
  CHECK(c.fewshot.adapt_steps == 50);
  CHECK(c.fewshot.lr == doctest::Approx(3e-4f));
  CHECK(c.fewshot.reservoir == 512);
}

TEST_CASE("dump -> parse -> dump is a fixed point") {
  PipelineConfig c = parse_config_json(R"({
    "model.latent_dim": 64,
    "model.encoder_stages": [[12, 5, 4], [24, 5, 3]],
    "model.prior_family": "gaussian",
    "model.prior_scale": 0.5,
    "model.disc_hidden": [32, 16],
    "train.w_re": 0.001,
    "train.steps": 42,
    "train.seed": 7,
    "data_aug.noise_std": 0.2,
    "feat_aug.enabled": false,
    "dg.gamma": 0.03,
    "fewshot.k": 5
  })");
  CHECK(c.model.encoder.latent_dim == 64);
  CHECK(c.model.encoder.stages[1].channels == 24);
  CHECK(c.model.encoder.stages[1].kernel == 5);
  CHECK(c.model.encoder.stages[1].stride == 3);
  CHECK(c.model.prior.family == PriorFamily::kGaussian);
  CHECK(c.model.disc.hidden == std::vector<int>{32, 16});
  CHECK(c.data_aug.noise_std.has_value());
  CHECK(*c.data_aug.noise_std == doctest::Approx(0.2f));
  CHECK(c.dg.gamma.has_value());

  const std::string d1 = dump_config_json(c);
  PipelineConfig back = parse_config_json(d1);
  const std::string d2 = dump_config_json(back);
  CHECK(d1 == d2);
  CHECK(config_fingerprint(c) == config_fingerprint(back));
}

TEST_CASE("null clears the optional keys") {
  PipelineConfig c =
      parse_config_json(R"({"data_aug.noise_std": null, "dg.gamma": null})");
  CHECK_FALSE(c.data_aug.noise_std.has_value());
  CHECK_FALSE(c.dg.gamma.has_value());

  // The canonical dump writes unset optionals back out as null.
  auto j = nlohmann::json::parse(dump_config_json(c));
  CHECK(j.at("data_aug.noise_std").is_null());
  CHECK(j.at("dg.gamma").is_null());
}

TEST_CASE("fingerprint separates configs that differ in one value") {
  PipelineConfig a = parse_config_json("{}");
  PipelineConfig b = parse_config_json(R"({"train.lr": 0.002})");
  CHECK(config_fingerprint(a) != config_fingerprint(b));
  CHECK(config_fingerprint(a).size() == 16);  // zero-padded 64-bit hex
}

TEST_CASE("load_config reads from disk and reports missing files") {
  TempDir dir("config_io");
  {
    std::ofstream f(dir.path / "cfg.json");
    f << R"({"train.steps": 5, "train.batch_per_env": 2})";
  }
  PipelineConfig c = load_config(dir.path / "cfg.json");
  CHECK(c.train.steps == 5);
  CHECK(c.train.batch_per_env == 2);

  try {
    load_config(dir.path / "missing.json");
    FAIL("expected missing_file");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingFile);
  }
}

TEST_CASE("rejections") {
  auto rejects = [](const std::string& text) {
    try {
      parse_config_json(text);
      return false;
    } catch (const Error& e) {
      return e.code() == ErrorCode::kInvalidConfig;
    }
  };

  CHECK(rejects("not json"));
  CHECK(rejects("[1,2,3]"));
  CHECK(rejects(R"({"train.unknown_key": 1})"));
  CHECK(rejects(R"({"mode.latent_dim": 64})"));
  CHECK(rejects(R"({"train.lr": "fast"})"));
  CHECK(rejects(R"({"train.steps": 1.5})"));
  CHECK(rejects(R"({"model.encoder_stages": [[1, 2]]})"));
  CHECK(rejects(R"({"model.encoder_stages": []})"));
  CHECK(rejects(R"({"model.prior_family": "cauchy"})"));
  CHECK(rejects(R"({"feat_aug.enabled": 1})"));
  CHECK(rejects(R"({"train.seed": -3})"));

  // Structural validation.
  CHECK(rejects(R"({"model.latent_dim": 0})"));
  CHECK(rejects(R"({"train.steps": -1})"));
  CHECK(rejects(R"({"train.batch_per_env": 1})"));
  CHECK(rejects(R"({"train.d_steps": -1})"));
  CHECK(rejects(R"({"train.lr": 0})"));
  CHECK(rejects(R"({"data_aug.copies": -1})"));
  CHECK(rejects(R"({"dg.recompute_gamma_every": 0})"));
  CHECK(rejects(R"({"dg.gamma": 0})"));
  CHECK(rejects(R"({"fewshot.k": 0})"));
  CHECK(rejects(R"({"fewshot.adapt_steps": -1})"));
  CHECK(rejects(R"({"fewshot.lr": 0})"));
  CHECK(rejects(R"({"fewshot.reservoir": 0})"));
}
