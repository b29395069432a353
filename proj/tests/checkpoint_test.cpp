#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "airfi/checkpoint.hpp"
#include "airfi/synth.hpp"
#include "airfi/trainer.hpp"
#include "test_util.hpp"

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

using namespace airfi;

namespace {

// A small but fully exercised trained model: real training for two steps so
// the covariance, bandwidth, reservoir and fingerprint are all non-trivial.
TrainedModel<float> small_trained(std::uint64_t seed) {
  GenConfig g;
  g.num_envs = 2;
  g.num_classes = 2;
  g.samples_per_class_per_env = 2;
  g.seed = seed;
  Dataset full = generate_dataset(g);
  std::vector<Dataset> envs(2);
  for (auto& e : envs) e.num_classes = 2;
  for (const CsiSample& s : full.samples) envs[s.env_id].samples.push_back(s);

  PipelineConfig cfg;
  cfg.model.encoder.stages = {{4, 7, 6}, {6, 5, 4}};
  cfg.model.encoder.latent_dim = 8;
  cfg.model.disc.hidden = {8};
  cfg.model.clf.hidden = {8};
  cfg.train.steps = 2;
  cfg.train.batch_per_env = 2;
  cfg.train.seed = 5;
  cfg.train.w_re = 1e-4f;
  cfg.fewshot.reservoir = 4;
  return train<float>(envs, cfg).model;
}

std::vector<char> read_all(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(bool(f));
  return std::vector<char>(std::istreambuf_iterator<char>(f),
                           std::istreambuf_iterator<char>());
}

void write_all(const std::filesystem::path& p, const std::vector<char>& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("checkpoints round-trip every tensor and meta field bit-exactly") {
  testing::TempDir dir("ckpt_rt");
  TrainedModel<float> tm = small_trained(11);
  const auto path = dir.path / "model.ckpt";
  save_checkpoint(tm, path);

  TrainedModel<float> back = load_checkpoint(path);

  // Geometry and meta.
  CHECK(back.model.cfg.encoder.latent_dim == tm.model.cfg.encoder.latent_dim);
  REQUIRE(back.model.cfg.encoder.stages.size() ==
          tm.model.cfg.encoder.stages.size());
  for (std::size_t i = 0; i < tm.model.cfg.encoder.stages.size(); ++i) {
    CHECK(back.model.cfg.encoder.stages[i].channels ==
          tm.model.cfg.encoder.stages[i].channels);
    CHECK(back.model.cfg.encoder.stages[i].kernel ==
          tm.model.cfg.encoder.stages[i].kernel);
    CHECK(back.model.cfg.encoder.stages[i].stride ==
          tm.model.cfg.encoder.stages[i].stride);
  }
  CHECK(back.model.cfg.encoder.input_channels ==
        tm.model.cfg.encoder.input_channels);
  CHECK(back.model.cfg.encoder.input_time == tm.model.cfg.encoder.input_time);
  CHECK(back.model.cfg.encoder.leaky_slope ==
        tm.model.cfg.encoder.leaky_slope);
  CHECK(back.model.cfg.prior.family == tm.model.cfg.prior.family);
  CHECK(back.model.cfg.prior.scale == tm.model.cfg.prior.scale);
  CHECK(back.model.num_classes == tm.model.num_classes);
  CHECK(back.gamma == tm.gamma);
  CHECK(back.source_env_ids == tm.source_env_ids);
  CHECK(back.fingerprint == tm.fingerprint);

  // Every parameter tensor.
  auto pa = tm.model.all_params();
  auto pb = back.model.all_params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(*pa[i].value == *pb[i].value);
  }
  CHECK(back.model.covariance.diag == tm.model.covariance.diag);
  CHECK(back.norm_stats.mean == tm.norm_stats.mean);
  CHECK(back.norm_stats.stddev == tm.norm_stats.stddev);
  CHECK(back.reservoir == tm.reservoir);

  // save(load(x)) writes the same bytes as save(x).
  const auto path2 = dir.path / "model2.ckpt";
  save_checkpoint(back, path2);
  CHECK(read_all(path) == read_all(path2));
}

TEST_CASE("a reloaded model reproduces the original's outputs exactly") {
  testing::TempDir dir("ckpt_eval");
  TrainedModel<float> tm = small_trained(13);
  const auto path = dir.path / "model.ckpt";
  save_checkpoint(tm, path);
  TrainedModel<float> back = load_checkpoint(path);

  Rng rng(17);
  ConvBatch<float> x;
  x.batch = 3;
  x.channels = tm.model.cfg.encoder.input_channels;
  x.time = tm.model.cfg.encoder.input_time;
  x.data.resize(x.channels, static_cast<Eigen::Index>(x.batch) * x.time);
  for (Eigen::Index i = 0; i < x.data.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.data.cols(); ++j) {
      x.data(i, j) = static_cast<float>(rng.normal());
    }
  }

  MatXf za = tm.model.encoder.forward(x, nullptr);
  MatXf zb = back.model.encoder.forward(x, nullptr);
  CHECK(za == zb);
  CHECK(MatXf(tm.model.clf.forward(za, nullptr)) ==
        MatXf(back.model.clf.forward(zb, nullptr)));
}

TEST_CASE("corruption and wrong formats are rejected with precise codes") {
  testing::TempDir dir("ckpt_bad");
  TrainedModel<float> tm = small_trained(19);
  const auto good = dir.path / "good.ckpt";
  save_checkpoint(tm, good);
  const std::vector<char> bytes = read_all(good);
  REQUIRE(bytes.size() > 64);

  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.path / "nope.ckpt"),
                         doctest::Contains("missing_file"), Error);
  }

  SUBCASE("flipped blob byte fails the checksum") {
    auto bad = bytes;
    bad[bad.size() - 9] = static_cast<char>(bad[bad.size() - 9] ^ 0x5a);
    const auto p = dir.path / "flip.ckpt";
    write_all(p, bad);
    CHECK_THROWS_WITH_AS(load_checkpoint(p),
                         doctest::Contains("corrupt_checkpoint"), Error);
  }

  SUBCASE("garbage magic") {
    auto bad = bytes;
    bad[0] = 'X';
    const auto p = dir.path / "magic.ckpt";
    write_all(p, bad);
    CHECK_THROWS_WITH_AS(load_checkpoint(p),
                         doctest::Contains("version_mismatch"), Error);
  }

  SUBCASE("empty file") {
    const auto p = dir.path / "empty.ckpt";
    write_all(p, {});
    CHECK_THROWS_WITH_AS(load_checkpoint(p),
                         doctest::Contains("version_mismatch"), Error);
  }

  SUBCASE("truncated in the blob") {
    auto bad = bytes;
    bad.resize(bad.size() / 2);
    const auto p = dir.path / "trunc.ckpt";
    write_all(p, bad);
    CHECK_THROWS_WITH_AS(load_checkpoint(p),
                         doctest::Contains("corrupt_checkpoint"), Error);
  }

  SUBCASE("mangled index JSON") {
    auto bad = bytes;
    bad[16] = 'X';  // first byte of the JSON index, after magic + length
    const auto p = dir.path / "index.ckpt";
    write_all(p, bad);
    CHECK_THROWS_WITH_AS(load_checkpoint(p),
                         doctest::Contains("corrupt_checkpoint"), Error);
  }

  SUBCASE("unsupported format number") {
    const std::string index = "{\"format\":2}";
    const auto p = dir.path / "fmt2.ckpt";
    std::ofstream f(p, std::ios::binary);
    f.write("AIRFICK1", 8);
    const std::uint64_t ilen = index.size();
    f.write(reinterpret_cast<const char*>(&ilen), 8);
    f.write(index.data(), static_cast<std::streamsize>(index.size()));
    const std::uint64_t blob_bytes = 0;
    f.write(reinterpret_cast<const char*>(&blob_bytes), 8);
    const std::uint64_t checksum = fnv1a64(nullptr, 0);
    f.write(reinterpret_cast<const char*>(&checksum), 8);
    f.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(p),
                         doctest::Contains("version_mismatch"), Error);
  }
}
