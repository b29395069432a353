#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "airfi/data_augment.hpp"
#include "airfi/rng.hpp"

#include <cmath>

using namespace airfi;

namespace {

Dataset tiny_dataset(std::uint64_t seed, int n_samples) {
  Rng rng(seed);
  Dataset ds;
  ds.num_classes = 2;
  for (int i = 0; i < n_samples; ++i) {
    CsiSample s;
    s.label = i % 2;
    s.env_id = i % 3;
    s.amplitude.resize(kChannels, kPackets);
    for (int r = 0; r < kChannels; ++r) {
      for (int t = 0; t < kPackets; ++t) {
        s.amplitude(r, t) = static_cast<float>(rng.uniform(0.0, 4.0));
      }
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace

TEST_CASE("zero copies is the identity") {
  Dataset ds = tiny_dataset(1, 3);
  DataAugConfig cfg;
  cfg.copies_per_sample = 0;
  Dataset out = augment_gaussian(ds, cfg);
  REQUIRE(out.samples.size() == ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK(sample_checksum(out.samples[i]) == sample_checksum(ds.samples[i]));
  }
}

TEST_CASE("zero noise copies are bit-identical to their originals") {
  Dataset ds = tiny_dataset(2, 2);
  DataAugConfig cfg;
  cfg.noise_std = 0.0f;
  cfg.copies_per_sample = 2;
  Dataset out = augment_gaussian(ds, cfg);
  REQUIRE(out.samples.size() == 2 * (1 + 2));
  // Originals first, then copies grouped by original.
  for (std::size_t i = 0; i < 2; ++i) {
    for (int k = 0; k < 2; ++k) {
      const CsiSample& copy = out.samples[2 + i * 2 + k];
      CHECK(sample_checksum(copy) == sample_checksum(ds.samples[i]));
    }
  }
}

TEST_CASE("counts, labels and env ids scale and carry over") {
  Dataset ds = tiny_dataset(3, 4);
  DataAugConfig cfg;
  cfg.noise_std = 0.1f;
  cfg.copies_per_sample = 3;
  Dataset out = augment_gaussian(ds, cfg);
  REQUIRE(out.samples.size() == 4 * (1 + 3));

  // Originals preserved bit-exactly at the front.
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(sample_checksum(out.samples[i]) == sample_checksum(ds.samples[i]));
  }
  for (std::size_t i = 0; i < 4; ++i) {
    for (int k = 0; k < 3; ++k) {
      const CsiSample& copy = out.samples[4 + i * 3 + k];
      CHECK(copy.label == ds.samples[i].label);
      CHECK(copy.env_id == ds.samples[i].env_id);
      CHECK(sample_checksum(copy) != sample_checksum(ds.samples[i]));
    }
  }
}

TEST_CASE("copy residuals have the requested noise moments") {
  Dataset ds = tiny_dataset(4, 2);
  DataAugConfig cfg;
  cfg.noise_std = 0.1f;
  cfg.copies_per_sample = 1;
  cfg.seed = 9;
  Dataset out = augment_gaussian(ds, cfg);
  REQUIRE(out.samples.size() == 4);

  const double n = static_cast<double>(kChannels) * kPackets;
  for (std::size_t i = 0; i < 2; ++i) {
    const MatXd resid =
        (out.samples[2 + i].amplitude - ds.samples[i].amplitude).cast<double>();
    const double mean = resid.mean();
    const double sd = std::sqrt((resid.array() - mean).square().mean());
    CHECK(std::abs(mean) < 3.0 * 0.1 / std::sqrt(n));  // 3 sigma of the mean
    CHECK(sd == doctest::Approx(0.1).epsilon(0.02));
  }
  // Distinct originals draw from distinct forks.
  const auto r0 = (out.samples[2].amplitude - ds.samples[0].amplitude).eval();
  const auto r1 = (out.samples[3].amplitude - ds.samples[1].amplitude).eval();
  CHECK(r0 != r1);
}

TEST_CASE("augmentation is deterministic in the seed") {
  Dataset ds = tiny_dataset(5, 2);
  DataAugConfig cfg;
  cfg.noise_std = 0.2f;
  cfg.copies_per_sample = 2;
  cfg.seed = 11;
  Dataset a = augment_gaussian(ds, cfg);
  Dataset b = augment_gaussian(ds, cfg);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(sample_checksum(a.samples[i]) == sample_checksum(b.samples[i]));
  }
  cfg.seed = 12;
  Dataset c = augment_gaussian(ds, cfg);
  CHECK(sample_checksum(c.samples[2]) != sample_checksum(a.samples[2]));
}

TEST_CASE("default noise level is 5% of the global amplitude spread") {
  // One all-zero and one all-two sample: mean 1, variance 1, std 1 -> 0.05.
  Dataset ds;
  ds.num_classes = 1;
  CsiSample a, b;
  a.amplitude = AmpMatrix::Constant(kChannels, kPackets, 0.0f);
  b.amplitude = AmpMatrix::Constant(kChannels, kPackets, 2.0f);
  ds.samples = {a, b};
  CHECK(default_noise_std(ds) == doctest::Approx(0.05f).epsilon(1e-5));

  // The multi-dataset overload pools, it does not average per dataset.
  Dataset da, db;
  da.num_classes = db.num_classes = 1;
  da.samples = {a};
  db.samples = {b};
  CHECK(default_noise_std({&da, &db}) == doctest::Approx(0.05f).epsilon(1e-5));
}

TEST_CASE("unset noise_std resolves against the pre-noise statistics") {
  Dataset ds = tiny_dataset(6, 2);
  DataAugConfig implicit;
  implicit.copies_per_sample = 1;
  implicit.seed = 21;
  Dataset a = augment_gaussian(ds, implicit);

  DataAugConfig explicit_cfg = implicit;
  explicit_cfg.noise_std = default_noise_std(ds);
  Dataset b = augment_gaussian(ds, explicit_cfg);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(sample_checksum(a.samples[i]) == sample_checksum(b.samples[i]));
  }
}

TEST_CASE("error taxonomy") {
  Dataset ds = tiny_dataset(7, 1);

  DataAugConfig negative_copies;
  negative_copies.copies_per_sample = -1;
  negative_copies.noise_std = 0.1f;
  CHECK_THROWS_AS(augment_gaussian(ds, negative_copies), Error);

  DataAugConfig no_noise;
  no_noise.copies_per_sample = 1;
  Dataset mutable_ds = ds;
  try {
    append_gaussian_copies(mutable_ds, no_noise);
    FAIL("expected invalid_config");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidConfig);
  }

  DataAugConfig neg_noise;
  neg_noise.copies_per_sample = 1;
  neg_noise.noise_std = -0.5f;
  CHECK_THROWS_AS(augment_gaussian(ds, neg_noise), Error);

  Dataset empty;
  empty.num_classes = 1;
  try {
    default_noise_std(empty);
    FAIL("expected invalid_argument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
  }
}
