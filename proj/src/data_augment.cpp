#include "airfi/data_augment.hpp"

#include "airfi/rng.hpp"

#include <cmath>

namespace airfi {

namespace {

struct Moments {
  double sum = 0.0, sumsq = 0.0;
  std::uint64_t count = 0;

  void add(const Dataset& ds) {
    for (const CsiSample& s : ds.samples) {
      sum += s.amplitude.cast<double>().sum();
      sumsq += s.amplitude.cast<double>().array().square().sum();
      count += static_cast<std::uint64_t>(s.amplitude.size());
    }
  }

  float noise() const {
    if (count == 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "cannot derive noise level from an empty dataset");
    }
    const double n = static_cast<double>(count);
    const double mean = sum / n;
    const double var = std::max(0.0, sumsq / n - mean * mean);
    return 0.05f * static_cast<float>(std::sqrt(var));
  }
};

}  // namespace

float default_noise_std(const Dataset& ds) {
  Moments m;
  m.add(ds);
  return m.noise();
}

float default_noise_std(const std::vector<const Dataset*>& datasets) {
  Moments m;
  for (const Dataset* ds : datasets) {
    if (ds == nullptr) {
      throw Error(ErrorCode::kInvalidArgument, "null dataset pointer");
    }
    m.add(*ds);
  }
  return m.noise();
}

void append_gaussian_copies(Dataset& ds, const DataAugConfig& cfg) {
  if (cfg.copies_per_sample < 0) {
    throw Error(ErrorCode::kInvalidConfig, "copies_per_sample must be >= 0");
  }
  if (cfg.copies_per_sample == 0) return;
  if (!cfg.noise_std.has_value()) {
    throw Error(ErrorCode::kInvalidConfig,
                "append_gaussian_copies needs an explicit noise_std");
  }
  const float noise = *cfg.noise_std;
  if (!(noise >= 0.0f)) {
    throw Error(ErrorCode::kInvalidConfig, "noise_std must be >= 0");
  }

  const std::size_t n_orig = ds.samples.size();
  ds.samples.reserve(n_orig * (1 + cfg.copies_per_sample));
  const Rng root(cfg.seed);
  for (std::size_t i = 0; i < n_orig; ++i) {
    for (int k = 0; k < cfg.copies_per_sample; ++k) {
      Rng rng = root.fork("copy", static_cast<std::uint64_t>(i),
                          static_cast<std::uint64_t>(k));
      CsiSample copy = ds.samples[i];
      for (Eigen::Index r = 0; r < copy.amplitude.rows(); ++r) {
        for (Eigen::Index t = 0; t < copy.amplitude.cols(); ++t) {
          copy.amplitude(r, t) += noise * static_cast<float>(rng.normal());
        }
      }
      ds.samples.push_back(std::move(copy));
    }
  }
}

Dataset augment_gaussian(const Dataset& ds, const DataAugConfig& cfg) {
  Dataset out = ds;
  DataAugConfig resolved = cfg;
  if (!resolved.noise_std.has_value() && cfg.copies_per_sample > 0) {
    resolved.noise_std = default_noise_std(ds);
  }
  append_gaussian_copies(out, resolved);
  return out;
}

}  // namespace airfi
