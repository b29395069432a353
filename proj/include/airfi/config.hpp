#ifndef AIRFI_CONFIG_HPP
#define AIRFI_CONFIG_HPP

#include "airfi/data_augment.hpp"
#include "airfi/feat_augment.hpp"
#include "airfi/nn/nets.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace airfi {

struct TrainConfig {
  float w_ad = 0.1f;
  float w_re = 1.0f;
  float w_mmd = 1.0f;
  float w_ce = 1.0f;
  int steps = 300;
  int batch_per_env = 32;
  float lr = 1e-3f;
  std::uint64_t seed = 0;
  int d_steps = 1;  // discriminator ascent iterations per step
  int g_steps = 1;  // joint descent iterations per step
};

struct DgConfig {
  std::optional<float> gamma;       // fixed kernel bandwidth when set
  int recompute_gamma_every = 50;   // median-heuristic refresh period
};

struct FewShotConfig {
  int k = 10;                // total target samples, round-robin over classes
  int adapt_steps = 50;
  float lr = 3e-4f;
  int reservoir = 512;       // source samples cached for the alignment term
  std::uint64_t seed = 0;
};

struct ModelConfig {
  EncoderSpec encoder;
  PriorSpec prior;
  DiscriminatorSpec disc;
  ClassifierSpec clf;
};

struct PipelineConfig {
  ModelConfig model;
  TrainConfig train;
  DataAugConfig data_aug;
  FeatAugConfig feat_aug;
  DgConfig dg;
  FewShotConfig fewshot;
};

// Flat JSON object with dotted keys ("train.lr": 0.001, ...). Unknown keys or
// wrong types raise kInvalidConfig. Fields not mentioned keep their defaults.
PipelineConfig parse_config_json(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

// Canonical dump: every key, sorted, null for unset optionals. Two configs
// are behaviorally identical iff their dumps match.
std::string dump_config_json(const PipelineConfig& cfg);

// Hex FNV-1a of the canonical dump; stored in checkpoints.
std::string config_fingerprint(const PipelineConfig& cfg);

}  // namespace airfi

#endif  // AIRFI_CONFIG_HPP
