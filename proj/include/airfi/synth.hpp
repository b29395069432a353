#ifndef AIRFI_SYNTH_HPP
#define AIRFI_SYNTH_HPP

#include "airfi/common.hpp"
#include "airfi/csi.hpp"
#include "airfi/rng.hpp"

#include <cstdint>

namespace airfi {

// Multi-environment synthetic CSI generator. Class identity lives on the time
// axis (burst frequencies / positions); environment identity lives on the
// subcarrier axis (band-limited mixing, gain, offset), so an
// environment-invariant representation exists but a naive per-subcarrier fit
// does not transfer.

struct GenConfig {
  int num_envs = 4;
  int num_classes = 8;
  int samples_per_class_per_env = 50;
  std::uint64_t seed = 42;
  float env_noise_std = 0.25f;  // base additive noise level, scaled per env
};

struct EnvParams {
  int env_id = 0;
  MatXf mixing;        // [114 x 114], exactly 0 outside |i - j| <= 5
  float gain = 1.0f;   // in [0.5, 2.0]
  VecXf offset;        // [114]
  float noise_std = 0.0f;
};

// Base trace for one gesture class: a sum of three enveloped sinusoidal
// bursts, identical across subcarriers, with per-antenna phase. Burst
// frequencies and centers come from non-overlapping per-class grid cells, so
// distinct classes never share a frequency slot.
AmpMatrix class_template(int class_id, std::uint64_t seed);

EnvParams draw_env_params(int env_id, const GenConfig& cfg);

// out[:, a, t] = gain * (mixing @ base[:, a, t]) + offset + noise, noise drawn
// elementwise from rng as N(0, noise_std^2).
AmpMatrix apply_environment(const AmpMatrix& base, const EnvParams& env,
                            Rng& rng);

// Samples ordered by (env, class, index); labels/env ids set accordingly.
// Same config => bit-identical dataset.
Dataset generate_dataset(const GenConfig& cfg);

}  // namespace airfi

#endif  // AIRFI_SYNTH_HPP
