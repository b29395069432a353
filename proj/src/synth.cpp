#include "airfi/synth.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace airfi {

namespace {

constexpr int kBursts = 3;
constexpr int kBandHalfWidth = 5;

// Burst waveforms are keyed to a small shared grid of time slots (cells
// wrap), so classes sharing a slot carry near-identical waveforms: burst
// timing, frequency, and shape alone cannot identify the class. What does
// identify it is WHERE on the subcarrier axis each burst lives -- a
// per-(class, burst) Gaussian bump whose grid has one cell per (class,
// burst) pair. Since the environment transform acts on the subcarrier axis,
// it is exactly this class-bearing structure that each environment reshapes,
// which is what makes cross-environment generalization a real problem
// instead of a free lunch.
constexpr int kCenterSlots = 6;
constexpr int kProfileSlots = 24;
constexpr double kProfileFloor = 0.12;

// Classes sharing a slot still differ (imperceptibly) in exact frequency and
// center, so no two templates are alike even before profiles are applied.
constexpr double kClassFreqEps = 1e-3;
constexpr double kClassCenterEps = 0.05;

// Frequency grid: one cycle per slot cell, jitter keeping the draw strictly
// inside the cell.
constexpr double kBaseFreq = 4.0;

// Environment parameter spreads. The mixing matrix realizes a smooth local
// warp of the subcarrier axis: row i is a normalized interpolation kernel
// centered at i + shift(i), scaled by a per-row gain. The shift field is a
// slow sinusoid whose amplitude is bounded well under the class-profile
// separation, so environments reshape and displace profile bumps hard enough
// to break fine, absolute readouts while never translating one class's bump
// onto its neighbor's slot -- every environment is consistently distorted,
// none is degenerate, and an invariant readout of the relative profile
// geometry remains achievable.
constexpr double kMixDiagMean = 0.85;   // per-row gain median
constexpr double kWarpAmpLo = 1.5;      // shift-field amplitude (subcarriers)
constexpr double kWarpAmpHi = 1.9;
// The shift field is piecewise-constant over profile cells and keyed to the
// cell index: cell p in environment e is displaced by amp * cycle[(p + e) %
// 4] with cycle = {+1, 0, -1, 0}, so environments render the class-bearing
// bumps at visibly different places and a small random residual keeps
// environments with the same key (ids four apart) distinct.
constexpr int kWarpCycleLen = 4;        // keys cycle every 4 env ids
constexpr double kWarpCycle[kWarpCycleLen] = {1.0, 0.0, -1.0, 0.0};
constexpr double kWarpResidualAmp = 0.25;
constexpr double kWarpResidualPeriodLo = 15.0;
constexpr double kWarpResidualPeriodHi = 40.0;
// Displacement alone does not break a conv net -- it reads through modest
// local warps -- and any single scalar severity (say SNR) cannot make
// every leave-one-out split hard, because three source values bracket the
// held-out one on a shared axis almost surely. So each environment is
// instead pushed to an extreme along its OWN degradation axis, one the
// others only occupy mildly: id % 4 == 0 raises the whole baseline by a
// constant plane, 1 raises the noise floor, 2 tilts the baseline by a linear
// ramp across the subcarriers, and 3 drops the global gain to the bottom of
// its range. Under leave-one-out training the held-out environment is then
// always novel along exactly the axis its sources never taught, whichever
// environment is held out. All four axes act identically on every class (no
// class's bumps are singled out), and each is the kind of nuisance the
// training stack can compensate: noisy augmentation copies span the noise
// axis and latent scale jitter spans the gain axis regardless of what the
// sources look like, while the baseline axes rely on the alignment losses --
// which can only enforce baseline-insensitive features if the sources
// themselves vary along the baseline directions. Every environment therefore
// carries a mild baseline shift and tilt of its own, with deterministic
// alternating signs, so whichever environment is held out, its sources span
// both baseline directions and invariance learned on them extrapolates to
// the held-out extreme. The mild values stay small next to the extremes so
// a plain classifier's incidental robustness does not close the gap.
constexpr double kKernelLo = 0.9;       // interpolation kernel width
constexpr double kKernelHi = 1.2;
constexpr double kNoiseLo = 0.6;        // noise multiplier spread
constexpr double kNoiseHi = 1.4;
constexpr double kNoiseExtreme = 3.6;   // axis-1 envs: raised noise floor
constexpr double kRipplePeriodLo = 8.0;   // gain-ripple wavelength (rows)
constexpr double kRipplePeriodHi = 12.0;
constexpr double kRippleDepth = 0.25;     // log-gain ripple amplitude
constexpr double kRowJitter = 0.10;     // iid log-gain residual
constexpr double kGainLo = 1.15;        // global gain spread
constexpr double kGainHi = 1.95;
constexpr double kGainExtremeLo = 0.55;  // axis-3 envs: faint signal
constexpr double kGainExtremeHi = 0.64;
constexpr double kOffsetStd = 0.40;
constexpr double kDcShiftExtreme = 0.9;  // axis-0 envs: shifted baseline
constexpr double kDcShiftMildLo = 0.15;  // everyone else: small signed shift
constexpr double kDcShiftMildHi = 0.35;
constexpr double kDcTiltExtreme = 5.2;   // axis-2 envs: tilted baseline
constexpr double kDcTiltMildLo = 0.8;    // everyone else: small signed tilt
constexpr double kDcTiltMildHi = 1.8;

}  // namespace

AmpMatrix class_template(int class_id, std::uint64_t seed) {
  if (class_id < 0) {
    throw Error(ErrorCode::kInvalidArgument, "class_id must be >= 0");
  }
  Rng rng = Rng(seed).fork("class_template", static_cast<std::uint64_t>(class_id));

  const double T = kPackets;
  double amp[kBursts], freq[kBursts], center[kBursts], width[kBursts];
  double prof_center[kBursts], prof_width[kBursts];
  double phase[kBursts][kAntennas];
  for (int k = 0; k < kBursts; ++k) {
    const int cell = kBursts * class_id + k;
    const int slot = cell % kCenterSlots;
    // Waveform parameters come from the slot stream, shared across classes.
    Rng srng = Rng(seed).fork("burst_slot", static_cast<std::uint64_t>(slot));
    amp[k] = srng.uniform(0.7, 1.3);
    freq[k] = kBaseFreq + slot + srng.uniform(0.2, 0.8) +
              kClassFreqEps * (class_id + 1);
    center[k] =
        T * (0.12 + 0.76 * (slot + srng.uniform(0.2, 0.8)) / kCenterSlots) +
        kClassCenterEps * (class_id + 1);
    width[k] = T * srng.uniform(1.0 / 14.0, 1.0 / 7.0);
    for (int a = 0; a < kAntennas; ++a) {
      phase[k][a] = srng.uniform(0.0, 2.0 * M_PI);
    }
    // Profile placement comes from the class stream: the discriminative bit.
    // The stride-5 permutation (5 is coprime to the cell count) scatters each
    // class's three bumps across the axis AND hands them three DISTINCT cell
    // keys mod 4. Under the keyed shift field this means every class has one
    // or two bumps at a novel displacement in every held-out environment --
    // degradation is spread over all classes instead of concentrated in a
    // few -- and no two classes keep a constant key offset across all three
    // bumps, which is the alignment a systematic cross-environment class swap
    // would need.
    const int pslot = (5 * cell) % kProfileSlots;
    prof_center[k] =
        kSubcarriers * (pslot + rng.uniform(0.3, 0.7)) / kProfileSlots;
    prof_width[k] = kSubcarriers * rng.uniform(0.012, 0.016);
  }

  // One waveform per (burst, antenna)...
  double wave[kBursts][kAntennas][kPackets];
  for (int k = 0; k < kBursts; ++k) {
    for (int a = 0; a < kAntennas; ++a) {
      for (int t = 0; t < kPackets; ++t) {
        const double dt = t - center[k];
        const double envelope = std::exp(-0.5 * dt * dt / (width[k] * width[k]));
        wave[k][a][t] = amp[k] *
                        std::sin(2.0 * M_PI * freq[k] * t / T + phase[k][a]) *
                        envelope;
      }
    }
  }

  // ...scaled per subcarrier by the burst's profile bump. Every row is a
  // linear combination of the same three burst waveforms, so for any fixed
  // antenna the template has rank <= 3 across subcarriers.
  AmpMatrix out(kChannels, kPackets);
  for (int s = 0; s < kSubcarriers; ++s) {
    double p[kBursts];
    for (int k = 0; k < kBursts; ++k) {
      const double ds = (s - prof_center[k]) / prof_width[k];
      p[k] = kProfileFloor + (1.0 - kProfileFloor) * std::exp(-0.5 * ds * ds);
    }
    for (int a = 0; a < kAntennas; ++a) {
      for (int t = 0; t < kPackets; ++t) {
        out(s * kAntennas + a, t) = static_cast<float>(
            p[0] * wave[0][a][t] + p[1] * wave[1][a][t] + p[2] * wave[2][a][t]);
      }
    }
  }
  return out;
}

EnvParams draw_env_params(int env_id, const GenConfig& cfg) {
  if (env_id < 0) {
    throw Error(ErrorCode::kInvalidArgument, "env_id must be >= 0");
  }
  Rng rng = Rng(cfg.seed).fork("env_params", static_cast<std::uint64_t>(env_id));

  EnvParams env;
  env.env_id = env_id;
  env.mixing = MatXf::Zero(kSubcarriers, kSubcarriers);
  const int axis = env_id % 4;
  const double warp_amp = rng.uniform(kWarpAmpLo, kWarpAmpHi);
  const double res_period =
      rng.uniform(kWarpResidualPeriodLo, kWarpResidualPeriodHi);
  const double res_phase = rng.uniform(0.0, 2.0 * M_PI);
  const double kernel_w = rng.uniform(kKernelLo, kKernelHi);
  const double ripple_period = rng.uniform(kRipplePeriodLo, kRipplePeriodHi);
  const double ripple_phase = rng.uniform(0.0, 2.0 * M_PI);
  for (int i = 0; i < kSubcarriers; ++i) {
    const int lo = std::max(0, i - kBandHalfWidth);
    const int hi = std::min(kSubcarriers - 1, i + kBandHalfWidth);
    const int cell = i * kProfileSlots / kSubcarriers;
    const double shift =
        warp_amp * kWarpCycle[(cell + env_id) % kWarpCycleLen] +
        kWarpResidualAmp * std::sin(2.0 * M_PI * i / res_period + res_phase);
    const double log_gain =
        kRippleDepth *
            std::sin(2.0 * M_PI * i / ripple_period + ripple_phase) +
        kRowJitter * rng.normal();
    const double row_gain = kMixDiagMean * std::exp(log_gain);
    double w[2 * kBandHalfWidth + 1];
    double mass = 0.0;
    for (int j = lo; j <= hi; ++j) {
      const double d = (j - i - shift) / kernel_w;
      w[j - lo] = std::exp(-0.5 * d * d);
      mass += w[j - lo];
    }
    for (int j = lo; j <= hi; ++j) {
      env.mixing(i, j) = static_cast<float>(row_gain * w[j - lo] / mass);
    }
  }
  env.gain = static_cast<float>(axis == 3
                                    ? rng.uniform(kGainExtremeLo, kGainExtremeHi)
                                    : rng.uniform(kGainLo, kGainHi));
  // Baseline shift/tilt signs alternate deterministically over env ids so any
  // three-source subset exhibits both directions of each baseline axis.
  const double shift_sign = (env_id % 2 == 0) ? 1.0 : -1.0;
  const double tilt_sign = ((env_id / 2) % 2 == 0) ? 1.0 : -1.0;
  double dc_shift = shift_sign * rng.uniform(kDcShiftMildLo, kDcShiftMildHi);
  double dc_tilt = tilt_sign * rng.uniform(kDcTiltMildLo, kDcTiltMildHi);
  if (axis == 0) dc_shift = shift_sign * kDcShiftExtreme;
  if (axis == 2) dc_tilt = tilt_sign * kDcTiltExtreme;
  env.offset.resize(kSubcarriers);
  for (int i = 0; i < kSubcarriers; ++i) {
    const double base_line =
        dc_shift +
        dc_tilt * (static_cast<double>(i) / (kSubcarriers - 1) - 0.5);
    env.offset[i] = static_cast<float>(base_line + rng.normal(0.0, kOffsetStd));
  }
  env.noise_std =
      cfg.env_noise_std *
      static_cast<float>(axis == 1 ? kNoiseExtreme
                                   : rng.uniform(kNoiseLo, kNoiseHi));
  return env;
}

AmpMatrix apply_environment(const AmpMatrix& base, const EnvParams& env,
                            Rng& rng) {
  if (base.rows() != kChannels) {
    throw Error(ErrorCode::kShapeMismatch, "base trace must have 342 rows");
  }
  const Eigen::Index T = base.cols();
  AmpMatrix out(kChannels, T);

  // Antenna a occupies rows a, a+3, a+6, ... ; map them as a strided view so
  // the mixing acts on the subcarrier axis only.
  using Strided = Eigen::Map<const RowMatX<float>, Eigen::Unaligned,
                             Eigen::OuterStride<>>;
  using StridedOut =
      Eigen::Map<RowMatX<float>, Eigen::Unaligned, Eigen::OuterStride<>>;
  for (int a = 0; a < kAntennas; ++a) {
    Strided base_a(base.data() + static_cast<std::ptrdiff_t>(a) * T,
                   kSubcarriers, T, Eigen::OuterStride<>(kAntennas * T));
    StridedOut out_a(out.data() + static_cast<std::ptrdiff_t>(a) * T,
                     kSubcarriers, T, Eigen::OuterStride<>(kAntennas * T));
    out_a = env.gain * (env.mixing * base_a);
    out_a.colwise() += env.offset;
  }

  for (int r = 0; r < kChannels; ++r) {
    for (Eigen::Index t = 0; t < T; ++t) {
      out(r, t) += env.noise_std * static_cast<float>(rng.normal());
    }
  }
  return out;
}

Dataset generate_dataset(const GenConfig& cfg) {
  if (cfg.num_envs < 1 || cfg.num_classes < 1 ||
      cfg.samples_per_class_per_env < 0 || cfg.env_noise_std < 0.0f) {
    throw Error(ErrorCode::kInvalidConfig, "bad generator config");
  }
  Rng root(cfg.seed);

  std::vector<AmpMatrix> templates;
  templates.reserve(cfg.num_classes);
  for (int c = 0; c < cfg.num_classes; ++c) {
    templates.push_back(class_template(c, cfg.seed));
  }

  Dataset ds;
  ds.num_classes = cfg.num_classes;
  ds.manifest_meta["generator"] = "synthetic-multienv";
  ds.manifest_meta["seed"] = std::to_string(cfg.seed);
  ds.samples.reserve(static_cast<std::size_t>(cfg.num_envs) * cfg.num_classes *
                     cfg.samples_per_class_per_env);

  for (int n = 0; n < cfg.num_envs; ++n) {
    const EnvParams env = draw_env_params(n, cfg);
    for (int c = 0; c < cfg.num_classes; ++c) {
      for (int i = 0; i < cfg.samples_per_class_per_env; ++i) {
        Rng sample_rng = root.fork("sample", static_cast<std::uint64_t>(n),
                                   static_cast<std::uint64_t>(c),
                                   static_cast<std::uint64_t>(i));
        CsiSample s;
        s.amplitude = apply_environment(templates[c], env, sample_rng);
        s.label = c;
        s.env_id = n;
        ds.samples.push_back(std::move(s));
      }
    }
  }
  return ds;
}

}  // namespace airfi
