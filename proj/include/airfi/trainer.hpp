#ifndef AIRFI_TRAINER_HPP
#define AIRFI_TRAINER_HPP

#include "airfi/config.hpp"
#include "airfi/data_augment.hpp"
#include "airfi/mmd.hpp"
#include "airfi/model.hpp"
#include "airfi/nn/losses.hpp"

#include <algorithm>
#include <optional>
#include <utility>
#include <vector>

namespace airfi {

// Per-step loss values. l_mmd is the unsquared pairwise report; the squared
// variant is what the optimizer actually descends on. total re-weights the
// reported terms with the configured loss weights.
struct LossReport {
  int step = 0;
  double l_ce = 0;
  double l_re = 0;
  double l_ad = 0;
  double l_mmd = 0;
  double total = 0;
};

template <typename S>
struct DomainBatch {
  int env_id = 0;
  ConvBatch<S> x;
  VecXi labels;
};

// Stochastic inputs of one joint pass, fixed by the caller so the analytic
// gradient can be checked against finite differences of the same objective.
template <typename S>
struct AugDraws {
  MatX<S> alpha, beta, eps;
};

template <typename S>
struct JointLosses {
  S l_ce = 0;      // cross entropy of F(z')
  S l_re = 0;      // summed per-env mean squared reconstruction of P(z)
  S l_mmd_sq = 0;  // squared pairwise alignment loss on z' (optimized)
  S l_mmd = 0;     // unsquared pairwise alignment loss on z' (reported)
  S l_gen = 0;     // -E[log D(z)], the non-saturating generator term
};

template <typename S>
S joint_objective(const JointLosses<S>& l, const TrainConfig& tc) {
  return static_cast<S>(tc.w_ce) * l.l_ce + static_cast<S>(tc.w_mmd) * l.l_mmd_sq +
         static_cast<S>(tc.w_re) * l.l_re + static_cast<S>(tc.w_ad) * l.l_gen;
}

namespace detail {

// Concatenated view of per-domain batches: spans[i] = (row offset, rows).
template <typename S>
struct FlatBatches {
  ConvBatch<S> x;
  VecXi labels;
  std::vector<std::pair<int, int>> spans;
};

template <typename S>
FlatBatches<S> flatten_batches(const std::vector<DomainBatch<S>>& batches) {
  if (batches.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no domain batches");
  }
  FlatBatches<S> f;
  int total = 0;
  for (const auto& b : batches) {
    if (b.x.batch < 1) {
      throw Error(ErrorCode::kInvalidArgument, "empty domain batch");
    }
    if (b.labels.size() != b.x.batch) {
      throw Error(ErrorCode::kShapeMismatch, "labels/batch mismatch");
    }
    f.spans.emplace_back(total, b.x.batch);
    total += b.x.batch;
  }
  const int ch = batches[0].x.channels;
  const int time = batches[0].x.time;
  f.x.batch = total;
  f.x.channels = ch;
  f.x.time = time;
  f.x.data.resize(ch, static_cast<Eigen::Index>(total) * time);
  f.labels.resize(total);
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const auto& b = batches[i];
    if (b.x.channels != ch || b.x.time != time) {
      throw Error(ErrorCode::kShapeMismatch, "domain batches disagree on shape");
    }
    f.x.data.middleCols(
        static_cast<Eigen::Index>(f.spans[i].first) * time,
        static_cast<Eigen::Index>(b.x.batch) * time) = b.x.data;
    f.labels.segment(f.spans[i].first, b.x.batch) = b.labels;
  }
  return f;
}

}  // namespace detail

// One joint forward (and optional backward) over the concatenated batch:
//   z  = Q(x)            codes
//   z' = a.*z + b + eps   (identity when draws == nullptr)
//   objective = w_ce*CE(F(z')) + w_mmd*MMD2(z' by env) + w_re*RE(P(z))
//               + w_ad*(-E log D(z))
// Gradients flow into encoder/decoder/classifier grads; discriminator
// parameter grads are clobbered as a by-product of the pass-through and are
// re-zeroed by the discriminator phase. Zero-weight terms still produce
// values but skip their backward work.
//
// When z/cache are supplied they must come from a forward of `model.encoder`
// on `x` with unchanged parameters; otherwise the encoder runs here.
template <typename S>
JointLosses<S> evaluate_joint(Model<S>& model, const ConvBatch<S>& x,
                              const std::vector<std::pair<int, int>>& spans,
                              const VecXi& labels, const TrainConfig& tc,
                              S gamma, const AugDraws<S>* draws,
                              bool want_grads, const MatX<S>* z_in = nullptr,
                              EncoderCache<S>* cache_in = nullptr) {
  EncoderCache<S> local_cache;
  EncoderCache<S>* cache = nullptr;
  MatX<S> z;
  if (z_in != nullptr) {
    if (want_grads && cache_in == nullptr) {
      throw Error(ErrorCode::kInvalidArgument,
                  "precomputed codes need their encoder cache for backward");
    }
    cache = cache_in;
    z = *z_in;
  } else {
    cache = want_grads ? &local_cache : nullptr;
    z = model.encoder.forward(x, cache);
  }
  const Eigen::Index B = z.rows();

  MatX<S> zprime =
      draws != nullptr
          ? MatX<S>(draws->alpha.cwiseProduct(z) + draws->beta + draws->eps)
          : z;

  JointLosses<S> out;

  // Classification on augmented codes.
  MlpCache<S> clf_cache;
  const bool ce_bwd = want_grads && tc.w_ce != 0;
  MatX<S> logits = model.clf.forward(zprime, ce_bwd ? &clf_cache : nullptr);
  MatX<S> probs = softmax_rows(logits);
  out.l_ce = cross_entropy(probs, labels);

  // Alignment across environments, on augmented codes.
  std::vector<MatX<S>> domains;
  domains.reserve(spans.size());
  for (const auto& [off, cnt] : spans) domains.push_back(zprime.middleRows(off, cnt));
  std::vector<MatX<S>> mmd_grads;
  const bool mmd_bwd = want_grads && tc.w_mmd != 0;
  out.l_mmd_sq =
      mmd_sq_loss_with_grad<S>(domains, gamma, mmd_bwd ? &mmd_grads : nullptr);
  out.l_mmd = mmd_loss<S>(domains, gamma);

  // Reconstruction from raw codes.
  const bool re_bwd = want_grads && tc.w_re != 0;
  DecoderCache<S> dec_cache;
  ConvBatch<S> xhat = model.decoder.forward(z, re_bwd ? &dec_cache : nullptr);
  const int T = x.time;
  for (const auto& [off, cnt] : spans) {
    ConvBatch<S> hs{xhat.data.middleCols(static_cast<Eigen::Index>(off) * T,
                                         static_cast<Eigen::Index>(cnt) * T),
                    cnt, xhat.channels, T};
    ConvBatch<S> xs{x.data.middleCols(static_cast<Eigen::Index>(off) * T,
                                      static_cast<Eigen::Index>(cnt) * T),
                    cnt, x.channels, T};
    out.l_re += reconstruction_loss(hs, xs);
  }

  // Generator's adversarial term on raw codes.
  const bool ad_bwd = want_grads && tc.w_ad != 0;
  MlpCache<S> disc_cache;
  MatX<S> dlogits_fwd = model.disc.forward(z, ad_bwd ? &disc_cache : nullptr);
  out.l_gen = -disc_probs(dlogits_fwd).array().log().mean();

  if (!want_grads) return out;

  MatX<S> dzprime = MatX<S>::Zero(B, z.cols());
  if (ce_bwd) {
    MatX<S> dlog = probs;
    for (Eigen::Index r = 0; r < B; ++r) dlog(r, labels[r]) -= S(1);
    dlog *= static_cast<S>(tc.w_ce) / static_cast<S>(B);
    dzprime += model.clf.backward(clf_cache, dlog);
  }
  if (mmd_bwd) {
    for (std::size_t i = 0; i < spans.size(); ++i) {
      dzprime.middleRows(spans[i].first, spans[i].second) +=
          static_cast<S>(tc.w_mmd) * mmd_grads[i];
    }
  }

  MatX<S> dz = draws != nullptr ? MatX<S>(dzprime.cwiseProduct(draws->alpha))
                                : std::move(dzprime);

  if (re_bwd) {
    ConvBatch<S> dxhat;
    dxhat.batch = xhat.batch;
    dxhat.channels = xhat.channels;
    dxhat.time = xhat.time;
    dxhat.data.resize(xhat.data.rows(), xhat.data.cols());
    for (const auto& [off, cnt] : spans) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(off) * T;
      const Eigen::Index cn = static_cast<Eigen::Index>(cnt) * T;
      dxhat.data.middleCols(c0, cn) =
          (xhat.data.middleCols(c0, cn) - x.data.middleCols(c0, cn)) *
          (S(2) * static_cast<S>(tc.w_re) / static_cast<S>(cnt));
    }
    dz += model.decoder.backward(dec_cache, dxhat);
  }
  if (ad_bwd) {
    // d/dlogit of -mean log sigmoid = (sigmoid - 1) / B
    MatX<S> dlog = (sigmoid(dlogits_fwd).array() - S(1)).matrix() *
                   (static_cast<S>(tc.w_ad) / static_cast<S>(B));
    dz += model.disc.backward(disc_cache, dlog);
  }
  model.encoder.backward(*cache, dz);
  return out;
}

// ---------------------------------------------------------------------------
// Step driver. One step runs, in order:
//   1. encode all domain batches
//   2. d_steps discriminator ascents on (prior draws, frozen codes)
//   3. g_steps times: feature augmentation + covariance update, then a joint
//      descent of the weighted objective w.r.t. encoder/decoder/classifier
// The kernel bandwidth refreshes from the current augmented codes every
// dg.recompute_gamma_every steps unless dg.gamma pins it.
template <typename S>
class Trainer {
 public:
  Trainer(Model<S>& model, const PipelineConfig& cfg)
      : model_(&model),
        cfg_(cfg),
        gen_params_(model.generator_params()),
        disc_params_(model.disc_params()),
        opt_g_(static_cast<S>(cfg.train.lr)),
        opt_d_(static_cast<S>(cfg.train.lr)),
        gamma_(cfg.dg.gamma.has_value() ? static_cast<S>(*cfg.dg.gamma) : S(1)) {}

  S gamma() const { return gamma_; }

  LossReport step(const std::vector<DomainBatch<S>>& batches, int step_index,
                  Rng& rng) {
    auto flat = detail::flatten_batches(batches);
    const int B = flat.x.batch;
    const int dz_dim = model_->cfg.encoder.latent_dim;

    EncoderCache<S> cache;
    MatX<S> z = model_->encoder.forward(flat.x, &cache);

    LossReport rep;
    rep.step = step_index;

    // -- discriminator phase (codes fixed)
    for (int di = 0; di < std::max(1, cfg_.train.d_steps); ++di) {
      const bool update = di < cfg_.train.d_steps;
      MatX<S> h = sample_prior<S>(B, dz_dim, model_->cfg.prior, rng);
      MlpCache<S> ch, cz;
      MatX<S> lh = model_->disc.forward(h, update ? &ch : nullptr);
      MatX<S> lz = model_->disc.forward(z, update ? &cz : nullptr);
      if (di == 0) {
        rep.l_ad = adversarial_loss(MatX<S>(disc_probs(lh)), MatX<S>(disc_probs(lz)));
      }
      if (!update) break;
      // Ascend l_ad: descend its negation.
      MatX<S> dlh =
          -(S(1) - sigmoid(lh).array()).matrix() / static_cast<S>(B);
      MatX<S> dlz = sigmoid(lz) / static_cast<S>(B);
      zero_grads(disc_params_);
      model_->disc.backward(ch, dlh);
      model_->disc.backward(cz, dlz);
      opt_d_.step(disc_params_);
    }

    // -- augmentation + joint phase
    for (int gi = 0; gi < cfg_.train.g_steps; ++gi) {
      if (gi > 0) z = model_->encoder.forward(flat.x, &cache);

      std::optional<AugDraws<S>> draws;
      MatX<S> zprime;
      if (cfg_.feat_aug.enabled) {
        draws.emplace();
        sample_scale_bias(z.rows(), z.cols(), static_cast<S>(cfg_.feat_aug.sigma),
                          rng, draws->alpha, draws->beta);
        draws->eps = sample_regularizer(flat.labels, model_->covariance, rng);
        zprime = draws->alpha.cwiseProduct(z) + draws->beta + draws->eps;
        update_class_covariance(model_->covariance, zprime, flat.labels,
                                static_cast<S>(cfg_.feat_aug.lambda));
      } else {
        zprime = z;
      }

      if (gi == 0 && !cfg_.dg.gamma.has_value() &&
          step_index % cfg_.dg.recompute_gamma_every == 0) {
        gamma_ = median_heuristic_gamma<S>(zprime);
      }

      zero_grads(gen_params_);
      JointLosses<S> jl = evaluate_joint<S>(
          *model_, flat.x, flat.spans, flat.labels, cfg_.train, gamma_,
          draws.has_value() ? &*draws : nullptr, true, &z, &cache);
      opt_g_.step(gen_params_);
      if (gi == 0) {
        rep.l_ce = jl.l_ce;
        rep.l_re = jl.l_re;
        rep.l_mmd = jl.l_mmd;
      }
    }
    if (cfg_.train.g_steps == 0) {
      // Values still get reported even though nothing moves.
      JointLosses<S> jl =
          evaluate_joint<S>(*model_, flat.x, flat.spans, flat.labels,
                            cfg_.train, gamma_, nullptr, false, &z, &cache);
      rep.l_ce = jl.l_ce;
      rep.l_re = jl.l_re;
      rep.l_mmd = jl.l_mmd;
    }

    rep.total = cfg_.train.w_ce * rep.l_ce + cfg_.train.w_re * rep.l_re +
                cfg_.train.w_mmd * rep.l_mmd + cfg_.train.w_ad * rep.l_ad;
    return rep;
  }

 private:
  Model<S>* model_;
  PipelineConfig cfg_;
  std::vector<ParamRef<S>> gen_params_, disc_params_;
  Adam<S> opt_g_, opt_d_;
  S gamma_;
};

namespace detail {

// Epoch-reshuffled, without-replacement index stream over one environment.
struct BatchSampler {
  std::vector<int> order;
  std::size_t pos = 0;
  Rng rng;

  BatchSampler(int n, Rng r) : rng(r) {
    order.resize(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    reshuffle();
  }

  void reshuffle() {
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = rng.next_u64() % i;
      std::swap(order[i - 1], order[j]);
    }
    pos = 0;
  }

  std::vector<int> next(int n) {
    if (static_cast<std::size_t>(n) > order.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "batch_per_env exceeds the environment's sample count");
    }
    if (pos + n > order.size()) reshuffle();
    std::vector<int> out(order.begin() + pos, order.begin() + pos + n);
    pos += n;
    return out;
  }
};

}  // namespace detail

template <typename S>
struct TrainResult {
  TrainedModel<S> model;
  std::vector<LossReport> curve;
};

// Full training pass over >= 2 source environments. The target environment
// never enters: normalization stats come from the source originals, data
// augmentation happens per source env, and the reservoir snapshots normalized
// source originals for later few-shot alignment.
template <typename S>
TrainResult<S> train(std::vector<Dataset> source_envs,
                     const PipelineConfig& cfg) {
  if (source_envs.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "domain generalization needs >= 2 source environments");
  }
  if (cfg.train.batch_per_env < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "batch_per_env must be >= 2 (covariance updates need m >= 2)");
  }
  const int C = source_envs[0].num_classes;
  std::vector<int> env_ids;
  for (const Dataset& ds : source_envs) {
    if (ds.samples.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "empty source environment");
    }
    if (ds.num_classes != C) {
      throw Error(ErrorCode::kInvalidArgument,
                  "source environments disagree on num_classes");
    }
    const auto ids = ds.env_ids();
    if (ids.size() != 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "each source dataset must hold exactly one environment");
    }
    env_ids.push_back(*ids.begin());
  }
  {
    std::set<int> distinct(env_ids.begin(), env_ids.end());
    if (distinct.size() != env_ids.size()) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate source env ids");
    }
  }

  std::vector<std::size_t> orig_counts;
  std::vector<const Dataset*> ptrs;
  for (const Dataset& ds : source_envs) {
    orig_counts.push_back(ds.samples.size());
    ptrs.push_back(&ds);
  }
  const NormStats stats = compute_norm_stats(ptrs);

  const Rng root(cfg.train.seed);
  if (cfg.data_aug.copies_per_sample > 0) {
    const float noise = cfg.data_aug.noise_std.has_value()
                            ? *cfg.data_aug.noise_std
                            : default_noise_std(ptrs);
    for (std::size_t i = 0; i < source_envs.size(); ++i) {
      DataAugConfig ac;
      ac.noise_std = noise;
      ac.copies_per_sample = cfg.data_aug.copies_per_sample;
      ac.seed = root.fork("data_aug", static_cast<std::uint64_t>(i)).seed();
      append_gaussian_copies(source_envs[i], ac);
    }
  }
  for (Dataset& ds : source_envs) normalize_in_place(ds, stats);

  Model<S> model;
  model.init(cfg.model, C, root.fork("model").seed());
  Trainer<S> trainer(model, cfg);

  std::vector<detail::BatchSampler> samplers;
  for (std::size_t i = 0; i < source_envs.size(); ++i) {
    samplers.emplace_back(static_cast<int>(source_envs[i].samples.size()),
                          root.fork("batch", static_cast<std::uint64_t>(i)));
  }

  std::vector<LossReport> curve;
  curve.reserve(cfg.train.steps);
  for (int step = 0; step < cfg.train.steps; ++step) {
    std::vector<DomainBatch<S>> batches;
    batches.reserve(source_envs.size());
    for (std::size_t i = 0; i < source_envs.size(); ++i) {
      const auto idx = samplers[i].next(cfg.train.batch_per_env);
      std::vector<const CsiSample*> chosen;
      chosen.reserve(idx.size());
      VecXi labels(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t k = 0; k < idx.size(); ++k) {
        chosen.push_back(&source_envs[i].samples[idx[k]]);
        labels[static_cast<Eigen::Index>(k)] =
            source_envs[i].samples[idx[k]].label;
      }
      batches.push_back(
          {env_ids[i], make_batch<S>(chosen), std::move(labels)});
    }
    Rng srng = root.fork("step", static_cast<std::uint64_t>(step));
    curve.push_back(trainer.step(batches, step, srng));
  }

  TrainResult<S> out;
  out.model.model = std::move(model);
  out.model.norm_stats = stats;
  out.model.gamma = trainer.gamma();
  out.model.source_env_ids = env_ids;
  out.model.fingerprint = config_fingerprint(cfg);
  out.curve = std::move(curve);

  // Few-shot reservoir: seeded subset of the normalized source originals.
  std::vector<std::pair<std::size_t, std::size_t>> pool;
  for (std::size_t i = 0; i < source_envs.size(); ++i) {
    for (std::size_t k = 0; k < orig_counts[i]; ++k) pool.emplace_back(i, k);
  }
  Rng rrng = root.fork("reservoir");
  for (std::size_t i = pool.size(); i > 1; --i) {
    std::swap(pool[i - 1], pool[rrng.next_u64() % i]);
  }
  const std::size_t R =
      std::min<std::size_t>(pool.size(), static_cast<std::size_t>(cfg.fewshot.reservoir));
  const Eigen::Index feat = static_cast<Eigen::Index>(kChannels) * kPackets;
  out.model.reservoir.resize(static_cast<Eigen::Index>(R), feat);
  for (std::size_t r = 0; r < R; ++r) {
    const AmpMatrix& amp =
        source_envs[pool[r].first].samples[pool[r].second].amplitude;
    out.model.reservoir.row(static_cast<Eigen::Index>(r)) =
        Eigen::Map<const Eigen::VectorXf>(amp.data(), amp.size())
            .cast<S>()
            .transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Few-shot adaptation: k labeled target samples, round-robin over classes,
// descend L_f = MMD(source reservoir codes, target codes) + CE(target) w.r.t.
// encoder and classifier only. Gradients flow through both MMD sides; the
// reservoir is re-encoded with the current encoder every step.

template <typename S>
struct FewShotLoss {
  S l_mmd = 0;  // unsquared MMD between reservoir codes and target codes
  S l_ce = 0;
  S total() const { return l_mmd + l_ce; }
};

// Seeded shuffle, then cycle over classes (ascending) picking the next unused
// sample of each; guarantees the most even class coverage k allows.
inline std::vector<int> select_fewshot(const std::vector<CsiSample>& pool,
                                       int k, std::uint64_t seed) {
  if (pool.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty few-shot pool");
  }
  std::vector<int> idx(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) idx[i] = static_cast<int>(i);
  Rng rng = Rng(seed).fork("fewshot_select");
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::swap(idx[i - 1], idx[rng.next_u64() % i]);
  }
  std::map<int, std::vector<int>> by_class;
  for (int i : idx) by_class[pool[i].label].push_back(i);

  std::vector<int> out;
  const int want = std::min<int>(k, static_cast<int>(pool.size()));
  std::size_t round = 0;
  while (static_cast<int>(out.size()) < want) {
    bool any = false;
    for (auto& [label, list] : by_class) {
      if (round < list.size()) {
        out.push_back(list[round]);
        any = true;
        if (static_cast<int>(out.size()) == want) break;
      }
    }
    if (!any) break;
    ++round;
  }
  return out;
}

// Loss of the current model on an already-normalized target batch; the
// composition the adaptation loop descends.
template <typename S>
FewShotLoss<S> fewshot_loss(const TrainedModel<S>& tm,
                            const ConvBatch<S>& targets, const VecXi& labels) {
  const auto& spec = tm.model.cfg.encoder;
  ConvBatch<S> res =
      batch_from_rows<S>(tm.reservoir, spec.input_channels, spec.input_time);
  MatX<S> zs = tm.model.encoder.forward(res, nullptr);
  MatX<S> zt = tm.model.encoder.forward(targets, nullptr);
  FewShotLoss<S> out;
  out.l_mmd = mmd<S>(zs, zt, tm.gamma);
  MatX<S> probs = softmax_rows(tm.model.clf.forward(zt, nullptr));
  out.l_ce = cross_entropy(probs, labels);
  return out;
}

template <typename S>
struct FewShotResult {
  TrainedModel<S> model;
  std::vector<LossReport> curve;  // l_mmd = unsquared pair MMD, total = L_f
};

template <typename S>
FewShotResult<S> fewshot_adapt(const TrainedModel<S>& tm,
                               const std::vector<CsiSample>& target_pool,
                               const FewShotConfig& fs) {
  if (tm.reservoir.rows() < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "model carries no few-shot reservoir");
  }
  const std::vector<int> picked = select_fewshot(target_pool, fs.k, fs.seed);

  FewShotResult<S> out;
  out.model = tm;
  Model<S>& model = out.model.model;

  std::vector<const CsiSample*> chosen;
  VecXi labels(static_cast<Eigen::Index>(picked.size()));
  std::vector<CsiSample> normalized;
  normalized.reserve(picked.size());
  for (std::size_t i = 0; i < picked.size(); ++i) {
    const CsiSample& s = target_pool[picked[i]];
    if (s.label < 0 || s.label >= model.num_classes) {
      throw Error(ErrorCode::kInvalidArgument, "few-shot label out of range");
    }
    normalized.push_back(normalize_sample(s, tm.norm_stats));
    labels[static_cast<Eigen::Index>(i)] = s.label;
  }
  for (const CsiSample& s : normalized) chosen.push_back(&s);
  ConvBatch<S> targets = make_batch<S>(chosen);

  const auto& spec = model.cfg.encoder;
  ConvBatch<S> res =
      batch_from_rows<S>(tm.reservoir, spec.input_channels, spec.input_time);
  const int R = res.batch;
  const int K = targets.batch;

  // Combined batch: reservoir block then target block.
  ConvBatch<S> both;
  both.batch = R + K;
  both.channels = res.channels;
  both.time = res.time;
  both.data.resize(res.data.rows(), res.data.cols() + targets.data.cols());
  both.data << res.data, targets.data;

  std::vector<ParamRef<S>> params;
  model.encoder.collect(params);
  model.clf.collect("clf", params);
  Adam<S> opt(static_cast<S>(fs.lr));

  for (int step = 0; step < fs.adapt_steps; ++step) {
    EncoderCache<S> cache;
    MatX<S> zc = model.encoder.forward(both, &cache);
    MatX<S> zs = zc.topRows(R);
    MatX<S> zt = zc.bottomRows(K);

    // L_f's alignment term is the unsquared MMD; chain the V-statistic
    // gradient through the square root (slope 1/(2*mmd), flat at 0).
    MatX<S> dzs, dzt;
    const S v = mmd_sq_pair_grad<S>(zs, zt, out.model.gamma, &dzs, &dzt);
    const S l_mmd = std::sqrt(std::max(S(0), v));
    if (l_mmd > S(1e-12)) {
      dzs *= S(1) / (2 * l_mmd);
      dzt *= S(1) / (2 * l_mmd);
    } else {
      dzs.setZero();
      dzt.setZero();
    }

    MlpCache<S> ccache;
    MatX<S> logits = model.clf.forward(zt, &ccache);
    MatX<S> probs = softmax_rows(logits);
    const S l_ce = cross_entropy(probs, labels);
    MatX<S> dlog = probs;
    for (Eigen::Index r = 0; r < labels.size(); ++r) dlog(r, labels[r]) -= S(1);
    dlog /= static_cast<S>(K);

    zero_grads(params);
    MatX<S> dz(R + K, zc.cols());
    dz.topRows(R) = dzs;
    dz.bottomRows(K) = dzt + model.clf.backward(ccache, dlog);
    model.encoder.backward(cache, dz);
    opt.step(params);

    LossReport rep;
    rep.step = step;
    rep.l_ce = l_ce;
    rep.l_mmd = l_mmd;
    rep.total = static_cast<double>(l_ce) + static_cast<double>(l_mmd);
    out.curve.push_back(rep);
  }
  return out;
}

}  // namespace airfi

#endif  // AIRFI_TRAINER_HPP
