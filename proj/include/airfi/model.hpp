#ifndef AIRFI_MODEL_HPP
#define AIRFI_MODEL_HPP

#include "airfi/config.hpp"
#include "airfi/csi.hpp"
#include "airfi/feat_augment.hpp"
#include "airfi/nn/nets.hpp"

#include <string>
#include <vector>

namespace airfi {

// The four networks plus the running class-conditional covariance.
template <typename S>
struct Model {
  ModelConfig cfg;
  int num_classes = 0;
  Encoder<S> encoder;
  Decoder<S> decoder;
  Mlp<S> disc;  // latent -> 1 logit
  Mlp<S> clf;   // latent -> num_classes logits
  ClasswiseCovariance<S> covariance;

  void init(const ModelConfig& c, int classes, std::uint64_t seed) {
    if (classes < 1) {
      throw Error(ErrorCode::kInvalidArgument, "model needs >= 1 class");
    }
    cfg = c;
    num_classes = classes;
    const S slope = static_cast<S>(c.encoder.leaky_slope);
    Rng root(seed);
    Rng re = root.fork("encoder");
    encoder.init(c.encoder, re);
    Rng rd = root.fork("decoder");
    decoder.init(c.encoder, rd);
    Rng rdisc = root.fork("disc");
    disc.init(c.encoder.latent_dim, c.disc.hidden, 1, slope, rdisc);
    Rng rclf = root.fork("clf");
    clf.init(c.encoder.latent_dim, c.clf.hidden, classes, slope, rclf);
    covariance =
        ClasswiseCovariance<S>::zeros(classes, c.encoder.latent_dim);
  }

  // Generator-side parameters (encoder, decoder, classifier); the joint
  // descent updates exactly these.
  std::vector<ParamRef<S>> generator_params() {
    std::vector<ParamRef<S>> out;
    encoder.collect(out);
    decoder.collect(out);
    clf.collect("clf", out);
    return out;
  }

  std::vector<ParamRef<S>> disc_params() {
    std::vector<ParamRef<S>> out;
    disc.collect("disc", out);
    return out;
  }

  std::vector<ParamRef<S>> all_params() {
    std::vector<ParamRef<S>> out = generator_params();
    disc.collect("disc", out);
    return out;
  }
};

// Everything needed to evaluate, adapt, and checkpoint after training.
template <typename S>
struct TrainedModel {
  Model<S> model;
  NormStats norm_stats;
  S gamma = S(1);                       // kernel bandwidth in effect at the end
  std::vector<int> source_env_ids;
  std::string fingerprint;              // of the training PipelineConfig
  MatX<S> reservoir;                    // [R x channels*time], normalized
                                        // source samples for few-shot alignment
};

// [B x channels*time] rows (sample-major, channel-major within a row) viewed
// as a conv batch; the inverse of Encoder::flatten's layout on raw signals.
template <typename S>
ConvBatch<S> batch_from_rows(const MatX<S>& rows, int channels, int time) {
  if (rows.cols() != static_cast<Eigen::Index>(channels) * time) {
    throw Error(ErrorCode::kShapeMismatch, "row length != channels*time");
  }
  return Encoder<S>::unflatten(rows, static_cast<int>(rows.rows()), channels,
                               time);
}

template <typename S>
ConvBatch<S> make_batch(const std::vector<const CsiSample*>& samples) {
  if (samples.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty batch");
  }
  const auto rows = samples[0]->amplitude.rows();
  const auto time = samples[0]->amplitude.cols();
  ConvBatch<S> b;
  b.batch = static_cast<int>(samples.size());
  b.channels = static_cast<int>(rows);
  b.time = static_cast<int>(time);
  b.data.resize(rows, static_cast<Eigen::Index>(b.batch) * time);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i]->amplitude.rows() != rows ||
        samples[i]->amplitude.cols() != time) {
      throw Error(ErrorCode::kShapeMismatch, "ragged batch");
    }
    b.data.block(0, static_cast<Eigen::Index>(i) * time, rows, time) =
        samples[i]->amplitude.cast<S>();
  }
  return b;
}

}  // namespace airfi

#endif  // AIRFI_MODEL_HPP
