#ifndef AIRFI_NN_NETS_HPP
#define AIRFI_NN_NETS_HPP

#include "airfi/nn/layers.hpp"

#include <string>
#include <vector>

namespace airfi {

struct ConvStage {
  int channels = 0;
  int kernel = 1;
  int stride = 1;
};

struct EncoderSpec {
  std::vector<ConvStage> stages = {{16, 5, 2}, {32, 5, 2}, {64, 3, 2}};
  int latent_dim = 128;
  int input_channels = kChannels;
  int input_time = kPackets;
  float leaky_slope = 0.2f;

  // Per-stage time lengths including the input: e.g. [500, 248, 122, 60] for
  // the default stages. Throws if a stage underflows.
  std::vector<int> stage_lengths() const {
    std::vector<int> lens = {input_time};
    for (const ConvStage& st : stages) {
      const int li = lens.back();
      if (li < st.kernel || st.stride < 1 || st.channels < 1) {
        throw Error(ErrorCode::kInvalidConfig, "encoder stage underflows");
      }
      lens.push_back((li - st.kernel) / st.stride + 1);
    }
    return lens;
  }

  int flatten_dim() const {
    if (stages.empty()) {
      throw Error(ErrorCode::kInvalidConfig, "encoder needs >= 1 conv stage");
    }
    return stages.back().channels * stage_lengths().back();
  }
};

enum class PriorFamily { kLaplace, kGaussian, kUniform };

struct PriorSpec {
  PriorFamily family = PriorFamily::kLaplace;
  double scale = 1.0;  // Laplace scale / Gaussian stddev / uniform half-width
};

struct DiscriminatorSpec {
  std::vector<int> hidden = {128, 64};
};

struct ClassifierSpec {
  std::vector<int> hidden = {64, 32};
};

// Draws a [count x dim] block from the latent prior, row-major order.
template <typename S>
MatX<S> sample_prior(int count, int dim, const PriorSpec& prior, Rng& rng) {
  MatX<S> h(count, dim);
  for (int r = 0; r < count; ++r) {
    for (int c = 0; c < dim; ++c) {
      double v = 0.0;
      switch (prior.family) {
        case PriorFamily::kLaplace: v = rng.laplace(prior.scale); break;
        case PriorFamily::kGaussian: v = rng.normal(0.0, prior.scale); break;
        case PriorFamily::kUniform: v = rng.uniform(-prior.scale, prior.scale); break;
      }
      h(r, c) = static_cast<S>(v);
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Encoder: conv stages with LeakyReLU, then a linear head to the latent code.

template <typename S>
struct EncoderCache {
  std::vector<ConvBatch<S>> inputs;   // input of conv i
  std::vector<ConvBatch<S>> preacts;  // conv i output before activation
  MatX<S> flat;                       // [B x flatten_dim]
};

template <typename S>
struct Encoder {
  EncoderSpec spec;
  std::vector<Conv1d<S>> convs;
  Dense<S> head;

  void init(const EncoderSpec& s, Rng& rng) {
    spec = s;
    s.stage_lengths();  // validates stage geometry
    convs.clear();
    convs.resize(s.stages.size());
    int ch = s.input_channels;
    for (std::size_t i = 0; i < s.stages.size(); ++i) {
      Rng r = rng.fork("enc.conv", static_cast<std::uint64_t>(i));
      convs[i].init(ch, s.stages[i].channels, s.stages[i].kernel,
                    s.stages[i].stride, static_cast<S>(s.leaky_slope), r);
      ch = s.stages[i].channels;
    }
    Rng r = rng.fork("enc.head");
    head.init(s.flatten_dim(), s.latent_dim, static_cast<S>(s.leaky_slope), r);
  }

  // x: [input_channels x B*input_time] -> codes [B x latent_dim].
  MatX<S> forward(const ConvBatch<S>& x, EncoderCache<S>* cache) const {
    const S slope = static_cast<S>(spec.leaky_slope);
    ConvBatch<S> cur = x;
    if (cache != nullptr) {
      cache->inputs.clear();
      cache->preacts.clear();
    }
    for (std::size_t i = 0; i < convs.size(); ++i) {
      if (cache != nullptr) cache->inputs.push_back(cur);
      ConvBatch<S> pre = convs[i].forward(cur);
      if (cache != nullptr) cache->preacts.push_back(pre);
      pre.data = leaky_relu(pre.data, slope);
      cur = std::move(pre);
    }
    MatX<S> flat = flatten(cur);
    MatX<S> z = head.forward(flat);
    if (cache != nullptr) cache->flat = std::move(flat);
    return z;
  }

  // Accumulates parameter grads; input gradient is not needed anywhere.
  void backward(EncoderCache<S>& cache, const MatX<S>& dz) {
    const S slope = static_cast<S>(spec.leaky_slope);
    MatX<S> dflat;
    head.backward(cache.flat, dz, &dflat);
    const ConvBatch<S>& top = cache.preacts.back();
    ConvBatch<S> dcur = unflatten(dflat, top.batch, top.channels, top.time);
    for (std::size_t ii = convs.size(); ii-- > 0;) {
      dcur.data = leaky_relu_grad(cache.preacts[ii].data, dcur.data, slope);
      ConvBatch<S> dprev;
      convs[ii].backward(cache.inputs[ii], dcur, ii > 0 ? &dprev : nullptr);
      if (ii > 0) dcur = std::move(dprev);
    }
  }

  void collect(std::vector<ParamRef<S>>& out) {
    for (std::size_t i = 0; i < convs.size(); ++i) {
      convs[i].collect("enc.conv" + std::to_string(i), out);
    }
    head.collect("enc.head", out);
  }

  // flat(b, c*L + t) = act(c, b*L + t)
  static MatX<S> flatten(const ConvBatch<S>& x) {
    MatX<S> flat(x.batch, static_cast<Eigen::Index>(x.channels) * x.time);
    for (int b = 0; b < x.batch; ++b) {
      for (int c = 0; c < x.channels; ++c) {
        flat.row(b).segment(static_cast<Eigen::Index>(c) * x.time, x.time) =
            x.data.row(c).segment(static_cast<Eigen::Index>(b) * x.time, x.time);
      }
    }
    return flat;
  }

  static ConvBatch<S> unflatten(const MatX<S>& flat, int batch, int channels,
                                int time) {
    ConvBatch<S> x;
    x.batch = batch;
    x.channels = channels;
    x.time = time;
    x.data.resize(channels, static_cast<Eigen::Index>(batch) * time);
    for (int b = 0; b < batch; ++b) {
      for (int c = 0; c < channels; ++c) {
        x.data.row(c).segment(static_cast<Eigen::Index>(b) * time, time) =
            flat.row(b).segment(static_cast<Eigen::Index>(c) * time, time);
      }
    }
    return x;
  }
};

// ---------------------------------------------------------------------------
// Decoder: mirror of the encoder. Linear head to the deepest feature map,
// then transpose convs walking the stage list backwards; every stage but the
// last is followed by LeakyReLU, the reconstruction output is linear.

template <typename S>
struct DecoderCache {
  MatX<S> z;
  MatX<S> head_pre;                   // [B x flatten]
  std::vector<ConvBatch<S>> inputs;   // input of deconv i
  std::vector<ConvBatch<S>> preacts;  // deconv i output before activation
};

template <typename S>
struct Decoder {
  EncoderSpec spec;  // shared with the encoder; defines the mirror
  Dense<S> head;
  std::vector<ConvTranspose1d<S>> deconvs;

  void init(const EncoderSpec& s, Rng& rng) {
    spec = s;
    const auto lens = s.stage_lengths();  // [L0, L1, ..., Ln]
    const int n = static_cast<int>(s.stages.size());
    Rng r0 = rng.fork("dec.head");
    head.init(s.latent_dim, s.flatten_dim(), static_cast<S>(s.leaky_slope), r0);
    deconvs.clear();
    deconvs.resize(n);
    for (int i = 0; i < n; ++i) {
      // deconv i maps stage (n-i) back to stage (n-i-1)
      const int src = n - i;
      const int in_channels = s.stages[src - 1].channels;
      const int out_channels =
          src - 2 >= 0 ? s.stages[src - 2].channels : s.input_channels;
      Rng r = rng.fork("dec.deconv", static_cast<std::uint64_t>(i));
      deconvs[i].init(in_channels, out_channels, s.stages[src - 1].kernel,
                      s.stages[src - 1].stride, lens[src - 1], lens[src],
                      static_cast<S>(s.leaky_slope), r);
    }
  }

  ConvBatch<S> forward(const MatX<S>& z, DecoderCache<S>* cache) const {
    const S slope = static_cast<S>(spec.leaky_slope);
    const auto lens = spec.stage_lengths();
    MatX<S> pre = head.forward(z);
    if (cache != nullptr) {
      cache->z = z;
      cache->head_pre = pre;
      cache->inputs.clear();
      cache->preacts.clear();
    }
    MatX<S> act = leaky_relu(pre, slope);
    ConvBatch<S> map = Encoder<S>::unflatten(act, static_cast<int>(z.rows()),
                                             spec.stages.back().channels,
                                             lens.back());
    for (std::size_t i = 0; i < deconvs.size(); ++i) {
      if (cache != nullptr) cache->inputs.push_back(map);
      ConvBatch<S> out = deconvs[i].forward(map);
      if (cache != nullptr) cache->preacts.push_back(out);
      if (i + 1 < deconvs.size()) out.data = leaky_relu(out.data, slope);
      map = std::move(out);
    }
    return map;
  }

  // Returns dL/dz.
  MatX<S> backward(DecoderCache<S>& cache, const ConvBatch<S>& dxhat) {
    const S slope = static_cast<S>(spec.leaky_slope);
    ConvBatch<S> dcur = dxhat;
    for (std::size_t ii = deconvs.size(); ii-- > 0;) {
      if (ii + 1 < deconvs.size()) {
        dcur.data = leaky_relu_grad(cache.preacts[ii].data, dcur.data, slope);
      }
      ConvBatch<S> dprev;
      deconvs[ii].backward(cache.inputs[ii], dcur, &dprev);
      dcur = std::move(dprev);
    }
    MatX<S> dact = Encoder<S>::flatten(dcur);
    MatX<S> dpre = leaky_relu_grad(cache.head_pre, dact, slope);
    MatX<S> dz;
    head.backward(cache.z, dpre, &dz);
    return dz;
  }

  void collect(std::vector<ParamRef<S>>& out) {
    head.collect("dec.head", out);
    for (std::size_t i = 0; i < deconvs.size(); ++i) {
      deconvs[i].collect("dec.deconv" + std::to_string(i), out);
    }
  }
};

// ---------------------------------------------------------------------------
// Generic MLP with LeakyReLU between layers and a linear final layer; backs
// both the discriminator and the classifier.

template <typename S>
struct MlpCache {
  std::vector<MatX<S>> inputs;
  std::vector<MatX<S>> preacts;
};

template <typename S>
struct Mlp {
  std::vector<Dense<S>> layers;
  S slope = S(0.2);

  void init(int in, const std::vector<int>& hidden, int out, S leaky,
            Rng& rng) {
    slope = leaky;
    layers.clear();
    layers.resize(hidden.size() + 1);
    int d = in;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      Rng r = rng.fork("mlp.layer", static_cast<std::uint64_t>(i));
      layers[i].init(d, hidden[i], slope, r);
      d = hidden[i];
    }
    Rng r = rng.fork("mlp.layer", hidden.size());
    layers.back().init(d, out, slope, r);
  }

  MatX<S> forward(const MatX<S>& x, MlpCache<S>* cache) const {
    if (cache != nullptr) {
      cache->inputs.clear();
      cache->preacts.clear();
    }
    MatX<S> cur = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (cache != nullptr) cache->inputs.push_back(cur);
      MatX<S> pre = layers[i].forward(cur);
      if (cache != nullptr) cache->preacts.push_back(pre);
      cur = i + 1 < layers.size() ? leaky_relu(pre, slope) : std::move(pre);
    }
    return cur;
  }

  // dlogits -> gradient w.r.t. the MLP input, accumulating layer grads.
  MatX<S> backward(MlpCache<S>& cache, const MatX<S>& dlogits) {
    MatX<S> dcur = dlogits;
    for (std::size_t ii = layers.size(); ii-- > 0;) {
      if (ii + 1 < layers.size()) {
        dcur = leaky_relu_grad(cache.preacts[ii], dcur, slope);
      }
      MatX<S> dprev;
      layers[ii].backward(cache.inputs[ii], dcur, &dprev);
      dcur = std::move(dprev);
    }
    return dcur;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].collect(prefix + ".fc" + std::to_string(i), out);
    }
  }
};

}  // namespace airfi

#endif  // AIRFI_NN_NETS_HPP
