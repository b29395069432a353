#ifndef AIRFI_NN_LAYERS_HPP
#define AIRFI_NN_LAYERS_HPP

#include "airfi/common.hpp"
#include "airfi/rng.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace airfi {

// Batched 1-D signal: data(c, b * time + t). Column-major, so one (b, t)
// column holds all channels contiguously.
template <typename S>
struct ConvBatch {
  MatX<S> data;
  int batch = 0;
  int channels = 0;
  int time = 0;
};

// Named (value, grad) pair; the optimizer iterates these in registration
// order, which keeps updates bit-reproducible.
template <typename S>
struct ParamRef {
  std::string name;
  MatX<S>* value;
  MatX<S>* grad;
};

template <typename S>
void zero_grads(const std::vector<ParamRef<S>>& params) {
  for (const auto& p : params) p.grad->setZero();
}

template <typename S>
MatX<S> leaky_relu(const MatX<S>& x, S slope) {
  return (x.array() > S(0)).select(x, slope * x);
}

template <typename S>
MatX<S> leaky_relu_grad(const MatX<S>& preact, const MatX<S>& dy, S slope) {
  return (preact.array() > S(0)).select(dy, slope * dy);
}

namespace detail {

// Patch matrix K for a strided window sweep: K(u * C + c, b * Ls + t) =
// x(c, b * Ll + t * s + u). Shared by conv forward and transpose-conv
// backward (the two are adjoint).
template <typename S>
MatX<S> im2col(const MatX<S>& x, int batch, int channels, int len_long,
               int kernel, int stride, int len_short) {
  MatX<S> cols(static_cast<Eigen::Index>(kernel) * channels,
               static_cast<Eigen::Index>(batch) * len_short);
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < len_short; ++t) {
      const Eigen::Index col = static_cast<Eigen::Index>(b) * len_short + t;
      const Eigen::Index src0 =
          static_cast<Eigen::Index>(b) * len_long + static_cast<Eigen::Index>(t) * stride;
      for (int u = 0; u < kernel; ++u) {
        cols.block(static_cast<Eigen::Index>(u) * channels, col, channels, 1) =
            x.col(src0 + u);
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatter-adds patch columns back into the long signal.
template <typename S>
void col2im_add(const MatX<S>& cols, int batch, int channels, int len_long,
                int kernel, int stride, int len_short, MatX<S>& x) {
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < len_short; ++t) {
      const Eigen::Index col = static_cast<Eigen::Index>(b) * len_short + t;
      const Eigen::Index dst0 =
          static_cast<Eigen::Index>(b) * len_long + static_cast<Eigen::Index>(t) * stride;
      for (int u = 0; u < kernel; ++u) {
        x.col(dst0 + u) +=
            cols.block(static_cast<Eigen::Index>(u) * channels, col, channels, 1);
      }
    }
  }
}

// He-style init scaled for a leaky-ReLU nonlinearity; entries drawn row-major
// so layouts are reproducible.
template <typename S>
void he_init(MatX<S>& w, int fan_in, S slope, Rng& rng) {
  const double std = std::sqrt(2.0 / ((1.0 + slope * slope) * fan_in));
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      w(r, c) = static_cast<S>(rng.normal(0.0, std));
    }
  }
}

}  // namespace detail

// Valid (no padding) strided 1-D convolution over the time axis.
// Weight layout: w(o, u * in_ch + c) multiplies input channel c at tap u.
template <typename S>
struct Conv1d {
  int in_ch = 0, out_ch = 0, kernel = 1, stride = 1;
  MatX<S> w, dw;
  MatX<S> b, db;

  void init(int in_channels, int out_channels, int kernel_size,
            int stride_size, S slope, Rng& rng) {
    in_ch = in_channels;
    out_ch = out_channels;
    kernel = kernel_size;
    stride = stride_size;
    w.resize(out_ch, static_cast<Eigen::Index>(kernel) * in_ch);
    detail::he_init(w, in_ch * kernel, slope, rng);
    b = MatX<S>::Zero(out_ch, 1);
    dw = MatX<S>::Zero(w.rows(), w.cols());
    db = MatX<S>::Zero(out_ch, 1);
  }

  int out_len(int in_len) const {
    if (in_len < kernel) {
      throw Error(ErrorCode::kShapeMismatch,
                  "conv input shorter than kernel: " + std::to_string(in_len));
    }
    return (in_len - kernel) / stride + 1;
  }

  ConvBatch<S> forward(const ConvBatch<S>& x) const {
    if (x.channels != in_ch) {
      throw Error(ErrorCode::kShapeMismatch, "conv channel mismatch");
    }
    const int lo = out_len(x.time);
    ConvBatch<S> y;
    y.batch = x.batch;
    y.channels = out_ch;
    y.time = lo;
    const MatX<S> cols =
        detail::im2col(x.data, x.batch, in_ch, x.time, kernel, stride, lo);
    y.data = w * cols;
    y.data.colwise() += b.col(0);
    return y;
  }

  // Accumulates dw/db; writes input gradient when dx != nullptr.
  void backward(const ConvBatch<S>& x, const ConvBatch<S>& dy,
                ConvBatch<S>* dx) {
    const int lo = dy.time;
    const MatX<S> cols =
        detail::im2col(x.data, x.batch, in_ch, x.time, kernel, stride, lo);
    dw += dy.data * cols.transpose();
    db.col(0) += dy.data.rowwise().sum();
    if (dx != nullptr) {
      dx->batch = x.batch;
      dx->channels = in_ch;
      dx->time = x.time;
      dx->data = MatX<S>::Zero(in_ch, x.data.cols());
      const MatX<S> dcols = w.transpose() * dy.data;
      detail::col2im_add(dcols, x.batch, in_ch, x.time, kernel, stride, lo,
                         dx->data);
    }
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".w", &w, &dw});
    out.push_back({prefix + ".b", &b, &db});
  }
};

// Transpose of Conv1d (fractionally-strided conv). output_padding extends the
// output so mirrored encoder/decoder stages reproduce the original length;
// the padded tail columns receive bias only.
// Weight layout: w(c, u * out_ch + o).
template <typename S>
struct ConvTranspose1d {
  int in_ch = 0, out_ch = 0, kernel = 1, stride = 1, out_pad = 0;
  MatX<S> w, dw;
  MatX<S> b, db;

  void init(int in_channels, int out_channels, int kernel_size,
            int stride_size, int target_len, int in_len, S slope, Rng& rng) {
    in_ch = in_channels;
    out_ch = out_channels;
    kernel = kernel_size;
    stride = stride_size;
    const int natural = (in_len - 1) * stride + kernel;
    out_pad = target_len - natural;
    if (out_pad < 0 || out_pad >= stride) {
      throw Error(ErrorCode::kInvalidArgument,
                  "transpose conv cannot reach length " +
                      std::to_string(target_len) + " from " +
                      std::to_string(in_len));
    }
    w.resize(in_ch, static_cast<Eigen::Index>(kernel) * out_ch);
    detail::he_init(w, in_ch * kernel, slope, rng);
    b = MatX<S>::Zero(out_ch, 1);
    dw = MatX<S>::Zero(w.rows(), w.cols());
    db = MatX<S>::Zero(out_ch, 1);
  }

  int out_len(int in_len) const {
    return (in_len - 1) * stride + kernel + out_pad;
  }

  ConvBatch<S> forward(const ConvBatch<S>& x) const {
    if (x.channels != in_ch) {
      throw Error(ErrorCode::kShapeMismatch, "transpose conv channel mismatch");
    }
    const int lo = out_len(x.time);
    ConvBatch<S> y;
    y.batch = x.batch;
    y.channels = out_ch;
    y.time = lo;
    y.data = MatX<S>::Zero(out_ch, static_cast<Eigen::Index>(x.batch) * lo);
    const MatX<S> cols = w.transpose() * x.data;
    detail::col2im_add(cols, x.batch, out_ch, lo, kernel, stride, x.time,
                       y.data);
    y.data.colwise() += b.col(0);
    return y;
  }

  void backward(const ConvBatch<S>& x, const ConvBatch<S>& dy,
                ConvBatch<S>* dx) {
    const MatX<S> dcols = detail::im2col(dy.data, x.batch, out_ch, dy.time,
                                         kernel, stride, x.time);
    dw += x.data * dcols.transpose();
    db.col(0) += dy.data.rowwise().sum();
    if (dx != nullptr) {
      dx->batch = x.batch;
      dx->channels = in_ch;
      dx->time = x.time;
      dx->data = w * dcols;
    }
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".w", &w, &dw});
    out.push_back({prefix + ".b", &b, &db});
  }
};

// Fully connected layer on row-per-sample matrices: y = x * w^T + b.
template <typename S>
struct Dense {
  int in_dim = 0, out_dim = 0;
  MatX<S> w, dw;  // [out x in]
  MatX<S> b, db;  // [out x 1]

  void init(int in, int out, S slope, Rng& rng) {
    in_dim = in;
    out_dim = out;
    w.resize(out, in);
    detail::he_init(w, in, slope, rng);
    b = MatX<S>::Zero(out, 1);
    dw = MatX<S>::Zero(out, in);
    db = MatX<S>::Zero(out, 1);
  }

  MatX<S> forward(const MatX<S>& x) const {
    if (x.cols() != in_dim) {
      throw Error(ErrorCode::kShapeMismatch, "dense input dim mismatch");
    }
    MatX<S> y = x * w.transpose();
    y.rowwise() += b.col(0).transpose();
    return y;
  }

  void backward(const MatX<S>& x, const MatX<S>& dy, MatX<S>* dx) {
    dw += dy.transpose() * x;
    db.col(0) += dy.colwise().sum().transpose();
    if (dx != nullptr) *dx = dy * w;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".w", &w, &dw});
    out.push_back({prefix + ".b", &b, &db});
  }
};

// Adam with bias correction. State is keyed by registration order; the first
// step() call sizes it.
template <typename S>
class Adam {
 public:
  explicit Adam(S lr, S beta1 = S(0.9), S beta2 = S(0.999), S eps = S(1e-8))
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(const std::vector<ParamRef<S>>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(MatX<S>::Zero(p.value->rows(), p.value->cols()));
        v_.push_back(MatX<S>::Zero(p.value->rows(), p.value->cols()));
      }
    }
    if (m_.size() != params.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "optimizer bound to a different parameter set");
    }
    ++t_;
    const S c1 = S(1) - std::pow(b1_, static_cast<S>(t_));
    const S c2 = S(1) - std::pow(b2_, static_cast<S>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const MatX<S>& g = *params[i].grad;
      m_[i] = b1_ * m_[i] + (S(1) - b1_) * g;
      v_[i] = b2_ * v_[i] + (S(1) - b2_) * g.cwiseProduct(g);
      params[i].value->array() -=
          lr_ * (m_[i].array() / c1) /
          ((v_[i].array() / c2).sqrt() + eps_);
    }
  }

  S lr() const { return lr_; }

 private:
  S lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<MatX<S>> m_, v_;
};

}  // namespace airfi

#endif  // AIRFI_NN_LAYERS_HPP
