#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vigil/error.hpp"
#include "vigil/imaging.hpp"

namespace vigil::vmmr {

struct TensorShape {
  int height = 1;
  int width = 1;
  int channels = 1;

  long long elements() const { return static_cast<long long>(height) * width * channels; }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

enum class LayerKind : std::uint8_t { StandardConv, DepthwiseConv, PointwiseConv, GlobalAvgPool, FullyConnected, Softmax };

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::StandardConv: return "conv";
    case LayerKind::DepthwiseConv: return "conv-dw";
    case LayerKind::PointwiseConv: return "conv-pw";
    case LayerKind::GlobalAvgPool: return "avg-pool";
    case LayerKind::FullyConnected: return "fc";
    case LayerKind::Softmax: return "softmax";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind = LayerKind::StandardConv;
  int stride = 1;
  int kh = 1;
  int kw = 1;
  int in_channels = 1;
  int out_channels = 1;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ArchitectureSpec {
  std::vector<LayerSpec> layers;
  double width_multiplier = 1.0;
  int input_resolution = 224;
  int num_classes = 2;

  TensorShape input_shape() const { return {input_resolution, input_resolution, 3}; }
  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

inline constexpr std::array<int, 4> kResolutions{224, 192, 160, 128};

/// Channel count under the width multiplier: nearest integer, at least 1.
inline int scale_channels(int channels, double alpha) {
  return std::max(1, static_cast<int>(std::lround(channels * alpha)));
}

/// The depthwise-separable stack: a stride-2 3x3 stem, thirteen dw/pw pairs,
/// global average pooling, a fully connected head and softmax.
inline ArchitectureSpec build_architecture(double alpha, int resolution, int num_classes) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(Errc::BadAlpha, "width multiplier must be in (0,1]");
  if (std::find(kResolutions.begin(), kResolutions.end(), resolution) == kResolutions.end()) {
    throw Error(Errc::BadResolution, "resolution must be one of 224, 192, 160, 128");
  }
  if (num_classes < 2) throw Error(Errc::ConfigError, "need at least two classes");

  ArchitectureSpec spec;
  spec.width_multiplier = alpha;
  spec.input_resolution = resolution;
  spec.num_classes = num_classes;
  auto& L = spec.layers;
  const auto c = [alpha](int n) { return scale_channels(n, alpha); };

  L.push_back({LayerKind::StandardConv, 2, 3, 3, 3, c(32)});
  struct Pair {
    int in, out, stride;
  };
  const Pair plan[] = {{32, 64, 1},   {64, 128, 2},  {128, 128, 1}, {128, 256, 2}, {256, 256, 1},
                       {256, 512, 2}, {512, 512, 1}, {512, 512, 1}, {512, 512, 1}, {512, 512, 1},
                       {512, 512, 1}, {512, 1024, 2}, {1024, 1024, 1}};
  for (const auto& p : plan) {
    L.push_back({LayerKind::DepthwiseConv, p.stride, 3, 3, c(p.in), c(p.in)});
    L.push_back({LayerKind::PointwiseConv, 1, 1, 1, c(p.in), c(p.out)});
  }
  L.push_back({LayerKind::GlobalAvgPool, 1, 1, 1, c(1024), c(1024)});
  L.push_back({LayerKind::FullyConnected, 1, 1, 1, c(1024), num_classes});
  L.push_back({LayerKind::Softmax, 1, 1, 1, num_classes, num_classes});
  return spec;
}

inline int same_out(int in, int stride) { return (in + stride - 1) / stride; }

/// Input shape of every layer, plus the network output as the final element.
inline std::vector<TensorShape> propagate_shapes(const ArchitectureSpec& spec) {
  if (spec.layers.size() < 2 || spec.layers[spec.layers.size() - 2].kind != LayerKind::FullyConnected ||
      spec.layers.back().kind != LayerKind::Softmax) {
    throw Error(Errc::ShapeMismatch, "architecture must end with fully-connected then softmax");
  }
  if (spec.layers[spec.layers.size() - 2].out_channels != spec.num_classes) {
    throw Error(Errc::ShapeMismatch, "classifier width differs from num_classes");
  }
  std::vector<TensorShape> shapes;
  TensorShape s = spec.input_shape();
  if (s.height < 1) throw Error(Errc::ShapeMismatch, "input resolution must be >= 1");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    shapes.push_back(s);
    auto mismatch = [&](const std::string& why) {
      return Error(Errc::ShapeMismatch, "layer " + std::to_string(i) + " (" + std::string(to_string(l.kind)) + "): " + why);
    };
    if (l.stride != 1 && l.stride != 2) throw mismatch("stride must be 1 or 2");
    if (l.in_channels != s.channels) {
      throw mismatch("declares " + std::to_string(l.in_channels) + " input channels, receives " + std::to_string(s.channels));
    }
    switch (l.kind) {
      case LayerKind::StandardConv:
        s = {same_out(s.height, l.stride), same_out(s.width, l.stride), l.out_channels};
        break;
      case LayerKind::DepthwiseConv:
        if (l.out_channels != l.in_channels) throw mismatch("depthwise must preserve channels");
        s = {same_out(s.height, l.stride), same_out(s.width, l.stride), l.out_channels};
        break;
      case LayerKind::PointwiseConv:
        if (l.kh != 1 || l.kw != 1 || l.stride != 1) throw mismatch("pointwise must be 1x1 stride 1");
        s.channels = l.out_channels;
        break;
      case LayerKind::GlobalAvgPool:
        if (l.out_channels != l.in_channels) throw mismatch("pooling must preserve channels");
        s = {1, 1, s.channels};
        break;
      case LayerKind::FullyConnected:
        if (s.height != 1 || s.width != 1) throw mismatch("fully-connected needs a 1x1 input");
        s.channels = l.out_channels;
        break;
      case LayerKind::Softmax:
        if (l.out_channels != l.in_channels) throw mismatch("softmax must preserve width");
        break;
    }
    if (l.out_channels < 1) throw mismatch("channel counts must be >= 1");
  }
  shapes.push_back(s);
  return shapes;
}

/// Weight scalars a layer owns: conv and FC carry a bias, dw/pw do not.
inline long long layer_param_count(const LayerSpec& l) {
  const long long kk = static_cast<long long>(l.kh) * l.kw;
  switch (l.kind) {
    case LayerKind::StandardConv: return kk * l.in_channels * l.out_channels + l.out_channels;
    case LayerKind::DepthwiseConv: return kk * l.in_channels;
    case LayerKind::PointwiseConv: return static_cast<long long>(l.in_channels) * l.out_channels;
    case LayerKind::FullyConnected: return static_cast<long long>(l.in_channels) * l.out_channels + l.out_channels;
    case LayerKind::GlobalAvgPool:
    case LayerKind::Softmax: return 0;
  }
  return 0;
}

inline long long count_params(const ArchitectureSpec& spec) {
  long long total = 0;
  for (const auto& l : spec.layers) total += layer_param_count(l);
  return total;
}

inline std::vector<long long> layer_mult_adds(const ArchitectureSpec& spec) {
  const auto shapes = propagate_shapes(spec);
  std::vector<long long> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const auto& o = shapes[i + 1];
    const long long hw = static_cast<long long>(o.height) * o.width;
    const long long kk = static_cast<long long>(l.kh) * l.kw;
    switch (l.kind) {
      case LayerKind::StandardConv: out.push_back(kk * l.in_channels * l.out_channels * hw); break;
      case LayerKind::DepthwiseConv: out.push_back(kk * l.in_channels * hw); break;
      case LayerKind::PointwiseConv: out.push_back(static_cast<long long>(l.in_channels) * l.out_channels * hw); break;
      case LayerKind::FullyConnected: out.push_back(static_cast<long long>(l.in_channels) * l.out_channels); break;
      case LayerKind::GlobalAvgPool:
      case LayerKind::Softmax: out.push_back(0); break;
    }
  }
  return out;
}

inline long long count_mult_adds(const ArchitectureSpec& spec) {
  const auto per = layer_mult_adds(spec);
  return std::accumulate(per.begin(), per.end(), 0LL);
}

// Dense HWC tensor.
struct Tensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int ch) { return data[(static_cast<std::size_t>(y) * width + x) * channels + ch]; }
  double at(int y, int x, int ch) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + ch]; }
  TensorShape shape() const { return {height, width, channels}; }
};

namespace detail {
inline int same_pad_before(int in, int k, int stride) {
  const int out = same_out(in, stride);
  return std::max((out - 1) * stride + k - in, 0) / 2;
}
}  // namespace detail

/// 'same'-padded standard convolution. weights laid out [kh][kw][cin][cout]; bias may be empty.
inline Tensor standard_conv_forward(const Tensor& in, std::span<const double> weights, std::span<const double> bias,
                                    int kh, int kw, int out_channels, int stride) {
  const int cin = in.channels;
  if (weights.size() != static_cast<std::size_t>(kh) * kw * cin * out_channels ||
      (!bias.empty() && bias.size() != static_cast<std::size_t>(out_channels))) {
    throw Error(Errc::ShapeMismatch, "conv weights do not match kernel and channel counts");
  }
  const int oh = same_out(in.height, stride);
  const int ow = same_out(in.width, stride);
  const int pt = detail::same_pad_before(in.height, kh, stride);
  const int pl = detail::same_pad_before(in.width, kw, stride);
  Tensor out(oh, ow, out_channels);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double* acc = &out.at(oy, ox, 0);
      if (!bias.empty()) std::copy(bias.begin(), bias.end(), acc);
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride + ky - pt;
        if (iy < 0 || iy >= in.height) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride + kx - pl;
          if (ix < 0 || ix >= in.width) continue;
          const double* src = &in.data[(static_cast<std::size_t>(iy) * in.width + ix) * cin];
          const double* w = &weights[(static_cast<std::size_t>(ky) * kw + kx) * cin * out_channels];
          for (int ci = 0; ci < cin; ++ci) {
            const double v = src[ci];
            const double* wr = w + static_cast<std::size_t>(ci) * out_channels;
            for (int co = 0; co < out_channels; ++co) acc[co] += v * wr[co];
          }
        }
      }
    }
  }
  return out;
}

/// One kh x kw filter per channel, 'same' padding. kernel laid out [kh][kw][c].
inline Tensor depthwise_forward(const Tensor& in, std::span<const double> kernel, int kh, int kw, int stride) {
  const int c = in.channels;
  if (kernel.size() != static_cast<std::size_t>(kh) * kw * c) {
    throw Error(Errc::ShapeMismatch, "depthwise kernel does not match channel count");
  }
  const int oh = same_out(in.height, stride);
  const int ow = same_out(in.width, stride);
  const int pt = detail::same_pad_before(in.height, kh, stride);
  const int pl = detail::same_pad_before(in.width, kw, stride);
  Tensor out(oh, ow, c);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double* acc = &out.at(oy, ox, 0);
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride + ky - pt;
        if (iy < 0 || iy >= in.height) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride + kx - pl;
          if (ix < 0 || ix >= in.width) continue;
          const double* src = &in.data[(static_cast<std::size_t>(iy) * in.width + ix) * c];
          const double* k = &kernel[(static_cast<std::size_t>(ky) * kw + kx) * c];
          for (int ch = 0; ch < c; ++ch) acc[ch] += src[ch] * k[ch];
        }
      }
    }
  }
  return out;
}

/// 1x1 cross-channel map. weights laid out [cin][cout].
inline Tensor pointwise_forward(const Tensor& in, std::span<const double> weights, int out_channels) {
  if (weights.size() != static_cast<std::size_t>(in.channels) * out_channels) {
    throw Error(Errc::ShapeMismatch, "pointwise weights do not match channel counts");
  }
  return standard_conv_forward(in, weights, {}, 1, 1, out_channels, 1);
}

inline void relu_inplace(Tensor& t) {
  for (auto& v : t.data) v = std::max(v, 0.0);
}

/// exp(z - max z) / sum; invariant to adding a constant to every logit.
inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (out[i] = std::exp(logits[i] - m));
  for (auto& v : out) v /= sum;
  return out;
}

struct WeightBundle {
  std::string version = "VMMR1";
  std::vector<std::vector<float>> layers;  // one array per LayerSpec, possibly empty

  friend bool operator==(const WeightBundle&, const WeightBundle&) = default;
};

inline void check_weights(const ArchitectureSpec& spec, const WeightBundle& w) {
  if (w.layers.size() != spec.layers.size()) throw Error(Errc::WeightMismatch, "weight bundle has wrong layer count");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (static_cast<long long>(w.layers[i].size()) != layer_param_count(spec.layers[i])) {
      throw Error(Errc::WeightMismatch, "layer " + std::to_string(i) + " has " + std::to_string(w.layers[i].size()) +
                                            " weights, expected " + std::to_string(layer_param_count(spec.layers[i])));
    }
  }
}

inline WeightBundle zero_weights(const ArchitectureSpec& spec) {
  WeightBundle w;
  for (const auto& l : spec.layers) w.layers.emplace_back(static_cast<std::size_t>(layer_param_count(l)), 0.0f);
  return w;
}

inline WeightBundle random_weights(const ArchitectureSpec& spec, std::uint64_t seed, double scale = 0.1) {
  SplitMix64 rng(seed);
  WeightBundle w;
  for (const auto& l : spec.layers) {
    std::vector<float> arr(static_cast<std::size_t>(layer_param_count(l)));
    for (auto& v : arr) v = static_cast<float>(rng.uniform_real(-scale, scale));
    w.layers.push_back(std::move(arr));
  }
  return w;
}

inline Tensor image_to_tensor(const Frame& image) {
  Tensor t(image.height(), image.width(), 3);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const auto& p = image.at(x, y);
      t.at(y, x, 0) = p.r / 255.0;
      t.at(y, x, 1) = p.g / 255.0;
      t.at(y, x, 2) = p.b / 255.0;
    }
  }
  return t;
}

/// Runs the stack up to (not including) softmax; ReLU follows every convolution.
inline std::vector<double> forward_logits(const ArchitectureSpec& spec, const WeightBundle& weights, const Frame& image) {
  propagate_shapes(spec);
  check_weights(spec, weights);
  if (image.width() != spec.input_resolution || image.height() != spec.input_resolution) {
    throw Error(Errc::BadInputSize, "image must be " + std::to_string(spec.input_resolution) + " square");
  }
  Tensor t = image_to_tensor(image);
  std::vector<double> logits;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const std::vector<double> w(weights.layers[i].begin(), weights.layers[i].end());
    const std::span<const double> ws(w);
    switch (l.kind) {
      case LayerKind::StandardConv: {
        const std::size_t nk = static_cast<std::size_t>(l.kh) * l.kw * l.in_channels * l.out_channels;
        t = standard_conv_forward(t, ws.first(nk), ws.subspan(nk), l.kh, l.kw, l.out_channels, l.stride);
        relu_inplace(t);
        break;
      }
      case LayerKind::DepthwiseConv:
        t = depthwise_forward(t, ws, l.kh, l.kw, l.stride);
        relu_inplace(t);
        break;
      case LayerKind::PointwiseConv:
        t = pointwise_forward(t, ws, l.out_channels);
        relu_inplace(t);
        break;
      case LayerKind::GlobalAvgPool: {
        Tensor pooled(1, 1, t.channels);
        const double n = static_cast<double>(t.height) * t.width;
        for (int y = 0; y < t.height; ++y)
          for (int x = 0; x < t.width; ++x)
            for (int c = 0; c < t.channels; ++c) pooled.at(0, 0, c) += t.at(y, x, c);
        for (auto& v : pooled.data) v /= n;
        t = std::move(pooled);
        break;
      }
      case LayerKind::FullyConnected: {
        const std::size_t nk = static_cast<std::size_t>(l.in_channels) * l.out_channels;
        logits.assign(ws.begin() + static_cast<std::ptrdiff_t>(nk), ws.end());
        for (int ci = 0; ci < l.in_channels; ++ci) {
          const double v = t.data[static_cast<std::size_t>(ci)];
          for (int co = 0; co < l.out_channels; ++co) logits[co] += v * ws[static_cast<std::size_t>(ci) * l.out_channels + co];
        }
        t = Tensor(1, 1, l.out_channels);
        std::copy(logits.begin(), logits.end(), t.data.begin());
        break;
      }
      case LayerKind::Softmax:
        break;
    }
  }
  return logits;
}

struct Prediction {
  std::vector<int> class_ranks;       // most probable first, ties to the lower index
  std::vector<double> probabilities;  // aligned with class_ranks

  double probability_of(int cls) const {
    for (std::size_t i = 0; i < class_ranks.size(); ++i)
      if (class_ranks[i] == cls) return probabilities[i];
    return 0.0;
  }
};

inline Prediction make_prediction(std::span<const double> class_probabilities) {
  Prediction p;
  p.class_ranks.resize(class_probabilities.size());
  std::iota(p.class_ranks.begin(), p.class_ranks.end(), 0);
  std::stable_sort(p.class_ranks.begin(), p.class_ranks.end(),
                   [&](int a, int b) { return class_probabilities[a] > class_probabilities[b]; });
  for (int c : p.class_ranks) p.probabilities.push_back(class_probabilities[c]);
  return p;
}

inline Prediction forward(const ArchitectureSpec& spec, const WeightBundle& weights, const Frame& image) {
  const auto logits = forward_logits(spec, weights, image);
  return make_prediction(softmax(logits));
}

/// Resizes to the network input first; the usual entry point for vehicle crops.
inline Prediction classify(const ArchitectureSpec& spec, const WeightBundle& weights, const Frame& crop) {
  if (crop.width() == spec.input_resolution && crop.height() == spec.input_resolution) return forward(spec, weights, crop);
  return forward(spec, weights, resize_bilinear(crop, spec.input_resolution, spec.input_resolution));
}

inline std::vector<int> top_k(const Prediction& pred, int k) {
  if (k < 1 || k > static_cast<int>(pred.class_ranks.size())) throw Error(Errc::BadK, "k must be in [1, num_classes]");
  return {pred.class_ranks.begin(), pred.class_ranks.begin() + k};
}

struct LabeledImage {
  Frame image;
  int label = 0;
};

struct TopKReport {
  double top1 = 0;
  double top5 = 0;
  std::size_t samples = 0;
};

inline TopKReport evaluate_topk(const ArchitectureSpec& spec, const WeightBundle& weights,
                                std::span<const LabeledImage> labeled) {
  if (labeled.empty()) throw Error(Errc::EmptySet, "no labelled samples");
  std::size_t hit1 = 0;
  std::size_t hit5 = 0;
  const int k5 = std::min(5, spec.num_classes);
  for (const auto& s : labeled) {
    const auto pred = classify(spec, weights, s.image);
    const auto best = top_k(pred, k5);
    if (best.front() == s.label) ++hit1;
    if (std::find(best.begin(), best.end(), s.label) != best.end()) ++hit5;
  }
  const double n = static_cast<double>(labeled.size());
  return {hit1 / n, hit5 / n, labeled.size()};
}

struct ModelAccuracyRow {
  std::string model;
  TopKReport report;
};

/// Two-column accuracy table: model name, Top 1, Top 5 (percent, one decimal).
inline std::string render_topk_table(std::span<const ModelAccuracyRow> rows) {
  std::size_t name_w = 5;
  for (const auto& r : rows) name_w = std::max(name_w, r.model.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_w) + 2) << "Model" << std::setw(10) << "Top 1" << "Top 5\n";
  for (const auto& r : rows) {
    std::ostringstream t1, t5;
    t1 << std::fixed << std::setprecision(1) << r.report.top1 * 100 << " %";
    t5 << std::fixed << std::setprecision(1) << r.report.top5 * 100 << " %";
    os << std::left << std::setw(static_cast<int>(name_w) + 2) << r.model << std::setw(10) << t1.str() << t5.str() << "\n";
  }
  return os.str();
}

inline std::string model_name(const ArchitectureSpec& spec) {
  std::ostringstream os;
  os << "MobileNet " << std::fixed << std::setprecision(2) << spec.width_multiplier << " " << spec.input_resolution;
  return os.str();
}

// ---- weight file -------------------------------------------------------------
//
// "VMMR1" | u32 layer count | per layer: u8 kind, u8 stride, u16 kh, u16 kw,
// u32 in, u32 out | f64 alpha | u32 resolution | u32 classes | per layer the
// float32 weights in layer order. All integers and floats little-endian.

namespace detail {

inline void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint64_t le(int bytes) {
    if (pos_ + static_cast<std::size_t>(bytes) > b_.size()) throw Error(Errc::Corrupt, "weight file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> spec_fingerprint(const ArchitectureSpec& spec) {
  std::vector<std::uint8_t> out;
  detail::put_le(out, spec.layers.size(), 4);
  for (const auto& l : spec.layers) {
    detail::put_le(out, static_cast<std::uint8_t>(l.kind), 1);
    detail::put_le(out, static_cast<std::uint64_t>(l.stride), 1);
    detail::put_le(out, static_cast<std::uint64_t>(l.kh), 2);
    detail::put_le(out, static_cast<std::uint64_t>(l.kw), 2);
    detail::put_le(out, static_cast<std::uint64_t>(l.in_channels), 4);
    detail::put_le(out, static_cast<std::uint64_t>(l.out_channels), 4);
  }
  detail::put_le(out, std::bit_cast<std::uint64_t>(spec.width_multiplier), 8);
  detail::put_le(out, static_cast<std::uint64_t>(spec.input_resolution), 4);
  detail::put_le(out, static_cast<std::uint64_t>(spec.num_classes), 4);
  return out;
}

inline std::vector<std::uint8_t> encode_weights(const ArchitectureSpec& spec, const WeightBundle& w) {
  check_weights(spec, w);
  std::vector<std::uint8_t> out{'V', 'M', 'M', 'R', '1'};
  const auto fp = spec_fingerprint(spec);
  out.insert(out.end(), fp.begin(), fp.end());
  for (const auto& arr : w.layers)
    for (float f : arr) detail::put_le(out, std::bit_cast<std::uint32_t>(f), 4);
  return out;
}

struct LoadedModel {
  ArchitectureSpec spec;
  WeightBundle weights;
};

inline LoadedModel decode_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), "VMMR1", 5) != 0) throw Error(Errc::Corrupt, "missing VMMR1 magic");
  detail::Reader r(bytes.subspan(5));
  LoadedModel m;
  const auto n = r.le(4);
  if (n > 4096) throw Error(Errc::Corrupt, "implausible layer count");
  for (std::uint64_t i = 0; i < n; ++i) {
    LayerSpec l;
    const auto kind = r.le(1);
    if (kind > static_cast<std::uint64_t>(LayerKind::Softmax)) throw Error(Errc::Corrupt, "unknown layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.stride = static_cast<int>(r.le(1));
    l.kh = static_cast<int>(r.le(2));
    l.kw = static_cast<int>(r.le(2));
    l.in_channels = static_cast<int>(r.le(4));
    l.out_channels = static_cast<int>(r.le(4));
    m.spec.layers.push_back(l);
  }
  m.spec.width_multiplier = std::bit_cast<double>(r.le(8));
  m.spec.input_resolution = static_cast<int>(r.le(4));
  m.spec.num_classes = static_cast<int>(r.le(4));
  try {
    propagate_shapes(m.spec);
  } catch (const Error& e) {
    throw Error(Errc::Corrupt, std::string("fingerprint describes an invalid network: ") + e.what());
  }
  for (const auto& l : m.spec.layers) {
    const auto count = static_cast<std::size_t>(layer_param_count(l));
    if (r.remaining() < count * 4) throw Error(Errc::Corrupt, "weight file truncated");
    std::vector<float> arr(count);
    for (auto& f : arr) f = std::bit_cast<float>(static_cast<std::uint32_t>(r.le(4)));
    m.weights.layers.push_back(std::move(arr));
  }
  if (r.remaining() != 0) throw Error(Errc::Corrupt, "trailing bytes after weights");
  return m;
}

inline void save_weights(const std::filesystem::path& path, const ArchitectureSpec& spec, const WeightBundle& w) {
  write_file(path, encode_weights(spec, w));
}

inline LoadedModel load_weights(const std::filesystem::path& path) { return decode_weights(read_file(path)); }

/// Loads and insists the file was written for `expected`.
inline WeightBundle load_weights(const std::filesystem::path& path, const ArchitectureSpec& expected) {
  auto m = load_weights(path);
  if (spec_fingerprint(m.spec) != spec_fingerprint(expected)) {
    throw Error(Errc::FingerprintMismatch, "weights were saved for " + model_name(m.spec) + " with " +
                                               std::to_string(m.spec.num_classes) + " classes");
  }
  return std::move(m.weights);
}

}  // namespace vigil::vmmr
