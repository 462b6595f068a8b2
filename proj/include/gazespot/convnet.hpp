#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gazespot/error.hpp"
#include "gazespot/rng.hpp"
#include "gazespot/tensor.hpp"

namespace gazespot {

enum class LayerKind { Conv, ReLU, MaxPool, Dense };

// One network stage. Conv and Dense own parameters; ReLU and MaxPool are
// parameter-free. Frozen layers keep their parameters fixed through training.
struct Layer {
  LayerKind kind = LayerKind::ReLU;
  int out_channels = 0;  // conv
  int kernel = 0;        // conv / maxpool
  int stride = 1;        // conv / maxpool
  int pad = 0;           // conv
  int units = 0;         // dense
  bool frozen = false;
  double lr_factor = 1.0;
  Tensor weight;  // conv: (out_c, in_c, k, k); dense: (units, in_features)
  Tensor bias;    // (out_c) or (units)

  bool has_params() const { return kind == LayerKind::Conv || kind == LayerKind::Dense; }
  bool trainable() const { return has_params() && !frozen; }

  static Layer conv(int out_channels, int kernel, int stride, int pad) {
    Layer l;
    l.kind = LayerKind::Conv;
    l.out_channels = out_channels;
    l.kernel = kernel;
    l.stride = stride;
    l.pad = pad;
    return l;
  }
  static Layer relu() { return Layer{}; }
  static Layer maxpool(int kernel, int stride) {
    Layer l;
    l.kind = LayerKind::MaxPool;
    l.kernel = kernel;
    l.stride = stride;
    return l;
  }
  static Layer dense(int units) {
    Layer l;
    l.kind = LayerKind::Dense;
    l.units = units;
    return l;
  }
};

struct Network {
  int in_channels = 3;
  int in_height = 32;
  int in_width = 32;
  std::vector<Layer> layers;

  int num_categories() const {
    for (auto it = layers.rbegin(); it != layers.rend(); ++it)
      if (it->kind == LayerKind::Dense) return it->units;
    throw DataError("network has no dense layer");
  }
};

// Desk-scale default: three conv stages and a two-layer dense head.
inline Network make_desk_network(int num_categories, int in_height = 32, int in_width = 32) {
  Network net;
  net.in_channels = 3;
  net.in_height = in_height;
  net.in_width = in_width;
  net.layers = {Layer::conv(16, 5, 1, 2), Layer::relu(),  Layer::maxpool(2, 2),
                Layer::conv(32, 3, 1, 1), Layer::relu(),  Layer::maxpool(2, 2),
                Layer::conv(32, 3, 1, 1), Layer::relu(),  Layer::dense(64),
                Layer::relu(),            Layer::dense(num_categories)};
  return net;
}

namespace detail {

inline std::vector<int> layer_output_shape(const Layer& l, const std::vector<int>& in,
                                           std::size_t index) {
  const std::string where = "layer " + std::to_string(index);
  switch (l.kind) {
    case LayerKind::Conv: {
      if (in.size() != 4) throw DataError(where + " (conv): expected 4-D input, got " + shape_string(in));
      const int h = (in[2] + 2 * l.pad - l.kernel) / l.stride + 1;
      const int w = (in[3] + 2 * l.pad - l.kernel) / l.stride + 1;
      if (in[2] + 2 * l.pad < l.kernel || in[3] + 2 * l.pad < l.kernel)
        throw DataError(where + " (conv): kernel larger than padded input");
      return {in[0], l.out_channels, h, w};
    }
    case LayerKind::MaxPool: {
      if (in.size() != 4) throw DataError(where + " (maxpool): expected 4-D input");
      if (in[2] < l.kernel || in[3] < l.kernel)
        throw DataError(where + " (maxpool): window larger than input");
      const int h = (in[2] - l.kernel) / l.stride + 1;
      const int w = (in[3] - l.kernel) / l.stride + 1;
      return {in[0], in[1], h, w};
    }
    case LayerKind::Dense: {
      std::int64_t features = 1;
      for (std::size_t i = 1; i < in.size(); ++i) features *= in[i];
      (void)features;
      return {in[0], l.units};
    }
    case LayerKind::ReLU:
      return in;
  }
  throw DataError(where + ": unknown layer kind");
}

inline std::int64_t feature_count(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) n *= shape[i];
  return n;
}

}  // namespace detail

// Allocates parameter tensors to match the input shape flowing through the
// net. Must be called once before init/forward.
inline void bind_shapes(Network& net) {
  std::vector<int> shape = {1, net.in_channels, net.in_height, net.in_width};
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Layer& l = net.layers[i];
    if (l.kind == LayerKind::Conv) {
      const int in_c = shape[1];
      if (l.weight.empty()) {
        l.weight = Tensor({l.out_channels, in_c, l.kernel, l.kernel});
        l.bias = Tensor({l.out_channels});
      } else if (l.weight.shape != std::vector<int>{l.out_channels, in_c, l.kernel, l.kernel}) {
        throw DataError("layer " + std::to_string(i) + " (conv): weight shape mismatch");
      }
    } else if (l.kind == LayerKind::Dense) {
      const int in_f = static_cast<int>(detail::feature_count(shape));
      if (l.weight.empty()) {
        l.weight = Tensor({l.units, in_f});
        l.bias = Tensor({l.units});
      } else if (l.weight.shape != std::vector<int>{l.units, in_f}) {
        throw DataError("layer " + std::to_string(i) + " (dense): weight shape mismatch");
      }
    }
    shape = detail::layer_output_shape(l, shape, i);
  }
}

// He-style scaled Gaussian init, biases zero.
inline void init_weights(Network& net, std::uint64_t seed) {
  bind_shapes(net);
  Rng rng(seed);
  for (Layer& l : net.layers) {
    if (!l.has_params()) continue;
    const std::int64_t fan_in =
        l.kind == LayerKind::Conv
            ? static_cast<std::int64_t>(l.weight.dim(1)) * l.kernel * l.kernel
            : l.weight.dim(1);
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& w : l.weight.v) w = rng.normal(0.0, stddev);
    for (double& b : l.bias.v) b = 0.0;
  }
}

// Every layer's output, retained for backprop and GradCAM.
struct ForwardRecord {
  Tensor input;
  std::vector<Tensor> outputs;  // outputs[i] = activation after layer i

  const Tensor& layer_input(std::size_t i) const { return i == 0 ? input : outputs[i - 1]; }
  const Tensor& logits() const { return outputs.back(); }
};

namespace detail {

inline void forward_conv(const Layer& l, const Tensor& in, Tensor& out) {
  const int batch = in.dim(0), in_c = in.dim(1), in_h = in.dim(2), in_w = in.dim(3);
  const int out_c = out.dim(1), out_h = out.dim(2), out_w = out.dim(3);
  const int k = l.kernel, stride = l.stride, pad = l.pad;
  for (int n = 0; n < batch; ++n)
    for (int oc = 0; oc < out_c; ++oc) {
      const double b = l.bias.v[oc];
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) {
          double acc = b;
          const int y0 = oy * stride - pad;
          const int x0 = ox * stride - pad;
          for (int ic = 0; ic < in_c; ++ic)
            for (int ky = 0; ky < k; ++ky) {
              const int y = y0 + ky;
              if (y < 0 || y >= in_h) continue;
              const double* in_row = &in.v[((static_cast<std::size_t>(n) * in_c + ic) * in_h + y) * in_w];
              const double* w_row =
                  &l.weight.v[((static_cast<std::size_t>(oc) * in_c + ic) * k + ky) * k];
              for (int kx = 0; kx < k; ++kx) {
                const int x = x0 + kx;
                if (x < 0 || x >= in_w) continue;
                acc += w_row[kx] * in_row[x];
              }
            }
          out.at4(n, oc, oy, ox) = acc;
        }
    }
}

inline void forward_maxpool(const Layer& l, const Tensor& in, Tensor& out) {
  const int batch = in.dim(0), ch = in.dim(1), in_h = in.dim(2), in_w = in.dim(3);
  const int out_h = out.dim(2), out_w = out.dim(3);
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < ch; ++c)
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          for (int ky = 0; ky < l.kernel; ++ky)
            for (int kx = 0; kx < l.kernel; ++kx) {
              const int y = oy * l.stride + ky, x = ox * l.stride + kx;
              if (y < in_h && x < in_w) best = std::max(best, in.at4(n, c, y, x));
            }
          out.at4(n, c, oy, ox) = best;
        }
}

inline void forward_dense(const Layer& l, const Tensor& in, Tensor& out) {
  const int batch = in.dim(0);
  const auto in_f = static_cast<int>(feature_count(in.shape));
  for (int n = 0; n < batch; ++n) {
    const double* x = &in.v[static_cast<std::size_t>(n) * in_f];
    for (int u = 0; u < l.units; ++u) {
      const double* w = &l.weight.v[static_cast<std::size_t>(u) * in_f];
      double acc = l.bias.v[u];
      for (int f = 0; f < in_f; ++f) acc += w[f] * x[f];
      out.v[static_cast<std::size_t>(n) * l.units + u] = acc;
    }
  }
}

}  // namespace detail

// Forward pass starting from the activation feeding layer `first_layer`.
// Used by fine-tuning (cached frozen features) and the saliency checks.
inline ForwardRecord forward_from(const Network& net, std::size_t first_layer,
                                  const Tensor& input) {
  ForwardRecord rec;
  rec.input = input;
  std::vector<int> shape = input.shape;
  const Tensor* current = &rec.input;
  for (std::size_t i = first_layer; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    if (l.kind == LayerKind::Conv && (shape.size() != 4 || shape[1] != l.weight.dim(1)))
      throw DataError("layer " + std::to_string(i) + " (conv): input shape " +
                      shape_string(shape) + " does not match weights");
    if (l.kind == LayerKind::Dense &&
        detail::feature_count(shape) != l.weight.dim(1))
      throw DataError("layer " + std::to_string(i) + " (dense): input features " +
                      std::to_string(detail::feature_count(shape)) + " != " +
                      std::to_string(l.weight.dim(1)));
    std::vector<int> out_shape = detail::layer_output_shape(l, shape, i);
    Tensor out(out_shape);
    switch (l.kind) {
      case LayerKind::Conv:
        detail::forward_conv(l, *current, out);
        break;
      case LayerKind::ReLU:
        for (std::int64_t j = 0; j < current->size(); ++j)
          out.v[j] = current->v[j] > 0.0 ? current->v[j] : 0.0;
        break;
      case LayerKind::MaxPool:
        detail::forward_maxpool(l, *current, out);
        break;
      case LayerKind::Dense:
        detail::forward_dense(l, *current, out);
        break;
    }
    rec.outputs.push_back(std::move(out));
    current = &rec.outputs.back();
    shape = out_shape;
  }
  return rec;
}

inline ForwardRecord forward(const Network& net, const Tensor& batch) {
  if (batch.shape.size() != 4 || batch.dim(1) != net.in_channels ||
      batch.dim(2) != net.in_height || batch.dim(3) != net.in_width)
    throw DataError("forward: batch shape " + shape_string(batch.shape) +
                    " does not match network input");
  return forward_from(net, 0, batch);
}

// Per-layer parameter gradients; tensors are empty for frozen or
// parameter-free layers (frozen gradients are discarded by contract).
struct Gradients {
  std::vector<Tensor> weight;
  std::vector<Tensor> bias;
};

namespace detail {

inline void backward_conv(const Layer& l, const Tensor& in, const Tensor& dout, Tensor* din,
                          Tensor* dweight, Tensor* dbias) {
  const int batch = in.dim(0), in_c = in.dim(1), in_h = in.dim(2), in_w = in.dim(3);
  const int out_c = dout.dim(1), out_h = dout.dim(2), out_w = dout.dim(3);
  const int k = l.kernel, stride = l.stride, pad = l.pad;
  for (int n = 0; n < batch; ++n)
    for (int oc = 0; oc < out_c; ++oc)
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) {
          const double g = dout.at4(n, oc, oy, ox);
          if (g == 0.0) continue;
          if (dbias) dbias->v[oc] += g;
          const int y0 = oy * stride - pad;
          const int x0 = ox * stride - pad;
          for (int ic = 0; ic < in_c; ++ic)
            for (int ky = 0; ky < k; ++ky) {
              const int y = y0 + ky;
              if (y < 0 || y >= in_h) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int x = x0 + kx;
                if (x < 0 || x >= in_w) continue;
                const std::size_t wi = ((static_cast<std::size_t>(oc) * in_c + ic) * k + ky) * k + kx;
                if (dweight) dweight->v[wi] += g * in.at4(n, ic, y, x);
                if (din) din->at4(n, ic, y, x) += g * l.weight.v[wi];
              }
            }
        }
}

inline void backward_maxpool(const Layer& l, const Tensor& in, const Tensor& dout, Tensor& din) {
  const int batch = in.dim(0), ch = in.dim(1), in_h = in.dim(2), in_w = in.dim(3);
  const int out_h = dout.dim(2), out_w = dout.dim(3);
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < ch; ++c)
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) {
          // Route to the first maximum in scan order.
          double best = -std::numeric_limits<double>::infinity();
          int by = -1, bx = -1;
          for (int ky = 0; ky < l.kernel; ++ky)
            for (int kx = 0; kx < l.kernel; ++kx) {
              const int y = oy * l.stride + ky, x = ox * l.stride + kx;
              if (y < in_h && x < in_w && in.at4(n, c, y, x) > best) {
                best = in.at4(n, c, y, x);
                by = y;
                bx = x;
              }
            }
          din.at4(n, c, by, bx) += dout.at4(n, c, oy, ox);
        }
}

inline void backward_dense(const Layer& l, const Tensor& in, const Tensor& dout, Tensor* din,
                           Tensor* dweight, Tensor* dbias) {
  const int batch = in.dim(0);
  const auto in_f = static_cast<int>(feature_count(in.shape));
  for (int n = 0; n < batch; ++n) {
    const double* x = &in.v[static_cast<std::size_t>(n) * in_f];
    double* dx = din ? &din->v[static_cast<std::size_t>(n) * in_f] : nullptr;
    for (int u = 0; u < l.units; ++u) {
      const double g = dout.v[static_cast<std::size_t>(n) * l.units + u];
      if (g == 0.0) continue;
      if (dbias) dbias->v[u] += g;
      const double* w = &l.weight.v[static_cast<std::size_t>(u) * in_f];
      double* dw = dweight ? &dweight->v[static_cast<std::size_t>(u) * in_f] : nullptr;
      for (int f = 0; f < in_f; ++f) {
        if (dw) dw[f] += g * x[f];
        if (dx) dx[f] += g * w[f];
      }
    }
  }
}

}  // namespace detail

struct BackpropOptions {
  // Stop propagating once every layer below this index needs no gradient.
  std::size_t stop_layer = 0;
  // If >= 0, capture d(objective)/d(output of this layer).
  int capture_activation = -1;
};

struct BackpropResult {
  Gradients grads;
  Tensor captured;  // set when capture_activation >= 0
};

// Reverse pass from an upstream gradient on the logits. Parameter gradients
// are produced for trainable layers only.
inline BackpropResult backprop(const Network& net, const ForwardRecord& rec,
                               const Tensor& dlogits, const BackpropOptions& opts = {}) {
  const std::size_t n_layers = net.layers.size();
  BackpropResult result;
  result.grads.weight.resize(n_layers);
  result.grads.bias.resize(n_layers);

  // The earliest layer the reverse walk must still visit: capturing layer
  // t's output gradient means iterating down to idx == t itself.
  std::size_t lowest_needed = opts.stop_layer;
  if (opts.capture_activation >= 0)
    lowest_needed = std::min(lowest_needed, static_cast<std::size_t>(opts.capture_activation));
  for (std::size_t i = 0; i < n_layers; ++i)
    if (net.layers[i].trainable()) {
      lowest_needed = std::min(lowest_needed, i);
      break;
    }

  Tensor dout = dlogits;
  for (std::size_t idx = n_layers; idx-- > lowest_needed;) {
    const Layer& l = net.layers[idx];
    const Tensor& in = rec.layer_input(idx);
    if (static_cast<int>(idx) == opts.capture_activation) result.captured = dout;
    const bool need_din = idx > lowest_needed;
    Tensor din;
    if (need_din) din = Tensor(in.shape);
    Tensor* dw = nullptr;
    Tensor* db = nullptr;
    if (l.trainable()) {
      result.grads.weight[idx] = Tensor(l.weight.shape);
      result.grads.bias[idx] = Tensor(l.bias.shape);
      dw = &result.grads.weight[idx];
      db = &result.grads.bias[idx];
    }
    switch (l.kind) {
      case LayerKind::Conv:
        detail::backward_conv(l, in, dout, need_din ? &din : nullptr, dw, db);
        break;
      case LayerKind::ReLU:
        if (need_din)
          for (std::int64_t j = 0; j < in.size(); ++j)
            din.v[j] = in.v[j] > 0.0 ? dout.v[j] : 0.0;
        break;
      case LayerKind::MaxPool:
        if (need_din) detail::backward_maxpool(l, in, dout, din);
        break;
      case LayerKind::Dense:
        detail::backward_dense(l, in, dout, need_din ? &din : nullptr, dw, db);
        break;
    }
    if (!need_din) break;
    dout = std::move(din);
  }
  return result;
}

// Mean softmax cross-entropy over the batch plus d(loss)/d(logits).
inline double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                                    Tensor* dlogits) {
  const int batch = logits.dim(0), classes = logits.dim(1);
  if (static_cast<int>(labels.size()) != batch)
    throw DataError("softmax_cross_entropy: label count != batch size");
  if (dlogits) *dlogits = Tensor(logits.shape);
  double loss = 0.0;
  for (int n = 0; n < batch; ++n) {
    const int label = labels[n];
    if (label < 0 || label >= classes) throw DataError("label out of range");
    const double* row = &logits.v[static_cast<std::size_t>(n) * classes];
    double hi = row[0];
    for (int c = 1; c < classes; ++c) hi = std::max(hi, row[c]);
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) sum += std::exp(row[c] - hi);
    const double log_z = hi + std::log(sum);
    loss += log_z - row[label];
    if (dlogits) {
      double* drow = &dlogits->v[static_cast<std::size_t>(n) * classes];
      for (int c = 0; c < classes; ++c)
        drow[c] = (std::exp(row[c] - log_z) - (c == label ? 1.0 : 0.0)) / batch;
    }
  }
  loss /= batch;
  if (!std::isfinite(loss)) throw NumericError("softmax_cross_entropy: non-finite loss");
  return loss;
}

inline std::pair<double, Gradients> loss_and_grads(const Network& net, const Tensor& batch,
                                                   const std::vector<int>& labels) {
  const ForwardRecord rec = forward(net, batch);
  Tensor dlogits;
  const double loss = softmax_cross_entropy(rec.logits(), labels, &dlogits);
  BackpropResult bp = backprop(net, rec, dlogits);
  return {loss, std::move(bp.grads)};
}

// Classical SGDM: v <- momentum*v - lr*g; w <- w + v, with lr scaled by the
// layer's learn-rate factor. Frozen layers are untouched.
struct Velocities {
  std::vector<Tensor> weight;
  std::vector<Tensor> bias;

  static Velocities zeros_like(const Network& net) {
    Velocities v;
    v.weight.resize(net.layers.size());
    v.bias.resize(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i)
      if (net.layers[i].trainable()) {
        v.weight[i] = Tensor(net.layers[i].weight.shape);
        v.bias[i] = Tensor(net.layers[i].bias.shape);
      }
    return v;
  }
};

inline void sgdm_step(Network& net, const Gradients& grads, Velocities& vel, double base_lr,
                      double momentum) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Layer& l = net.layers[i];
    if (!l.trainable()) continue;
    const double lr = base_lr * l.lr_factor;
    const Tensor& gw = grads.weight[i];
    const Tensor& gb = grads.bias[i];
    if (gw.empty()) continue;  // no gradient contribution this step
    for (std::int64_t j = 0; j < l.weight.size(); ++j) {
      vel.weight[i].v[j] = momentum * vel.weight[i].v[j] - lr * gw.v[j];
      l.weight.v[j] += vel.weight[i].v[j];
    }
    for (std::int64_t j = 0; j < l.bias.size(); ++j) {
      vel.bias[i].v[j] = momentum * vel.bias[i].v[j] - lr * gb.v[j];
      l.bias.v[j] += vel.bias[i].v[j];
    }
  }
}

struct TrainConfig {
  int batch_size = 42;
  double base_lr = 1e-4;
  double momentum = 0.9;
  int max_epochs = 30;
  int patience = 5;
  double min_delta = 1e-4;
  double val_fraction = 0.15;
  double new_head_lr_factor = 20.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size < 1) throw DataError("batch_size must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
      throw DataError("val_fraction must be in (0,1)");
    if (max_epochs < 1 || patience < 1) throw DataError("epochs/patience must be >= 1");
  }
};

// Stop once validation loss has gone `patience` consecutive epochs without
// improving on the best by more than min_delta.
struct EarlyStopper {
  double min_delta = 1e-4;
  int patience = 5;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int stale = 0;

  // Returns true when this epoch became the new best.
  bool observe(int epoch, double val_loss) {
    if (best - val_loss > min_delta) {
      best = val_loss;
      best_epoch = epoch;
      stale = 0;
      return true;
    }
    ++stale;
    return false;
  }
  bool should_stop() const { return stale >= patience; }
};

struct LabeledData {
  std::vector<Tensor> images;  // each (C, H, W)
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct FineTuneResult {
  Network net;
  std::vector<EpochStats> history;
  int best_epoch = 0;
};

namespace detail {

inline Tensor stack_batch(const std::vector<Tensor>& images, const std::vector<std::size_t>& idx,
                          std::size_t begin, std::size_t end) {
  const Tensor& first = images[idx[begin]];
  std::vector<int> shape = first.shape;
  shape.insert(shape.begin(), static_cast<int>(end - begin));
  Tensor batch(shape);
  const std::size_t stride = first.v.size();
  for (std::size_t i = begin; i < end; ++i)
    std::copy(images[idx[i]].v.begin(), images[idx[i]].v.end(),
              batch.v.begin() + static_cast<std::ptrdiff_t>((i - begin) * stride));
  return batch;
}

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainOutcome {
  std::vector<EpochStats> history;
  int best_epoch = 0;
};

inline EvalResult eval_on(const Network& net, const std::vector<Tensor>& images,
                          const std::vector<int>& labels, const std::vector<std::size_t>& idx,
                          int batch_size) {
  EvalResult r;
  std::size_t correct = 0;
  for (std::size_t b = 0; b < idx.size(); b += batch_size) {
    const std::size_t e = std::min(idx.size(), b + batch_size);
    const Tensor batch = stack_batch(images, idx, b, e);
    std::vector<int> batch_labels;
    for (std::size_t i = b; i < e; ++i) batch_labels.push_back(labels[idx[i]]);
    const ForwardRecord rec = forward_from(net, 0, batch);
    r.loss += softmax_cross_entropy(rec.logits(), batch_labels, nullptr) *
              static_cast<double>(e - b);
    const Tensor& logits = rec.logits();
    const int classes = logits.dim(1);
    for (std::size_t i = 0; i < e - b; ++i) {
      const double* row = &logits.v[i * classes];
      int arg = 0;
      for (int c = 1; c < classes; ++c)
        if (row[c] > row[arg]) arg = c;  // ties break toward the lowest index
      if (arg == batch_labels[i]) ++correct;
    }
  }
  r.loss /= static_cast<double>(idx.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(idx.size());
  return r;
}

// Shared SGDM epoch loop with validation-loss early stopping and best-weight
// restoration. `net` is left holding the best epoch's weights.
inline TrainOutcome run_training(Network& net, const std::vector<Tensor>& features,
                                 const std::vector<int>& labels,
                                 const std::vector<std::size_t>& train_idx,
                                 const std::vector<std::size_t>& val_idx,
                                 const TrainConfig& config, Rng& rng) {
  Velocities vel = Velocities::zeros_like(net);
  EarlyStopper stopper{config.min_delta, config.patience};
  std::vector<Layer> best_layers = net.layers;
  TrainOutcome outcome;

  std::vector<std::size_t> order = train_idx;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double train_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      const Tensor batch = stack_batch(features, order, b, e);
      std::vector<int> batch_labels;
      for (std::size_t i = b; i < e; ++i) batch_labels.push_back(labels[order[i]]);
      const ForwardRecord rec = forward_from(net, 0, batch);
      Tensor dlogits;
      double loss;
      try {
        loss = softmax_cross_entropy(rec.logits(), batch_labels, &dlogits);
      } catch (const NumericError&) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch));
      }
      train_loss += loss * static_cast<double>(e - b);
      BackpropResult bp = backprop(net, rec, dlogits);
      sgdm_step(net, bp.grads, vel, config.base_lr, config.momentum);
    }
    train_loss /= static_cast<double>(order.size());

    const EvalResult val = eval_on(net, features, labels, val_idx, config.batch_size);
    outcome.history.push_back({epoch, train_loss, val.loss, val.accuracy});
    if (stopper.observe(epoch, val.loss)) best_layers = net.layers;
    if (stopper.should_stop()) break;
  }
  net.layers = std::move(best_layers);
  outcome.best_epoch = stopper.best_epoch;
  return outcome;
}

}  // namespace detail

// Transfer-learning run: the final dense layer is replaced by a fresh one
// sized to the category count (learn-rate factor `new_head_lr_factor`), all
// conv layers are frozen, and training early-stops on validation loss with
// best-weights restoration.
//
// Because the frozen prefix never changes, its activations are computed once
// per sample and training runs on the trainable suffix only. This is
// numerically identical to forwarding the whole net every step.
inline FineTuneResult fine_tune(const Network& base_net, const LabeledData& data,
                                const TrainConfig& config) {
  config.validate();
  if (data.size() == 0) throw DataError("fine_tune: empty dataset");
  if (data.images.size() != data.labels.size())
    throw DataError("fine_tune: image/label count mismatch");

  const int num_categories = *std::max_element(data.labels.begin(), data.labels.end()) + 1;
  if (num_categories < 2) throw DataError("fine_tune: need >= 2 categories");
  std::vector<std::vector<std::size_t>> by_label(num_categories);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] < 0) throw DataError("fine_tune: negative label");
    by_label[data.labels[i]].push_back(i);
  }
  for (int c = 0; c < num_categories; ++c)
    if (by_label[c].empty())
      throw DataError("fine_tune: category " + std::to_string(c) + " has no samples");

  Network net = base_net;
  for (Layer& l : net.layers)
    if (l.kind == LayerKind::Conv) l.frozen = true;

  // Replace the classification head.
  int last_dense = -1;
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    if (net.layers[i].kind == LayerKind::Dense) last_dense = static_cast<int>(i);
  if (last_dense < 0) throw DataError("fine_tune: network has no dense layer");
  Rng rng(config.seed);
  {
    Layer& head = net.layers[last_dense];
    const int in_f = head.weight.dim(1);
    head.units = num_categories;
    head.weight = Tensor({num_categories, in_f});
    head.bias = Tensor({num_categories});
    head.frozen = false;
    head.lr_factor = config.new_head_lr_factor;
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_f));
    for (double& w : head.weight.v) w = rng.normal(0.0, stddev);
  }
  bind_shapes(net);

  // Stratified train/val split, reshuffled per seed.
  std::vector<std::size_t> train_idx, val_idx;
  for (int c = 0; c < num_categories; ++c) {
    std::vector<std::size_t> idx = by_label[c];
    rng.shuffle(idx.begin(), idx.end());
    auto n_val = static_cast<std::size_t>(
        std::llround(config.val_fraction * static_cast<double>(idx.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, idx.size() - 1);
    if (idx.size() < 2)
      throw DataError("fine_tune: category " + std::to_string(c) +
                      " needs >= 2 samples for a train/val split");
    val_idx.insert(val_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_idx.insert(train_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }

  // Longest prefix with no trainable parameters; its output per sample is
  // training-invariant and cached.
  std::size_t prefix = 0;
  while (prefix < net.layers.size() && !net.layers[prefix].trainable()) ++prefix;

  // Features are stored without the batch dimension; stack_batch adds it.
  Network prefix_net = net;
  prefix_net.layers.resize(prefix);
  std::vector<Tensor> features(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (prefix == 0) {
      features[i] = data.images[i];
    } else {
      Tensor single = data.images[i];
      single.shape.insert(single.shape.begin(), 1);
      ForwardRecord rec = forward_from(prefix_net, 0, single);
      features[i] = std::move(rec.outputs.back());
      features[i].shape.erase(features[i].shape.begin());  // drop batch dim
    }
  }

  // Suffix-only network view sharing the layer definitions from `net`.
  Network head;
  head.layers.assign(net.layers.begin() + static_cast<std::ptrdiff_t>(prefix), net.layers.end());
  const std::vector<int>& feat_shape = features.front().shape;
  head.in_channels = feat_shape.size() == 3 ? feat_shape[0] : 1;
  head.in_height = feat_shape.size() == 3 ? feat_shape[1] : 1;
  head.in_width = feat_shape.size() == 3 ? feat_shape[2] : static_cast<int>(feat_shape.back());

  const detail::TrainOutcome outcome =
      detail::run_training(head, features, data.labels, train_idx, val_idx, config, rng);

  // Stitch the best-epoch suffix weights back into the full net.
  std::copy(head.layers.begin(), head.layers.end(),
            net.layers.begin() + static_cast<std::ptrdiff_t>(prefix));

  FineTuneResult result;
  result.net = std::move(net);
  result.history = outcome.history;
  result.best_epoch = outcome.best_epoch;
  return result;
}

// From-scratch training of every unfrozen layer; used to produce the
// pretrained base the fine-tuning runs start from. Same split and early
// stopping rules as fine_tune, no head replacement or freezing.
inline FineTuneResult train_scratch(const Network& base_net, const LabeledData& data,
                                    const TrainConfig& config) {
  config.validate();
  if (data.size() == 0) throw DataError("train_scratch: empty dataset");
  const int num_categories = *std::max_element(data.labels.begin(), data.labels.end()) + 1;
  if (num_categories < 2) throw DataError("train_scratch: need >= 2 categories");
  if (base_net.num_categories() != num_categories)
    throw DataError("train_scratch: final dense layer does not match category count");

  std::vector<std::vector<std::size_t>> by_label(num_categories);
  for (std::size_t i = 0; i < data.size(); ++i) by_label[data.labels[i]].push_back(i);

  Network net = base_net;
  bind_shapes(net);
  Rng rng(config.seed);
  std::vector<std::size_t> train_idx, val_idx;
  for (int c = 0; c < num_categories; ++c) {
    std::vector<std::size_t> idx = by_label[c];
    if (idx.size() < 2)
      throw DataError("train_scratch: category " + std::to_string(c) + " needs >= 2 samples");
    rng.shuffle(idx.begin(), idx.end());
    auto n_val = static_cast<std::size_t>(
        std::llround(config.val_fraction * static_cast<double>(idx.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, idx.size() - 1);
    val_idx.insert(val_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_idx.insert(train_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }

  const detail::TrainOutcome outcome =
      detail::run_training(net, data.images, data.labels, train_idx, val_idx, config, rng);

  FineTuneResult result;
  result.net = std::move(net);
  result.history = outcome.history;
  result.best_epoch = outcome.best_epoch;
  return result;
}

struct Evaluation {
  double accuracy = 0.0;
  std::vector<std::int64_t> confusion;  // confusion[true * C + pred]
  int num_categories = 0;
};

inline Evaluation evaluate_accuracy(const Network& net, const LabeledData& data) {
  if (data.size() == 0) throw DataError("evaluate_accuracy: empty dataset");
  const int classes = net.num_categories();
  Evaluation ev;
  ev.num_categories = classes;
  ev.confusion.assign(static_cast<std::size_t>(classes) * classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Tensor single = data.images[i];
    single.shape.insert(single.shape.begin(), 1);
    const ForwardRecord rec = forward_from(net, 0, single);
    const Tensor& logits = rec.logits();
    int arg = 0;
    for (int c = 1; c < classes; ++c)
      if (logits.v[c] > logits.v[arg]) arg = c;
    const int label = data.labels[i];
    if (label < 0 || label >= classes) throw DataError("evaluate_accuracy: label out of range");
    ++ev.confusion[static_cast<std::size_t>(label) * classes + arg];
    if (arg == label) ++correct;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return ev;
}

}  // namespace gazespot
