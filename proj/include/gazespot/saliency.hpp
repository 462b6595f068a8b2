#pragma once

#include <string>
#include <vector>

#include "gazespot/convnet.hpp"
#include "gazespot/raster.hpp"

namespace gazespot {

struct SaliencyMap {
  Raster map;  // image-resolution, min-max normalized
  std::string image_id;
  int label = 0;
};

inline Tensor image_to_tensor(const RgbImage& img) {
  Tensor t({3, img.height, img.width});
  std::size_t i = 0;
  for (int c = 0; c < 3; ++c)
    for (double v : img.channel[c].values) t.v[i++] = v;
  return t;
}

// Post-ReLU feature maps of the last conv layer: the conv index itself, or
// the ReLU directly after it when present.
inline int gradcam_target_layer(const Network& net) {
  int last_conv = -1;
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    if (net.layers[i].kind == LayerKind::Conv) last_conv = static_cast<int>(i);
  if (last_conv < 0) throw DataError("gradcam: network has no conv layer");
  if (last_conv + 1 < static_cast<int>(net.layers.size()) &&
      net.layers[last_conv + 1].kind == LayerKind::ReLU)
    return last_conv + 1;
  return last_conv;
}

// GradCAM for one image and one (true) category label. The score is the
// pre-softmax logit of the label; channel weights are the spatial means of
// its gradient on the target feature maps.
inline SaliencyMap gradcam(const Network& net, const RgbImage& image, int label,
                           const std::string& image_id = "") {
  if (label < 0 || label >= net.num_categories())
    throw DataError("gradcam: label out of range");
  const int target = gradcam_target_layer(net);

  Tensor batch = image_to_tensor(image);
  batch.shape.insert(batch.shape.begin(), 1);
  const ForwardRecord rec = forward(net, batch);

  Tensor dlogits(rec.logits().shape);
  dlogits.v[static_cast<std::size_t>(label)] = 1.0;
  BackpropOptions opts;
  opts.capture_activation = target;
  opts.stop_layer = static_cast<std::size_t>(target) + 1;
  const BackpropResult bp = backprop(net, rec, dlogits, opts);

  const Tensor& activation = rec.outputs[static_cast<std::size_t>(target)];
  const Tensor& grad = bp.captured;
  const int channels = activation.dim(1), h = activation.dim(2), w = activation.dim(3);

  Raster cam(w, h);
  const double inv_area = 1.0 / static_cast<double>(h * w);
  for (int c = 0; c < channels; ++c) {
    double alpha = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) alpha += grad.at4(0, c, y, x);
    alpha *= inv_area;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) cam.at(x, y) += alpha * activation.at4(0, c, y, x);
  }
  for (double& v : cam.values) v = v > 0.0 ? v : 0.0;  // ReLU

  SaliencyMap out;
  out.map = normalize_minmax(resample_bilinear(cam, image.width, image.height));
  out.image_id = image_id;
  out.label = label;
  return out;
}

}  // namespace gazespot
