#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "gazespot/convnet.hpp"
#include "gazespot/csv.hpp"
#include "gazespot/raster_io.hpp"

namespace gazespot {

// "GSNN1" model file: an ASCII header (one line per layer) followed by the
// parameter tensors as little-endian float32 in declaration order.
//
//   GSNN1 <in_channels> <in_height> <in_width> <n_layers>
//   conv <out_channels> <kernel> <stride> <pad> <frozen> <lr_factor>
//   relu
//   maxpool <kernel> <stride>
//   dense <units> <frozen> <lr_factor>
inline void write_network(const Network& net, const std::string& path) {
  std::ostringstream header;
  header << "GSNN1 " << net.in_channels << " " << net.in_height << " " << net.in_width << " "
         << net.layers.size() << "\n";
  for (const Layer& l : net.layers) {
    switch (l.kind) {
      case LayerKind::Conv:
        header << "conv " << l.out_channels << " " << l.kernel << " " << l.stride << " " << l.pad
               << " " << (l.frozen ? 1 : 0) << " " << format_double(l.lr_factor, 17) << "\n";
        break;
      case LayerKind::ReLU:
        header << "relu\n";
        break;
      case LayerKind::MaxPool:
        header << "maxpool " << l.kernel << " " << l.stride << "\n";
        break;
      case LayerKind::Dense:
        header << "dense " << l.units << " " << (l.frozen ? 1 : 0) << " "
               << format_double(l.lr_factor, 17) << "\n";
        break;
    }
  }
  std::string bytes = header.str();
  for (const Layer& l : net.layers) {
    if (!l.has_params()) continue;
    for (double w : l.weight.v) detail::put_f32_le(bytes, static_cast<float>(w));
    for (double b : l.bias.v) detail::put_f32_le(bytes, static_cast<float>(b));
  }
  detail::write_file_bytes(path, bytes);
}

inline Network read_network(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  std::size_t pos = 0;
  const auto next_line = [&]() {
    const std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) throw DataError(path + ": truncated GSNN1 header");
    std::string line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    return line;
  };

  Network net;
  std::size_t n_layers = 0;
  {
    std::istringstream in(next_line());
    std::string magic;
    in >> magic >> net.in_channels >> net.in_height >> net.in_width >> n_layers;
    if (!in || magic != "GSNN1") throw DataError(path + ": bad GSNN1 header");
  }
  for (std::size_t i = 0; i < n_layers; ++i) {
    std::istringstream in(next_line());
    std::string kind;
    in >> kind;
    Layer l;
    int frozen = 0;
    if (kind == "conv") {
      l.kind = LayerKind::Conv;
      in >> l.out_channels >> l.kernel >> l.stride >> l.pad >> frozen >> l.lr_factor;
    } else if (kind == "relu") {
      l.kind = LayerKind::ReLU;
    } else if (kind == "maxpool") {
      l.kind = LayerKind::MaxPool;
      in >> l.kernel >> l.stride;
    } else if (kind == "dense") {
      l.kind = LayerKind::Dense;
      in >> l.units >> frozen >> l.lr_factor;
    } else {
      throw DataError(path + ": unknown layer kind '" + kind + "'");
    }
    if (!in && kind != "relu") throw DataError(path + ": bad layer line " + std::to_string(i));
    l.frozen = frozen != 0;
    net.layers.push_back(l);
  }
  bind_shapes(net);

  std::size_t want = 0;
  for (const Layer& l : net.layers)
    if (l.has_params()) want += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  if (bytes.size() - pos != want * 4) throw DataError(path + ": GSNN1 payload size mismatch");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (Layer& l : net.layers) {
    if (!l.has_params()) continue;
    for (double& w : l.weight.v) {
      w = detail::get_f32_le(p);
      p += 4;
    }
    for (double& b : l.bias.v) {
      b = detail::get_f32_le(p);
      p += 4;
    }
  }
  return net;
}

inline void write_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
  CsvWriter out(path, "epoch,train_loss,val_loss,val_acc");
  for (const EpochStats& e : history)
    out.row({std::to_string(e.epoch), format_double(e.train_loss), format_double(e.val_loss),
             format_double(e.val_acc)});
}

}  // namespace gazespot
