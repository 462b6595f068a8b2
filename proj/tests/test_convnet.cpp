#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "gazespot/convnet.hpp"
#include "gazespot/convnet_io.hpp"
#include "gazespot/rng.hpp"

using namespace gazespot;

namespace {

Tensor random_batch(const Network& net, int batch, Rng& rng) {
  Tensor t({batch, net.in_channels, net.in_height, net.in_width});
  for (double& v : t.v) v = rng.uniform(-1.0, 1.0);
  return t;
}

std::vector<int> random_labels(int batch, int classes, Rng& rng) {
  std::vector<int> labels;
  for (int i = 0; i < batch; ++i) labels.push_back(static_cast<int>(rng.below(classes)));
  return labels;
}

double loss_of(const Network& net, const Tensor& batch, const std::vector<int>& labels) {
  const ForwardRecord rec = forward(net, batch);
  return softmax_cross_entropy(rec.logits(), labels, nullptr);
}

// ReLU sign pattern of every ReLU layer's input. The loss is piecewise
// smooth in the parameters; a central difference is only a valid derivative
// estimate while both evaluations stay in the same linear region, so probes
// whose +-eps passes flip any ReLU are skipped.
std::vector<bool> relu_routing(const Network& net, const Tensor& batch) {
  const ForwardRecord rec = forward(net, batch);
  std::vector<bool> signature;
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    if (net.layers[i].kind == LayerKind::ReLU)
      for (double v : rec.layer_input(i).v) signature.push_back(v > 0.0);
  return signature;
}

// Central finite differences against analytic gradients over every
// parameter of every layer; returns the worst relative error and the number
// of (valid) parameters probed.
std::pair<double, int> gradient_check(Network net, const Tensor& batch,
                                      const std::vector<int>& labels, double eps = 1e-4) {
  const auto [loss, grads] = loss_and_grads(net, batch, labels);
  (void)loss;
  const std::vector<bool> routing = relu_routing(net, batch);
  double worst = 0.0;
  int probes = 0;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    Layer& l = net.layers[li];
    if (!l.has_params() || l.frozen) continue;
    for (int which = 0; which < 2; ++which) {
      Tensor& param = which == 0 ? l.weight : l.bias;
      const Tensor& grad = which == 0 ? grads.weight[li] : grads.bias[li];
      for (std::int64_t i = 0; i < param.size(); ++i) {
        const double keep = param.v[i];
        param.v[i] = keep + eps;
        const double up = loss_of(net, batch, labels);
        const bool same_up = relu_routing(net, batch) == routing;
        param.v[i] = keep - eps;
        const double down = loss_of(net, batch, labels);
        const bool same_down = relu_routing(net, batch) == routing;
        param.v[i] = keep;
        if (!same_up || !same_down) continue;  // kink crossed; FD invalid here
        const double fd = (up - down) / (2.0 * eps);
        const double denom = std::max({std::fabs(fd), std::fabs(grad.v[i]), 1e-6});
        worst = std::max(worst, std::fabs(fd - grad.v[i]) / denom);
        ++probes;
      }
    }
  }
  return {worst, probes};
}

}  // namespace

TEST_CASE("forward fixtures") {
  SECTION("zero-weight, zero-bias net gives all-zero logits") {
    Network net;
    net.in_channels = 3;
    net.in_height = 6;
    net.in_width = 6;
    net.layers = {Layer::conv(4, 3, 1, 1), Layer::relu(), Layer::dense(5)};
    bind_shapes(net);
    Rng rng(1);
    const Tensor batch = random_batch(net, 2, rng);
    const ForwardRecord rec = forward(net, batch);
    for (double v : rec.logits().v) REQUIRE(v == 0.0);
  }
  SECTION("1x1 conv with weight 2 on constant-1 input doubles it") {
    Network net;
    net.in_channels = 1;
    net.in_height = 4;
    net.in_width = 4;
    net.layers = {Layer::conv(1, 1, 1, 0)};
    bind_shapes(net);
    net.layers[0].weight.v = {2.0};
    Tensor batch({1, 1, 4, 4});
    for (double& v : batch.v) v = 1.0;
    const ForwardRecord rec = forward(net, batch);
    for (double v : rec.logits().v) REQUIRE(v == 2.0);
  }
  SECTION("two-layer fixture matches hand computation") {
    Network net;
    net.in_channels = 1;
    net.in_height = 3;
    net.in_width = 3;
    net.layers = {Layer::conv(1, 2, 1, 0), Layer::relu(), Layer::dense(2)};
    bind_shapes(net);
    net.layers[0].weight.v = {1.0, -1.0, 0.5, 2.0};
    net.layers[0].bias.v = {0.25};
    net.layers[2].weight.v = {1.0, 0.0, -1.0, 0.5, 0.0, 2.0, 0.0, -0.25};
    net.layers[2].bias.v = {0.0, 0.5};

    Tensor batch({1, 1, 3, 3});
    batch.v = {1, 2, 0, 0, 1, -1, 2, 0, 1};
    const ForwardRecord rec = forward(net, batch);
    // Conv features by hand: 1.25, 0.75, 0.25, 4.25; dense by hand below.
    REQUIRE_THAT(rec.logits().v[0], Catch::Matchers::WithinAbs(3.125, 1e-6));
    REQUIRE_THAT(rec.logits().v[1], Catch::Matchers::WithinAbs(0.9375, 1e-6));
  }
  SECTION("shape mismatch names the layer") {
    Network net;
    net.in_channels = 1;
    net.in_height = 3;
    net.in_width = 3;
    net.layers = {Layer::maxpool(4, 1)};
    try {
      bind_shapes(net);
      Tensor batch({1, 1, 3, 3});
      forward(net, batch);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      REQUIRE(std::string(e.what()).find("layer 0") != std::string::npos);
    }
  }
}

TEST_CASE("softmax cross-entropy") {
  SECTION("uniform logits give ln(C)") {
    Tensor logits({3, 7});
    const double loss = softmax_cross_entropy(logits, {0, 3, 6}, nullptr);
    REQUIRE_THAT(loss, Catch::Matchers::WithinAbs(std::log(7.0), 1e-12));
  }
  SECTION("duplicated sample leaves gradients unchanged (mean reduction)") {
    Network net;
    net.in_channels = 2;
    net.in_height = 5;
    net.in_width = 5;
    net.layers = {Layer::conv(3, 3, 1, 1), Layer::relu(), Layer::maxpool(2, 2), Layer::dense(4)};
    init_weights(net, 77);
    Rng rng(3);
    const Tensor one = random_batch(net, 1, rng);
    Tensor two({2, 2, 5, 5});
    std::copy(one.v.begin(), one.v.end(), two.v.begin());
    std::copy(one.v.begin(), one.v.end(), two.v.begin() + one.size());
    const auto [l1, g1] = loss_and_grads(net, one, {2});
    const auto [l2, g2] = loss_and_grads(net, two, {2, 2});
    REQUIRE_THAT(l2, Catch::Matchers::WithinRel(l1, 1e-12));
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
      if (g1.weight[li].empty()) continue;
      for (std::int64_t i = 0; i < g1.weight[li].size(); ++i)
        REQUIRE_THAT(g2.weight[li].v[i], Catch::Matchers::WithinAbs(g1.weight[li].v[i], 1e-12));
    }
  }
}

TEST_CASE("gradients match central finite differences") {
  // Covers every layer kind: conv with padding and stride, relu, maxpool,
  // dense stacks. Well over 100 parameters are probed in total.
  struct Case {
    const char* name;
    Network net;
    int batch;
  };
  std::vector<Case> cases;
  {
    Network net;
    net.in_channels = 2;
    net.in_height = 6;
    net.in_width = 6;
    net.layers = {Layer::conv(3, 3, 1, 1), Layer::relu(), Layer::maxpool(2, 2),
                  Layer::dense(6),         Layer::relu(), Layer::dense(3)};
    cases.push_back({"conv-relu-pool-dense", net, 3});
  }
  {
    Network net;
    net.in_channels = 1;
    net.in_height = 7;
    net.in_width = 7;
    net.layers = {Layer::conv(2, 3, 2, 0), Layer::relu(), Layer::conv(3, 2, 1, 1),
                  Layer::relu(), Layer::dense(4)};
    cases.push_back({"strided-conv", net, 2});
  }
  {
    Network net;
    net.in_channels = 3;
    net.in_height = 5;
    net.in_width = 4;
    net.layers = {Layer::maxpool(2, 1), Layer::conv(2, 2, 1, 0), Layer::dense(2)};
    cases.push_back({"pool-first", net, 2});
  }

  int total_probes = 0;
  for (Case& c : cases) {
    INFO(c.name);
    init_weights(c.net, splitmix64(std::hash<std::string>{}(c.name)));
    Rng rng(1234);
    const Tensor batch = random_batch(c.net, c.batch, rng);
    const auto labels = random_labels(c.batch, c.net.num_categories(), rng);
    const auto [worst, probes] = gradient_check(c.net, batch, labels);
    REQUIRE(worst < 1e-4);
    total_probes += probes;
  }
  REQUIRE(total_probes >= 100);
}

TEST_CASE("frozen layers produce no parameter gradients") {
  Network net;
  net.in_channels = 1;
  net.in_height = 6;
  net.in_width = 6;
  net.layers = {Layer::conv(2, 3, 1, 1), Layer::relu(), Layer::dense(3)};
  init_weights(net, 5);
  net.layers[0].frozen = true;
  Rng rng(6);
  const Tensor batch = random_batch(net, 2, rng);
  const auto [loss, grads] = loss_and_grads(net, batch, {0, 2});
  (void)loss;
  REQUIRE(grads.weight[0].empty());  // discarded
  REQUIRE(!grads.weight[2].empty());
  double magnitude = 0.0;
  for (double g : grads.weight[2].v) magnitude += std::fabs(g);
  REQUIRE(magnitude > 0.0);
}

TEST_CASE("sgdm_step") {
  Network net;
  net.in_channels = 1;
  net.in_height = 1;
  net.in_width = 1;
  net.layers = {Layer::dense(1)};
  bind_shapes(net);

  const auto make_grads = [&](double g) {
    Gradients grads;
    grads.weight.resize(1);
    grads.bias.resize(1);
    grads.weight[0] = Tensor({1, 1});
    grads.weight[0].v[0] = g;
    grads.bias[0] = Tensor({1});
    return grads;
  };

  SECTION("plain step without momentum: w = 1 - 0.1*0.5 = 0.95") {
    net.layers[0].weight.v[0] = 1.0;
    Velocities vel = Velocities::zeros_like(net);
    sgdm_step(net, make_grads(0.5), vel, 0.1, 0.0);
    REQUIRE_THAT(net.layers[0].weight.v[0], Catch::Matchers::WithinAbs(0.95, 1e-15));
  }
  SECTION("momentum recursion: v1 = -0.1, v2 = -0.19, w = w0 - 0.29") {
    net.layers[0].weight.v[0] = 2.0;
    Velocities vel = Velocities::zeros_like(net);
    sgdm_step(net, make_grads(1.0), vel, 0.1, 0.9);
    REQUIRE_THAT(vel.weight[0].v[0], Catch::Matchers::WithinAbs(-0.1, 1e-15));
    sgdm_step(net, make_grads(1.0), vel, 0.1, 0.9);
    REQUIRE_THAT(vel.weight[0].v[0], Catch::Matchers::WithinAbs(-0.19, 1e-15));
    REQUIRE_THAT(net.layers[0].weight.v[0], Catch::Matchers::WithinAbs(2.0 - 0.29, 1e-15));
  }
  SECTION("lr_factor 20 scales the first step exactly 20x") {
    // Power-of-two values make the comparison exact in floating point.
    const double lr = 0x1.0p-10, g = 0.5;
    net.layers[0].weight.v[0] = 1.0;
    Velocities vel = Velocities::zeros_like(net);
    sgdm_step(net, make_grads(g), vel, lr, 0.9);
    const double step1 = 1.0 - net.layers[0].weight.v[0];

    net.layers[0].weight.v[0] = 1.0;
    net.layers[0].lr_factor = 20.0;
    Velocities vel20 = Velocities::zeros_like(net);
    sgdm_step(net, make_grads(g), vel20, lr, 0.9);
    const double step20 = 1.0 - net.layers[0].weight.v[0];
    REQUIRE(step20 == 20.0 * step1);
  }
  SECTION("frozen layers are untouched") {
    net.layers[0].weight.v[0] = 3.0;
    net.layers[0].frozen = true;
    Velocities vel = Velocities::zeros_like(net);
    sgdm_step(net, make_grads(5.0), vel, 0.1, 0.9);
    REQUIRE(net.layers[0].weight.v[0] == 3.0);
    net.layers[0].frozen = false;
  }
}

TEST_CASE("early stopping rule trace") {
  // Validation losses 1.0, .9, .91, .92, .93, .94, .95 with patience 5:
  // stop after epoch 7, best weights from epoch 2.
  EarlyStopper stopper{1e-4, 5};
  const double losses[] = {1.0, 0.9, 0.91, 0.92, 0.93, 0.94, 0.95};
  int stopped_after = 0;
  for (int e = 1; e <= 7; ++e) {
    stopper.observe(e, losses[e - 1]);
    if (stopper.should_stop()) {
      stopped_after = e;
      break;
    }
  }
  REQUIRE(stopped_after == 7);
  REQUIRE(stopper.best_epoch == 2);

  // min-delta: an improvement below 1e-4 does not reset patience.
  EarlyStopper tiny{1e-4, 2};
  tiny.observe(1, 1.0);
  tiny.observe(2, 1.0 - 5e-5);
  REQUIRE(tiny.stale == 1);
  tiny.observe(3, 1.0 - 9e-5);
  REQUIRE(tiny.should_stop());
  REQUIRE(tiny.best_epoch == 1);
}

namespace {

// Two-category blobs: category means well separated in channel space.
LabeledData separable_blobs(int per_category, Rng& rng) {
  LabeledData data;
  for (int cat = 0; cat < 2; ++cat)
    for (int i = 0; i < per_category; ++i) {
      Tensor x({1, 6, 6});
      const double mean = cat == 0 ? 0.25 : 0.75;
      for (double& v : x.v) v = mean + rng.normal(0.0, 0.08);
      data.images.push_back(std::move(x));
      data.labels.push_back(cat);
    }
  return data;
}

Network blob_base() {
  Network net;
  net.in_channels = 1;
  net.in_height = 6;
  net.in_width = 6;
  net.layers = {Layer::conv(4, 3, 1, 1), Layer::relu(), Layer::maxpool(2, 2),
                Layer::dense(8),         Layer::relu(), Layer::dense(3)};
  init_weights(net, 2024);
  return net;
}

}  // namespace

TEST_CASE("fine_tune") {
  Rng rng(55);
  const LabeledData data = separable_blobs(30, rng);

  TrainConfig config;
  config.batch_size = 8;
  config.base_lr = 5e-3;
  config.max_epochs = 30;
  config.patience = 5;
  config.val_fraction = 0.2;
  config.seed = 11;

  SECTION("reaches high validation accuracy on separable data") {
    const FineTuneResult result = fine_tune(blob_base(), data, config);
    REQUIRE(!result.history.empty());
    double best_acc = 0.0;
    for (const EpochStats& e : result.history) best_acc = std::max(best_acc, e.val_acc);
    REQUIRE(best_acc >= 0.95);
    // Head replaced with the category count and lr factor 20.
    REQUIRE(result.net.num_categories() == 2);
    REQUIRE(result.net.layers.back().lr_factor == 20.0);
  }
  SECTION("identical seeds give bit-identical weights; different seeds differ") {
    const FineTuneResult a = fine_tune(blob_base(), data, config);
    const FineTuneResult b = fine_tune(blob_base(), data, config);
    for (std::size_t i = 0; i < a.net.layers.size(); ++i) {
      REQUIRE(a.net.layers[i].weight.v == b.net.layers[i].weight.v);
      REQUIRE(a.net.layers[i].bias.v == b.net.layers[i].bias.v);
    }
    REQUIRE(a.history.size() == b.history.size());
    TrainConfig other = config;
    other.seed = 12;
    const FineTuneResult c = fine_tune(blob_base(), data, other);
    REQUIRE(a.net.layers.back().weight.v != c.net.layers.back().weight.v);
  }
  SECTION("conv parameters are frozen bit-identically") {
    const Network base = blob_base();
    const FineTuneResult result = fine_tune(base, data, config);
    for (std::size_t i = 0; i < base.layers.size(); ++i)
      if (base.layers[i].kind == LayerKind::Conv) {
        REQUIRE(result.net.layers[i].frozen);
        REQUIRE(result.net.layers[i].weight.v == base.layers[i].weight.v);
        REQUIRE(result.net.layers[i].bias.v == base.layers[i].bias.v);
      }
  }
  SECTION("empty category is rejected") {
    LabeledData bad = data;
    for (int& label : bad.labels) label = label == 1 ? 2 : 0;  // category 1 empty
    REQUIRE_THROWS_AS(fine_tune(blob_base(), bad, config), DataError);
  }
  SECTION("single category is rejected") {
    LabeledData bad = data;
    for (int& label : bad.labels) label = 0;
    REQUIRE_THROWS_AS(fine_tune(blob_base(), bad, config), DataError);
  }
}

TEST_CASE("first sgdm step decreases the loss at small lr") {
  Network net = blob_base();
  Rng rng(8);
  const Tensor batch = random_batch(net, 6, rng);
  const auto labels = random_labels(6, 3, rng);
  const auto [loss0, grads] = loss_and_grads(net, batch, labels);
  Velocities vel = Velocities::zeros_like(net);
  sgdm_step(net, grads, vel, 1e-6, 0.9);
  const double loss1 = loss_of(net, batch, labels);
  REQUIRE(loss1 <= loss0);
}

TEST_CASE("evaluate_accuracy") {
  SECTION("constant-majority predictor scores the majority fraction") {
    Network net;
    net.in_channels = 1;
    net.in_height = 2;
    net.in_width = 2;
    net.layers = {Layer::dense(3)};
    bind_shapes(net);
    net.layers[0].bias.v = {0.0, 1.0, 0.0};  // always predicts category 1
    LabeledData data;
    for (int i = 0; i < 10; ++i) {
      data.images.push_back(Tensor({1, 2, 2}));
      data.labels.push_back(i < 7 ? 1 : 2);
    }
    const Evaluation ev = evaluate_accuracy(net, data);
    REQUIRE_THAT(ev.accuracy, Catch::Matchers::WithinAbs(0.7, 1e-12));
    REQUIRE(ev.confusion[1 * 3 + 1] == 7);
    REQUIRE(ev.confusion[2 * 3 + 1] == 3);
  }
  SECTION("ties break toward the lowest category index") {
    Network net;
    net.in_channels = 1;
    net.in_height = 1;
    net.in_width = 1;
    net.layers = {Layer::dense(3)};
    bind_shapes(net);  // all-zero logits: three-way tie
    LabeledData data;
    data.images.push_back(Tensor({1, 1, 1}));
    data.labels.push_back(0);
    REQUIRE(evaluate_accuracy(net, data).accuracy == 1.0);
  }
  SECTION("memorizer reaches 1.0 on its training set") {
    Rng rng(66);
    const LabeledData data = separable_blobs(12, rng);
    TrainConfig config;
    config.batch_size = 6;
    config.base_lr = 5e-3;
    config.max_epochs = 40;
    config.patience = 40;
    config.seed = 4;
    const FineTuneResult result = fine_tune(blob_base(), data, config);
    REQUIRE(evaluate_accuracy(result.net, data).accuracy >= 0.95);
  }
}

TEST_CASE("GSNN1 round trip") {
  Network net = blob_base();
  net.layers[0].frozen = true;
  net.layers[net.layers.size() - 1].lr_factor = 20.0;
  // float32-representable weights so the round trip is exact.
  for (Layer& l : net.layers) {
    if (!l.has_params()) continue;
    for (double& w : l.weight.v) w = static_cast<float>(w);
    for (double& b : l.bias.v) b = static_cast<float>(b);
  }
  const auto path = std::filesystem::temp_directory_path() / "gazespot_model.gsnn";
  write_network(net, path.string());
  const Network back = read_network(path.string());
  REQUIRE(back.layers.size() == net.layers.size());
  REQUIRE(back.in_height == net.in_height);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    REQUIRE(back.layers[i].kind == net.layers[i].kind);
    REQUIRE(back.layers[i].frozen == net.layers[i].frozen);
    REQUIRE(back.layers[i].lr_factor == net.layers[i].lr_factor);
    REQUIRE(back.layers[i].weight.v == net.layers[i].weight.v);
    REQUIRE(back.layers[i].bias.v == net.layers[i].bias.v);
  }
  std::filesystem::remove(path);
}
