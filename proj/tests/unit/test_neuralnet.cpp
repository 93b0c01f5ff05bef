#include <doctest.h>

#include <cmath>
#include <random>

#include "cropref/error.hpp"
#include "cropref/neuralnet.hpp"

using namespace cropref;
using namespace cropref::nn;

namespace {

Tensor random_tensor(Shape s, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Tensor t(s);
  for (auto& v : t.values) v = d(rng);
  return t;
}

// Two Gaussian blobs in a 1x2x2 input.
std::vector<Sample> blobs(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    Tensor t(Shape{1, 2, 2});
    for (auto& v : t.values) v = (label == 0 ? -1.0 : 1.0) + noise(rng);
    out.push_back({t, label});
  }
  return out;
}

}  // namespace

TEST_CASE("default architectures have the documented layer order") {
  const auto img = default_image_network({3, 32, 32}, 7, 0.2);
  REQUIRE(img.layers.size() == 14);
  CHECK(std::holds_alternative<Conv2D>(img.layers[0]));
  CHECK(std::holds_alternative<MaxPool>(img.layers[2]));
  CHECK(std::holds_alternative<Dropout>(img.layers[9]));
  CHECK(std::holds_alternative<Softmax>(img.layers.back()));
  const auto net = build_network(img, 1);
  CHECK(net.shapes().back() == Shape{7, 1, 1});

  const auto px = default_pixel_network(10, 4, 7, 0.1);
  const auto pnet = build_network(px, 1);
  CHECK(pnet.input_shape() == Shape{1, 10, 4});
  CHECK(pnet.shapes().back().size() == 7);
}

TEST_CASE("invalid specs are rejected") {
  NetworkSpec spec{{1, 4, 4}, 3, {Conv2D{2, 5, 5, 1, false}, Dense{3}, Softmax{}}};
  CHECK_THROWS_AS(build_network(spec, 1), Error);
  spec.layers = {Dense{4}, Softmax{}};  // last dense must match the class count
  CHECK_THROWS_AS(build_network(spec, 1), Error);
  spec.layers = {Dense{3}};
  CHECK_THROWS_AS(build_network(spec, 1), Error);
}

TEST_CASE("initialization is seeded") {
  const auto spec = default_pixel_network(6, 3, 3, 0.0, {4, 4, 8});
  CHECK(build_network(spec, 5).flat_parameters() == build_network(spec, 5).flat_parameters());
  CHECK(build_network(spec, 5).flat_parameters() != build_network(spec, 6).flat_parameters());
}

TEST_CASE("softmax output is a distribution") {
  std::mt19937_64 rng(3);
  const auto net = build_network(default_image_network({3, 24, 24}, 5, 0.5, {4, 4, 4, 8}), 2);
  const auto p = net.forward(random_tensor({3, 24, 24}, rng));
  double s = 0;
  for (double v : p) {
    CHECK(v >= 0.0);
    s += v;
  }
  CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("backprop matches finite differences on each layer type") {
  std::mt19937_64 rng(11);
  const std::vector<NetworkSpec> specs = {
      {{1, 1, 5}, 3, {Dense{3}, Softmax{}}},
      {{1, 1, 5}, 3, {Dense{4}, ReLU{}, Dense{3}, Softmax{}}},
      {{2, 5, 5}, 2, {Conv2D{3, 3, 3, 1, false}, Dense{2}, Softmax{}}},
      {{2, 5, 4}, 2, {Conv2D{3, 3, 3, 1, true}, ReLU{}, Dense{2}, Softmax{}}},
      {{1, 7, 7}, 2, {Conv2D{2, 3, 3, 2, false}, Dense{2}, Softmax{}}},
      {{2, 4, 6}, 2, {MaxPool{2}, Dense{2}, Softmax{}}},
      {{2, 4, 4}, 2, {Dropout{0.5}, Dense{2}, Softmax{}}},
      default_image_network({3, 24, 24}, 4, 0.3, {3, 4, 4, 6}),
      default_pixel_network(6, 3, 4, 0.3, {3, 3, 6}),
  };
  for (std::size_t i = 0; i < specs.size(); ++i) {
    CAPTURE(i);
    const auto net = build_network(specs[i], 100 + i);
    const Sample s{random_tensor(specs[i].input, rng), static_cast<int>(i % specs[i].classes)};
    CHECK(gradient_check(net, s) < 1e-4);
  }
}

TEST_CASE("argmax ties go to the lowest index") {
  CHECK(argmax({0.25, 0.5, 0.25}).label == 1);
  CHECK(argmax({0.5, 0.5}).label == 0);
  CHECK(argmax({0.5, 0.5}).confidence == 0.5);
}

TEST_CASE("cross entropy is floored") {
  CHECK(cross_entropy({1.0, 0.0}, 0) == doctest::Approx(0.0));
  CHECK(cross_entropy({1.0, 0.0}, 1) == doctest::Approx(-std::log(kProbabilityFloor)));
}

TEST_CASE("training separates two blobs and is reproducible") {
  const auto train_set = blobs(80, 1);
  const auto val_set = blobs(40, 2);
  const NetworkSpec spec{{1, 2, 2}, 2, {Dense{8}, ReLU{}, Dropout{0.1}, Dense{2}, Softmax{}}};
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 8;
  cfg.seed = 4;
  auto a = build_network(spec, 9);
  auto b = build_network(spec, 9);
  const auto ha = train(a, train_set, val_set, cfg);
  const auto hb = train(b, train_set, val_set, cfg);
  CHECK(a.flat_parameters() == b.flat_parameters());
  CHECK(ha.history.size() == 15);
  CHECK(ha.history.back().loss < ha.history.front().loss);
  CHECK(accuracy(a, val_set) >= 0.95);
}

TEST_CASE("divergence is detected") {
  const auto train_set = blobs(16, 1);
  const NetworkSpec spec{{1, 2, 2}, 2, {Dense{4}, ReLU{}, Dense{2}, Softmax{}}};
  auto net = build_network(spec, 1);
  auto w = net.flat_parameters();
  w.back() = std::nan("");
  net.set_flat_parameters(w);
  TrainConfig cfg;
  cfg.epochs = 3;
  try {
    train(net, train_set, train_set, cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Divergence);
  }
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.dropout_rate = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("model serialization round trip") {
  auto net = build_network(default_pixel_network(5, 2, 3, 0.25, {2, 3, 4}), 8);
  net.metadata["kind"] = "pixel";
  net.metadata["classes"] = "corn,soybean,others";
  const auto bytes = serialize_model(net);
  const auto back = deserialize_model(bytes);
  CHECK(back.flat_parameters() == net.flat_parameters());
  CHECK(back.metadata == net.metadata);
  CHECK(serialize_model(back) == bytes);

  std::mt19937_64 rng(1);
  const auto x = random_tensor({1, 5, 2}, rng);
  CHECK(back.forward(x) == net.forward(x));

  CHECK_THROWS_AS(deserialize_model("RTNN2\n"), Error);
  CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() - 3)), Error);
  std::string wrong = bytes;
  wrong.replace(wrong.find("dense 4"), 7, "dense 5");
  CHECK_THROWS_AS(deserialize_model(wrong), Error);
}
