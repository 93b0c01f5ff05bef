#include <algorithm>
#include <cmath>

#include "cropref/error.hpp"
#include "cropref/textio.hpp"
#include "layers.hpp"

namespace cropref::nn {

std::string Shape::to_string() const {
  return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(s), values(std::move(v)) {
  if (values.size() != shape.size())
    throw Error(ErrorCode::Shape, "tensor value count " + std::to_string(values.size()) +
                                      " does not match shape " + shape.to_string());
}

std::string describe(const LayerSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Conv2D>)
          return "conv2d " + std::to_string(s.filters) + " " + std::to_string(s.kernel_h) + " " +
                 std::to_string(s.kernel_w) + " " + std::to_string(s.stride) + " " +
                 (s.same_padding ? "same" : "valid");
        if constexpr (std::is_same_v<T, ReLU>) return "relu";
        if constexpr (std::is_same_v<T, MaxPool>) return "maxpool " + std::to_string(s.size);
        if constexpr (std::is_same_v<T, Dropout>) return "dropout " + textio::format_double(s.rate);
        if constexpr (std::is_same_v<T, Dense>) return "dense " + std::to_string(s.units);
        if constexpr (std::is_same_v<T, Softmax>) return "softmax";
      },
      spec);
}

NetworkSpec default_image_network(Shape input, int classes, double dropout_rate,
                                  ImageNetWidths widths) {
  NetworkSpec spec;
  spec.input = input;
  spec.classes = classes;
  for (int filters : {widths.conv1, widths.conv2, widths.conv3}) {
    spec.layers.push_back(Conv2D{filters, 3, 3, 1, false});
    spec.layers.push_back(ReLU{});
    spec.layers.push_back(MaxPool{2});
  }
  spec.layers.push_back(Dropout{dropout_rate});
  spec.layers.push_back(Dense{widths.hidden});
  spec.layers.push_back(ReLU{});
  spec.layers.push_back(Dense{classes});
  spec.layers.push_back(Softmax{});
  return spec;
}

NetworkSpec default_pixel_network(int scenes, int features, int classes, double dropout_rate,
                                  PixelNetWidths widths) {
  NetworkSpec spec;
  spec.input = {1, scenes, features};
  spec.classes = classes;
  spec.layers = {Conv2D{widths.conv1, 3, 3, 1, true},
                 ReLU{},
                 Conv2D{widths.conv2, 3, 3, 1, true},
                 ReLU{},
                 Dropout{dropout_rate},
                 Dense{widths.hidden},
                 ReLU{},
                 Dense{classes},
                 Softmax{}};
  return spec;
}

Network::Network(const Network& other)
    : metadata(other.metadata), spec_(other.spec_), shapes_(other.shapes_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Network::~Network() = default;
Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l->params().size();
  return n;
}

std::vector<double> Network::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers_) {
    const auto p = std::as_const(*l).params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

void Network::set_flat_parameters(std::span<const double> values) {
  if (values.size() != parameter_count())
    throw Error(ErrorCode::Structure, "expected " + std::to_string(parameter_count()) +
                                          " parameters, got " + std::to_string(values.size()));
  std::size_t off = 0;
  for (auto& l : layers_) {
    auto p = l->params();
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(off), p.size(), p.begin());
    off += p.size();
  }
}

std::vector<std::span<double>> Network::layer_params() {
  std::vector<std::span<double>> out;
  for (auto& l : layers_) out.push_back(l->params());
  return out;
}

std::vector<std::span<const double>> Network::layer_params() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers_) out.push_back(std::as_const(*l).params());
  return out;
}

GradientSet Network::zero_gradients() const {
  GradientSet g;
  for (const auto& l : layers_) g.emplace_back(std::as_const(*l).params().size(), 0.0);
  return g;
}

std::vector<double> Network::forward(const Tensor& x, Mode mode, Workspace& ws,
                                     std::mt19937_64* rng) const {
  if (!(x.shape == spec_.input) || x.values.size() != spec_.input.size())
    throw Error(ErrorCode::Shape, "input shape " + x.shape.to_string() +
                                      " does not match network input " + spec_.input.to_string());
  const std::size_t n = layers_.size();
  ws.activations.resize(n + 1);
  ws.switches.resize(n);
  ws.masks.resize(n);
  ws.activations[0] = x;
  for (std::size_t i = 0; i < n; ++i)
    layers_[i]->forward(ws.activations[i], ws.activations[i + 1], mode, rng, ws, i);
  return ws.activations[n].values;
}

std::vector<double> Network::forward(const Tensor& x, Mode mode) const {
  Workspace ws;
  return forward(x, mode, ws, nullptr);
}

void Network::backward(Workspace& ws, const std::vector<double>& grad_probs,
                       GradientSet& grads) const {
  const std::size_t n = layers_.size();
  ws.grads.resize(n + 1);
  ws.grads[n] = Tensor(ws.activations[n].shape, grad_probs);
  for (std::size_t i = n; i-- > 0;) {
    layers_[i]->backward(ws.activations[i], ws.activations[i + 1], ws.grads[i + 1], ws.grads[i],
                         grads[i], ws, i);
  }
}

Network build_uninitialized(const NetworkSpec& spec) {
  if (spec.classes < 1) throw Error(ErrorCode::Shape, "network needs at least one class");
  if (spec.layers.empty() || !std::holds_alternative<Softmax>(spec.layers.back()))
    throw Error(ErrorCode::Shape, "network must end with a softmax layer");
  Network net;
  net.spec_ = spec;
  Shape shape = spec.input;
  net.shapes_.push_back(shape);
  for (const auto& ls : spec.layers) {
    auto layer = make_layer(ls, shape);
    shape = layer->output_shape();
    net.shapes_.push_back(shape);
    net.layers_.push_back(std::move(layer));
  }
  if (shape.size() != static_cast<std::size_t>(spec.classes))
    throw Error(ErrorCode::Shape, "softmax width " + std::to_string(shape.size()) +
                                      " does not match class count " +
                                      std::to_string(spec.classes));
  return net;
}

Network build_network(const NetworkSpec& spec, std::uint64_t seed) {
  Network net = build_uninitialized(spec);
  std::mt19937_64 rng(seed);
  for (auto& layer : net.layers_) {
    auto params = layer->params();
    if (params.empty()) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(layer->fan_in()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    const std::size_t nw = layer->weight_count();
    for (std::size_t i = 0; i < nw; ++i) params[i] = dist(rng);
    std::fill(params.begin() + static_cast<std::ptrdiff_t>(nw), params.end(), 0.0);
  }
  return net;
}

double cross_entropy(const std::vector<double>& probs, int label) {
  return -std::log(std::max(probs[static_cast<std::size_t>(label)], kProbabilityFloor));
}

namespace {

std::vector<double> cross_entropy_grad(const std::vector<double>& probs, int label) {
  std::vector<double> g(probs.size(), 0.0);
  const double p = probs[static_cast<std::size_t>(label)];
  // The clamp is flat below the floor, so no gradient flows there.
  if (p >= kProbabilityFloor) g[static_cast<std::size_t>(label)] = -1.0 / p;
  return g;
}

void check_label(const Network& net, int label) {
  if (label < 0 || label >= net.classes())
    throw Error(ErrorCode::InvalidArgument, "label " + std::to_string(label) +
                                                " outside [0, " + std::to_string(net.classes()) + ")");
}

}  // namespace

LossAndGradients loss_and_gradients(const Network& net, std::span<const Sample> batch, Mode mode,
                                    std::mt19937_64* rng) {
  if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  LossAndGradients out;
  out.gradients = net.zero_gradients();
  Workspace ws;
  for (const auto& s : batch) {
    check_label(net, s.label);
    const auto probs = net.forward(s.input, mode, ws, rng);
    out.loss += cross_entropy(probs, s.label);
    net.backward(ws, cross_entropy_grad(probs, s.label), out.gradients);
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  out.loss *= scale;
  for (auto& g : out.gradients)
    for (double& v : g) v *= scale;
  return out;
}

Prediction argmax(const std::vector<double>& probs) {
  Prediction p;
  if (probs.empty()) return p;
  p.confidence = probs[0];
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > p.confidence) {
      p.confidence = probs[i];
      p.label = static_cast<int>(i);
    }
  }
  return p;
}

Prediction predict(const Network& net, const Tensor& x) {
  return argmax(net.forward(x, Mode::Infer));
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw Error(ErrorCode::InvalidArgument, "momentum must lie in [0, 1)");
  if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw Error(ErrorCode::InvalidArgument, "dropout rate must lie in [0, 1)");
}

double accuracy(const Network& net, std::span<const Sample> samples) {
  if (samples.empty()) return 0.0;
  Workspace ws;
  std::size_t correct = 0;
  for (const auto& s : samples)
    if (argmax(net.forward(s.input, Mode::Infer, ws)).label == s.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

TrainResult train(Network& net, std::span<const Sample> train_set,
                  std::span<const Sample> val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw Error(ErrorCode::InvalidArgument, "training set is empty");
  if (val_set.empty()) throw Error(ErrorCode::InvalidArgument, "validation set is empty");
  for (const auto& s : train_set) check_label(net, s.label);
  for (const auto& s : val_set) check_label(net, s.label);

  std::mt19937_64 order_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  auto params = net.layer_params();
  GradientSet velocity = net.zero_gradients();
  GradientSet grads = net.zero_gradients();
  Workspace ws;
  std::vector<std::size_t> order(train_set.size());

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = train_set[order[k]];
        const auto probs = net.forward(s.input, Mode::Train, ws, &dropout_rng);
        loss_sum += cross_entropy(probs, s.label);
        if (argmax(probs).label == s.label) ++correct;
        net.backward(ws, cross_entropy_grad(probs, s.label), grads);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t l = 0; l < params.size(); ++l) {
        for (std::size_t j = 0; j < params[l].size(); ++j) {
          velocity[l][j] = cfg.momentum * velocity[l][j] - cfg.learning_rate * grads[l][j] * scale;
          params[l][j] += velocity[l][j];
        }
      }
    }
    EpochStats stats;
    stats.loss = loss_sum / static_cast<double>(train_set.size());
    if (!std::isfinite(stats.loss))
      throw Error(ErrorCode::Divergence,
                  "training diverged at epoch " + std::to_string(epoch + 1) +
                      " (non-finite loss); lower the learning rate");
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
    stats.val_accuracy = accuracy(net, val_set);
    result.history.push_back(stats);
  }
  return result;
}

}  // namespace cropref::nn
