#pragma once

// Minimal convolutional network engine in double precision: the fixed layer
// set (Conv2D, ReLU, MaxPool, Dropout, Dense, Softmax), cross-entropy loss,
// SGD with momentum, finite-difference gradient checking and a binary model
// format. One sample is propagated at a time; batches accumulate gradients in
// sample order so results do not depend on scheduling.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace cropref::nn {

struct Shape {
  int channels = 1;
  int height = 1;
  int width = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  std::string to_string() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct Tensor {
  Shape shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(s), values(s.size(), fill) {}
  Tensor(Shape s, std::vector<double> v);

  double& at(int c, int y, int x) {
    return values[(static_cast<std::size_t>(c) * shape.height + y) * shape.width + x];
  }
  double at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * shape.height + y) * shape.width + x];
  }
};

struct Conv2D {
  int filters = 1;
  int kernel_h = 3;
  int kernel_w = 3;
  int stride = 1;
  bool same_padding = false;
};
struct ReLU {};
struct MaxPool {
  int size = 2;
};
struct Dropout {
  double rate = 0.0;
};
struct Dense {
  int units = 1;
};
struct Softmax {};

using LayerSpec = std::variant<Conv2D, ReLU, MaxPool, Dropout, Dense, Softmax>;

std::string describe(const LayerSpec& spec);

struct NetworkSpec {
  Shape input;
  int classes = 2;
  std::vector<LayerSpec> layers;
};

// Image architecture: three conv/ReLU/pool blocks, dropout, Dense/ReLU,
// Dense(K), Softmax. Widths default to 16/32/64 filters and 128 hidden units.
struct ImageNetWidths {
  int conv1 = 16;
  int conv2 = 32;
  int conv3 = 64;
  int hidden = 128;
};
NetworkSpec default_image_network(Shape input, int classes, double dropout_rate,
                                  ImageNetWidths widths = {});

// Pixel architecture over a 1 x T x F stack: two same-padded 3x3 conv/ReLU
// blocks, dropout, Dense/ReLU, Dense(K), Softmax.
struct PixelNetWidths {
  int conv1 = 16;
  int conv2 = 16;
  int hidden = 64;
};
NetworkSpec default_pixel_network(int scenes, int features, int classes,
                                  double dropout_rate, PixelNetWidths widths = {});

enum class Mode { Train, Infer };

class Layer;

// Per-call scratch state (activations, pooling switches, dropout masks), so
// that inference on a shared network needs no locking.
struct Workspace {
  std::vector<Tensor> activations;  // layer inputs plus final output
  std::vector<std::vector<std::uint32_t>> switches;
  std::vector<std::vector<double>> masks;
  std::vector<Tensor> grads;
  std::vector<double> patch;
  std::vector<double> patch_grad;
};

// Gradients laid out like Network::layer_params, one vector per layer.
using GradientSet = std::vector<std::vector<double>>;

struct Sample {
  Tensor input;
  int label = 0;
};

class Network {
 public:
  Network() = default;
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;
  ~Network();

  const NetworkSpec& spec() const { return spec_; }
  Shape input_shape() const { return spec_.input; }
  int classes() const { return spec_.classes; }
  std::size_t layer_count() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }
  // Shapes entering each layer, plus the final output shape.
  const std::vector<Shape>& shapes() const { return shapes_; }

  std::size_t parameter_count() const;
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);
  std::vector<std::span<double>> layer_params();
  std::vector<std::span<const double>> layer_params() const;

  // Free-form key/value pairs carried through serialization.
  std::map<std::string, std::string> metadata;

  // Probabilities for one sample. `rng` drives dropout in Train mode.
  std::vector<double> forward(const Tensor& x, Mode mode, Workspace& ws,
                              std::mt19937_64* rng = nullptr) const;
  std::vector<double> forward(const Tensor& x, Mode mode = Mode::Infer) const;

  // Back-propagates d(loss)/d(probabilities) through the workspace of the
  // preceding forward call, adding parameter gradients into `grads`.
  void backward(Workspace& ws, const std::vector<double>& grad_probs,
                GradientSet& grads) const;

  GradientSet zero_gradients() const;

 private:
  friend Network build_network(const NetworkSpec& spec, std::uint64_t seed);
  friend Network build_uninitialized(const NetworkSpec& spec);

  NetworkSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Shape> shapes_;
};

// Validates shapes and draws weights U(-sqrt(6/fan_in), sqrt(6/fan_in)),
// biases zero, from a seeded mt19937_64.
Network build_network(const NetworkSpec& spec, std::uint64_t seed);

inline constexpr double kProbabilityFloor = 1e-12;

double cross_entropy(const std::vector<double>& probs, int label);

struct LossAndGradients {
  double loss = 0.0;  // mean cross-entropy
  GradientSet gradients;  // mean over the batch
};

LossAndGradients loss_and_gradients(const Network& net, std::span<const Sample> batch,
                                    Mode mode = Mode::Infer,
                                    std::mt19937_64* rng = nullptr);

struct Prediction {
  int label = 0;
  double confidence = 0.0;
};

// Argmax with ties to the lowest index.
Prediction argmax(const std::vector<double>& probs);
Prediction predict(const Network& net, const Tensor& x);

struct TrainConfig {
  int epochs = 20;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 32;
  double dropout_rate = 0.2;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochStats {
  double loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
};

// SGD + momentum over seeded shuffled mini-batches. Training accuracy is
// measured on the training-mode forward passes of each epoch, validation
// accuracy in inference mode after the epoch. Non-finite loss aborts with
// ErrorCode::Divergence.
TrainResult train(Network& net, std::span<const Sample> train_set,
                  std::span<const Sample> val_set, const TrainConfig& cfg);

double accuracy(const Network& net, std::span<const Sample> samples);

// Max over parameters of |analytic - numeric| / max(1e-8, |analytic| + |numeric|),
// numeric by central differences. Dropout is inactive. When a ReLU input or a
// max-pool runner-up sits within a kink margin, the sample is nudged first.
double gradient_check(const Network& net, const Sample& sample, double eps = 1e-5);

inline constexpr const char* kModelMagic = "RTNN1";

std::string serialize_model(const Network& net);
Network deserialize_model(std::string_view bytes);
void save_model(const Network& net, const std::filesystem::path& path);
Network load_model(const std::filesystem::path& path);

}  // namespace cropref::nn
