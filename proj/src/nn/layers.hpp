#pragma once

#include <memory>
#include <random>
#include <span>

#include "cropref/neuralnet.hpp"

namespace cropref::nn {

class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerSpec spec() const = 0;
  virtual Shape output_shape() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  // Parameters: weights first, then biases. Empty for parameter-free layers.
  virtual std::span<double> params() { return {}; }
  virtual std::span<const double> params() const { return {}; }
  virtual std::size_t weight_count() const { return 0; }
  virtual std::size_t fan_in() const { return 0; }

  // `slot` indexes this layer's scratch in the workspace.
  virtual void forward(const Tensor& in, Tensor& out, Mode mode, std::mt19937_64* rng,
                       Workspace& ws, std::size_t slot) const = 0;
  virtual void backward(const Tensor& in, const Tensor& out, const Tensor& grad_out,
                        Tensor& grad_in, std::span<double> param_grad, Workspace& ws,
                        std::size_t slot) const = 0;
};

// Throws ErrorCode::Shape when `spec` cannot consume `input`.
std::unique_ptr<Layer> make_layer(const LayerSpec& spec, Shape input);

// Shape-checked network with all parameters zero.
Network build_uninitialized(const NetworkSpec& spec);

}  // namespace cropref::nn
