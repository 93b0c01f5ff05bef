#include "layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cropref/error.hpp"
#include "cropref/simd.hpp"

namespace cropref::nn {
namespace {

void resize(Tensor& t, Shape s) {
  t.shape = s;
  t.values.assign(s.size(), 0.0);
}

class ConvLayer final : public Layer {
 public:
  ConvLayer(Conv2D spec, Shape in) : spec_(spec), in_(in) {
    if (spec.filters < 1 || spec.kernel_h < 1 || spec.kernel_w < 1 || spec.stride < 1)
      throw Error(ErrorCode::Shape, "conv2d needs positive filters, kernel and stride");
    out_.channels = spec.filters;
    if (spec.same_padding) {
      out_.height = (in.height + spec.stride - 1) / spec.stride;
      out_.width = (in.width + spec.stride - 1) / spec.stride;
      pad_top_ = std::max((out_.height - 1) * spec.stride + spec.kernel_h - in.height, 0) / 2;
      pad_left_ = std::max((out_.width - 1) * spec.stride + spec.kernel_w - in.width, 0) / 2;
    } else {
      if (spec.kernel_h > in.height || spec.kernel_w > in.width)
        throw Error(ErrorCode::Shape, "conv2d kernel " + std::to_string(spec.kernel_h) + "x" +
                                          std::to_string(spec.kernel_w) + " larger than input " +
                                          in.to_string() + " without padding");
      out_.height = (in.height - spec.kernel_h) / spec.stride + 1;
      out_.width = (in.width - spec.kernel_w) / spec.stride + 1;
    }
    patch_ = static_cast<std::size_t>(in.channels) * spec.kernel_h * spec.kernel_w;
    params_.assign(patch_ * spec.filters + spec.filters, 0.0);
  }

  LayerSpec spec() const override { return spec_; }
  Shape output_shape() const override { return out_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ConvLayer>(*this); }
  std::span<double> params() override { return params_; }
  std::span<const double> params() const override { return params_; }
  std::size_t weight_count() const override { return patch_ * spec_.filters; }
  std::size_t fan_in() const override { return patch_; }

  void forward(const Tensor& in, Tensor& out, Mode, std::mt19937_64*, Workspace& ws,
               std::size_t) const override {
    resize(out, out_);
    ws.patch.resize(patch_);
    const std::span<const double> weights(params_.data(), weight_count());
    const double* bias = params_.data() + weight_count();
    for (int oy = 0; oy < out_.height; ++oy) {
      for (int ox = 0; ox < out_.width; ++ox) {
        gather(in, oy, ox, ws.patch);
        for (int f = 0; f < spec_.filters; ++f) {
          const auto w = weights.subspan(static_cast<std::size_t>(f) * patch_, patch_);
          out.at(f, oy, ox) = simd::dot(w, ws.patch) + bias[f];
        }
      }
    }
  }

  void backward(const Tensor& in, const Tensor&, const Tensor& grad_out, Tensor& grad_in,
                std::span<double> param_grad, Workspace& ws, std::size_t) const override {
    resize(grad_in, in_);
    ws.patch.resize(patch_);
    ws.patch_grad.resize(patch_);
    const std::span<const double> weights(params_.data(), weight_count());
    double* bias_grad = param_grad.data() + weight_count();
    for (int oy = 0; oy < out_.height; ++oy) {
      for (int ox = 0; ox < out_.width; ++ox) {
        gather(in, oy, ox, ws.patch);
        std::fill(ws.patch_grad.begin(), ws.patch_grad.end(), 0.0);
        bool any = false;
        for (int f = 0; f < spec_.filters; ++f) {
          const double g = grad_out.at(f, oy, ox);
          if (g == 0.0) continue;
          any = true;
          const std::size_t off = static_cast<std::size_t>(f) * patch_;
          simd::axpy(g, ws.patch, param_grad.subspan(off, patch_));
          bias_grad[f] += g;
          simd::axpy(g, weights.subspan(off, patch_), ws.patch_grad);
        }
        if (any) scatter(ws.patch_grad, oy, ox, grad_in);
      }
    }
  }

 private:
  // Patch layout matches the weight layout: channel, kernel row, kernel col.
  void gather(const Tensor& in, int oy, int ox, std::vector<double>& patch) const {
    std::size_t k = 0;
    const int y0 = oy * spec_.stride - pad_top_;
    const int x0 = ox * spec_.stride - pad_left_;
    for (int c = 0; c < in_.channels; ++c) {
      for (int ky = 0; ky < spec_.kernel_h; ++ky) {
        const int y = y0 + ky;
        for (int kx = 0; kx < spec_.kernel_w; ++kx) {
          const int x = x0 + kx;
          patch[k++] = (y >= 0 && y < in_.height && x >= 0 && x < in_.width) ? in.at(c, y, x) : 0.0;
        }
      }
    }
  }

  void scatter(const std::vector<double>& patch_grad, int oy, int ox, Tensor& grad_in) const {
    std::size_t k = 0;
    const int y0 = oy * spec_.stride - pad_top_;
    const int x0 = ox * spec_.stride - pad_left_;
    for (int c = 0; c < in_.channels; ++c) {
      for (int ky = 0; ky < spec_.kernel_h; ++ky) {
        const int y = y0 + ky;
        for (int kx = 0; kx < spec_.kernel_w; ++kx, ++k) {
          const int x = x0 + kx;
          if (y >= 0 && y < in_.height && x >= 0 && x < in_.width)
            grad_in.at(c, y, x) += patch_grad[k];
        }
      }
    }
  }

  Conv2D spec_;
  Shape in_;
  Shape out_;
  int pad_top_ = 0;
  int pad_left_ = 0;
  std::size_t patch_ = 0;
  std::vector<double> params_;
};

class ReluLayer final : public Layer {
 public:
  explicit ReluLayer(Shape in) : shape_(in) {}
  LayerSpec spec() const override { return ReLU{}; }
  Shape output_shape() const override { return shape_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReluLayer>(*this); }

  void forward(const Tensor& in, Tensor& out, Mode, std::mt19937_64*, Workspace&,
               std::size_t) const override {
    resize(out, shape_);
    for (std::size_t i = 0; i < in.values.size(); ++i) out.values[i] = std::max(in.values[i], 0.0);
  }

  void backward(const Tensor& in, const Tensor&, const Tensor& grad_out, Tensor& grad_in,
                std::span<double>, Workspace&, std::size_t) const override {
    resize(grad_in, shape_);
    for (std::size_t i = 0; i < in.values.size(); ++i)
      grad_in.values[i] = in.values[i] > 0.0 ? grad_out.values[i] : 0.0;
  }

 private:
  Shape shape_;
};

class MaxPoolLayer final : public Layer {
 public:
  MaxPoolLayer(MaxPool spec, Shape in) : spec_(spec), in_(in) {
    if (spec.size < 1) throw Error(ErrorCode::Shape, "maxpool size must be >= 1");
    out_ = {in.channels, in.height / spec.size, in.width / spec.size};
    if (out_.height < 1 || out_.width < 1)
      throw Error(ErrorCode::Shape, "maxpool " + std::to_string(spec.size) +
                                        " larger than input " + in.to_string());
  }
  LayerSpec spec() const override { return spec_; }
  Shape output_shape() const override { return out_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPoolLayer>(*this); }

  // Switch = flat input index of the window maximum (first on ties).
  void forward(const Tensor& in, Tensor& out, Mode, std::mt19937_64*, Workspace& ws,
               std::size_t slot) const override {
    resize(out, out_);
    auto& sw = ws.switches[slot];
    sw.resize(out_.size());
    std::size_t o = 0;
    for (int c = 0; c < out_.channels; ++c) {
      for (int oy = 0; oy < out_.height; ++oy) {
        for (int ox = 0; ox < out_.width; ++ox, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_idx = 0;
          for (int ky = 0; ky < spec_.size; ++ky) {
            for (int kx = 0; kx < spec_.size; ++kx) {
              const int y = oy * spec_.size + ky;
              const int x = ox * spec_.size + kx;
              const std::size_t idx =
                  (static_cast<std::size_t>(c) * in_.height + y) * in_.width + x;
              if (in.values[idx] > best) {
                best = in.values[idx];
                best_idx = idx;
              }
            }
          }
          out.values[o] = best;
          sw[o] = static_cast<std::uint32_t>(best_idx);
        }
      }
    }
  }

  void backward(const Tensor&, const Tensor&, const Tensor& grad_out, Tensor& grad_in,
                std::span<double>, Workspace& ws, std::size_t slot) const override {
    resize(grad_in, in_);
    const auto& sw = ws.switches[slot];
    for (std::size_t o = 0; o < sw.size(); ++o) grad_in.values[sw[o]] += grad_out.values[o];
  }

 private:
  MaxPool spec_;
  Shape in_;
  Shape out_;
};

class DropoutLayer final : public Layer {
 public:
  DropoutLayer(Dropout spec, Shape in) : spec_(spec), shape_(in) {
    if (!(spec.rate >= 0.0 && spec.rate < 1.0))
      throw Error(ErrorCode::Shape, "dropout rate must lie in [0, 1)");
  }
  LayerSpec spec() const override { return spec_; }
  Shape output_shape() const override { return shape_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DropoutLayer>(*this); }

  // Inverted dropout: kept activations are scaled by 1/(1-rate) in training.
  void forward(const Tensor& in, Tensor& out, Mode mode, std::mt19937_64* rng, Workspace& ws,
               std::size_t slot) const override {
    auto& mask = ws.masks[slot];
    if (mode == Mode::Infer || rng == nullptr || spec_.rate == 0.0) {
      out = in;
      mask.clear();
      return;
    }
    resize(out, shape_);
    mask.resize(in.values.size());
    const double keep_scale = 1.0 / (1.0 - spec_.rate);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < in.values.size(); ++i) {
      mask[i] = u(*rng) < spec_.rate ? 0.0 : keep_scale;
      out.values[i] = in.values[i] * mask[i];
    }
  }

  void backward(const Tensor&, const Tensor&, const Tensor& grad_out, Tensor& grad_in,
                std::span<double>, Workspace& ws, std::size_t slot) const override {
    const auto& mask = ws.masks[slot];
    if (mask.empty()) {
      grad_in = grad_out;
      return;
    }
    resize(grad_in, shape_);
    for (std::size_t i = 0; i < mask.size(); ++i) grad_in.values[i] = grad_out.values[i] * mask[i];
  }

 private:
  Dropout spec_;
  Shape shape_;
};

class DenseLayer final : public Layer {
 public:
  DenseLayer(Dense spec, Shape in) : spec_(spec), in_(in), inputs_(in.size()) {
    if (spec.units < 1) throw Error(ErrorCode::Shape, "dense needs at least one unit");
    params_.assign(inputs_ * spec.units + spec.units, 0.0);
  }
  LayerSpec spec() const override { return spec_; }
  Shape output_shape() const override { return {spec_.units, 1, 1}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }
  std::span<double> params() override { return params_; }
  std::span<const double> params() const override { return params_; }
  std::size_t weight_count() const override { return inputs_ * spec_.units; }
  std::size_t fan_in() const override { return inputs_; }

  void forward(const Tensor& in, Tensor& out, Mode, std::mt19937_64*, Workspace&,
               std::size_t) const override {
    resize(out, output_shape());
    const double* bias = params_.data() + weight_count();
    for (int u = 0; u < spec_.units; ++u) {
      const std::span<const double> w(params_.data() + static_cast<std::size_t>(u) * inputs_,
                                      inputs_);
      out.values[static_cast<std::size_t>(u)] = simd::dot(w, in.values) + bias[u];
    }
  }

  void backward(const Tensor& in, const Tensor&, const Tensor& grad_out, Tensor& grad_in,
                std::span<double> param_grad, Workspace&, std::size_t) const override {
    resize(grad_in, in_);
    double* bias_grad = param_grad.data() + weight_count();
    for (int u = 0; u < spec_.units; ++u) {
      const double g = grad_out.values[static_cast<std::size_t>(u)];
      if (g == 0.0) continue;
      const std::size_t off = static_cast<std::size_t>(u) * inputs_;
      simd::axpy(g, in.values, param_grad.subspan(off, inputs_));
      bias_grad[u] += g;
      simd::axpy(g, std::span<const double>(params_.data() + off, inputs_), grad_in.values);
    }
  }

 private:
  Dense spec_;
  Shape in_;
  std::size_t inputs_;
  std::vector<double> params_;
};

class SoftmaxLayer final : public Layer {
 public:
  explicit SoftmaxLayer(Shape in) : shape_(in) {}
  LayerSpec spec() const override { return Softmax{}; }
  Shape output_shape() const override { return shape_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<SoftmaxLayer>(*this); }

  void forward(const Tensor& in, Tensor& out, Mode, std::mt19937_64*, Workspace&,
               std::size_t) const override {
    resize(out, shape_);
    const double peak = *std::max_element(in.values.begin(), in.values.end());
    double total = 0.0;
    for (std::size_t i = 0; i < in.values.size(); ++i) {
      out.values[i] = std::exp(in.values[i] - peak);
      total += out.values[i];
    }
    for (double& v : out.values) v /= total;
  }

  void backward(const Tensor&, const Tensor& out, const Tensor& grad_out, Tensor& grad_in,
                std::span<double>, Workspace&, std::size_t) const override {
    resize(grad_in, shape_);
    double inner = 0.0;
    for (std::size_t i = 0; i < out.values.size(); ++i) inner += out.values[i] * grad_out.values[i];
    for (std::size_t i = 0; i < out.values.size(); ++i)
      grad_in.values[i] = out.values[i] * (grad_out.values[i] - inner);
  }

 private:
  Shape shape_;
};

}  // namespace

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, Shape input) {
  if (input.channels < 1 || input.height < 1 || input.width < 1)
    throw Error(ErrorCode::Shape, "layer input shape must be positive");
  return std::visit(
      [&](const auto& s) -> std::unique_ptr<Layer> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Conv2D>) return std::make_unique<ConvLayer>(s, input);
        if constexpr (std::is_same_v<T, ReLU>) return std::make_unique<ReluLayer>(input);
        if constexpr (std::is_same_v<T, MaxPool>) return std::make_unique<MaxPoolLayer>(s, input);
        if constexpr (std::is_same_v<T, Dropout>) return std::make_unique<DropoutLayer>(s, input);
        if constexpr (std::is_same_v<T, Dense>) return std::make_unique<DenseLayer>(s, input);
        if constexpr (std::is_same_v<T, Softmax>) return std::make_unique<SoftmaxLayer>(input);
      },
      spec);
}

}  // namespace cropref::nn
