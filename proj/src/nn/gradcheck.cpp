#include <algorithm>
#include <cmath>
#include <limits>

#include "cropref/error.hpp"
#include "layers.hpp"

namespace cropref::nn {
namespace {

// Central differences straddle a ReLU or max-pool kink when a pre-activation
// (or the gap between a pool maximum and its runner-up) is smaller than the
// change one eps step can cause. Samples are nudged until every such margin
// clears this bound.
constexpr double kKinkMargin = 1e-3;
constexpr int kMaxNudges = 1000;

double kink_margin(const Network& net, const Tensor& input) {
  Workspace ws;
  net.forward(input, Mode::Infer, ws);
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const LayerSpec spec = net.layer(i).spec();
    const Tensor& in = ws.activations[i];
    if (std::holds_alternative<ReLU>(spec)) {
      for (double v : in.values) margin = std::min(margin, std::fabs(v));
    } else if (const auto* pool = std::get_if<MaxPool>(&spec)) {
      const Shape out = net.shapes()[i + 1];
      for (int c = 0; c < out.channels; ++c) {
        for (int oy = 0; oy < out.height; ++oy) {
          for (int ox = 0; ox < out.width; ++ox) {
            double best = -std::numeric_limits<double>::infinity();
            double second = best;
            for (int ky = 0; ky < pool->size; ++ky) {
              for (int kx = 0; kx < pool->size; ++kx) {
                const double v = in.at(c, oy * pool->size + ky, ox * pool->size + kx);
                if (v > best) {
                  second = best;
                  best = v;
                } else if (v > second) {
                  second = v;
                }
              }
            }
            // A window of ReLU zeros has no kink of its own.
            const bool dead = i > 0 && best == 0.0 &&
                              std::holds_alternative<ReLU>(net.layer(i - 1).spec());
            if (pool->size > 1 && !dead) margin = std::min(margin, best - second);
          }
        }
      }
    }
  }
  return margin;
}

double sample_loss(const Network& net, const Sample& s, Workspace& ws) {
  return cross_entropy(net.forward(s.input, Mode::Infer, ws), s.label);
}

}  // namespace

double gradient_check(const Network& net, const Sample& sample, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3))
    throw Error(ErrorCode::InvalidArgument, "gradient check eps must lie in [1e-7, 1e-3]");

  Sample s = sample;
  std::mt19937_64 nudge_rng(0x5eedULL);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  Sample trial = s;
  double best_margin = kink_margin(net, s.input);
  for (int attempt = 0; attempt < kMaxNudges && best_margin < kKinkMargin; ++attempt) {
    for (double& v : trial.input.values) v += jitter(nudge_rng);
    const double m = kink_margin(net, trial.input);
    if (m > best_margin) {
      best_margin = m;
      s = trial;
    }
  }

  const LossAndGradients analytic = loss_and_gradients(net, std::span<const Sample>(&s, 1));

  Network probe = net;
  auto params = probe.layer_params();
  Workspace ws;
  double worst = 0.0;
  for (std::size_t l = 0; l < params.size(); ++l) {
    for (std::size_t j = 0; j < params[l].size(); ++j) {
      const double saved = params[l][j];
      params[l][j] = saved + eps;
      const double plus = sample_loss(probe, s, ws);
      params[l][j] = saved - eps;
      const double minus = sample_loss(probe, s, ws);
      params[l][j] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic.gradients[l][j];
      const double rel = std::fabs(a - numeric) / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace cropref::nn
