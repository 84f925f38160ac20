#include "siseg/activation.hpp"

#include <algorithm>
#include <cmath>

#include "siseg/errors.hpp"

namespace siseg {

PiecewiseLinearActivation::PiecewiseLinearActivation(std::vector<double> knots,
                                                     std::vector<double> slopes,
                                                     std::vector<double> intercepts,
                                                     std::string name)
    : knots_(std::move(knots)),
      slopes_(std::move(slopes)),
      intercepts_(std::move(intercepts)),
      name_(std::move(name)) {
  if (slopes_.size() != knots_.size() + 1 || intercepts_.size() != slopes_.size()) {
    throw ValidationError("activation '" + name_ + "': need knots+1 pieces, got " +
                          std::to_string(knots_.size()) + " knots and " +
                          std::to_string(slopes_.size()) + " slopes");
  }
  for (double v : knots_)
    if (!std::isfinite(v)) throw ValidationError("activation '" + name_ + "': non-finite knot");
  for (std::size_t i = 0; i < slopes_.size(); ++i) {
    if (!std::isfinite(slopes_[i]) || !std::isfinite(intercepts_[i]))
      throw ValidationError("activation '" + name_ + "': non-finite piece coefficient");
  }
  for (std::size_t k = 0; k < knots_.size(); ++k) {
    if (k > 0 && !(knots_[k] > knots_[k - 1]))
      throw ValidationError("activation '" + name_ + "': knots must be strictly increasing");
    const double left = slopes_[k] * knots_[k] + intercepts_[k];
    const double right = slopes_[k + 1] * knots_[k] + intercepts_[k + 1];
    if (std::abs(left - right) > 1e-9 * std::max(1.0, std::abs(left)))
      throw ValidationError("activation '" + name_ + "': discontinuous at knot " +
                            std::to_string(knots_[k]));
  }
}

PiecewiseLinearActivation PiecewiseLinearActivation::relu() {
  return {{0.0}, {0.0, 1.0}, {0.0, 0.0}, "relu"};
}

PiecewiseLinearActivation PiecewiseLinearActivation::leaky_relu(double negative_slope) {
  return {{0.0}, {negative_slope, 1.0}, {0.0, 0.0}, "leaky_relu"};
}

PiecewiseLinearActivation PiecewiseLinearActivation::identity() {
  return {{}, {1.0}, {0.0}, "identity"};
}

std::uint32_t PiecewiseLinearActivation::piece_of(double u) const {
  // Small knot lists dominate (ReLU has one), a linear scan beats bisection.
  std::uint32_t piece = 0;
  for (double k : knots_) {
    if (u >= k)
      ++piece;
    else
      break;
  }
  return piece;
}

double PiecewiseLinearActivation::evaluate(double u) const { return evaluate_piece(piece_of(u), u); }

SmoothActivation parse_smooth_activation(const std::string& name) {
  if (name == "sigmoid") return SmoothActivation::sigmoid;
  if (name == "tanh") return SmoothActivation::tanh;
  throw ArgumentError("unknown smooth activation '" + name + "'");
}

double evaluate_smooth(SmoothActivation kind, double u) {
  return kind == SmoothActivation::sigmoid ? 1.0 / (1.0 + std::exp(-u)) : std::tanh(u);
}

PiecewiseLinearActivation approximate_activation(SmoothActivation kind, int cuts) {
  if (cuts < 3 || cuts % 2 == 0)
    throw ArgumentError("piecewise approximation needs an odd cut count >= 3, got " +
                        std::to_string(cuts));
  const bool sig = kind == SmoothActivation::sigmoid;
  const std::string name = std::string(sig ? "sigmoid" : "tanh") + "-" + std::to_string(cuts) + "cut";
  if (cuts == 3) {
    if (sig) return {{-4.0, 4.0}, {0.0, 0.125, 0.0}, {0.0, 0.5, 1.0}, name};
    return {{-2.0, 2.0}, {0.0, 0.5, 0.0}, {-1.0, 0.0, 1.0}, name};
  }

  const double support = sig ? 4.0 : 2.0;
  const int knot_count = cuts - 1;
  std::vector<double> knots(knot_count);
  std::vector<double> values(knot_count);
  for (int k = 0; k < knot_count; ++k) {
    knots[k] = -support + 2.0 * support * k / (knot_count - 1);
    values[k] = evaluate_smooth(kind, knots[k]);
  }
  std::vector<double> slopes{0.0};
  std::vector<double> intercepts{values.front()};
  for (int k = 0; k + 1 < knot_count; ++k) {
    const double s = (values[k + 1] - values[k]) / (knots[k + 1] - knots[k]);
    slopes.push_back(s);
    intercepts.push_back(values[k] - s * knots[k]);
  }
  slopes.push_back(0.0);
  intercepts.push_back(values.back());
  return {std::move(knots), std::move(slopes), std::move(intercepts), name};
}

}  // namespace siseg
