#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace siseg {

/// Continuous piecewise-linear scalar function.
///
/// Piece j covers [knots[j-1], knots[j]] (with knots[-1] = -inf and
/// knots[m] = +inf) and evaluates to slopes[j] * u + intercepts[j].
class PiecewiseLinearActivation {
 public:
  PiecewiseLinearActivation() = default;
  PiecewiseLinearActivation(std::vector<double> knots, std::vector<double> slopes,
                            std::vector<double> intercepts, std::string name = "pwl");

  static PiecewiseLinearActivation relu();
  static PiecewiseLinearActivation leaky_relu(double negative_slope);
  static PiecewiseLinearActivation identity();

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& slopes() const { return slopes_; }
  const std::vector<double>& intercepts() const { return intercepts_; }
  const std::string& name() const { return name_; }
  std::size_t piece_count() const { return slopes_.size(); }

  /// Index of the piece selected for input u. A value sitting exactly on a
  /// knot selects the piece to its right.
  std::uint32_t piece_of(double u) const;

  double evaluate(double u) const;
  double evaluate_piece(std::uint32_t piece, double u) const {
    return slopes_[piece] * u + intercepts_[piece];
  }

 private:
  std::vector<double> knots_;
  std::vector<double> slopes_;
  std::vector<double> intercepts_;
  std::string name_;
};

enum class SmoothActivation { sigmoid, tanh };

SmoothActivation parse_smooth_activation(const std::string& name);
double evaluate_smooth(SmoothActivation kind, double u);

/// Piecewise-linear stand-in for a smooth hidden-layer activation.
///
/// `cuts` is the number of pieces (odd, >= 3). Three pieces give the
/// saturating approximations sigmoid ~ clamp(u/8 + 1/2, 0, 1) on knots +-4 and
/// tanh ~ clamp(u/2, -1, 1) on knots +-2. More pieces interpolate the exact
/// function with chords between `cuts - 1` equally spaced knots over the same
/// support and hold the end-knot values outside it.
PiecewiseLinearActivation approximate_activation(SmoothActivation kind, int cuts);

}  // namespace siseg
