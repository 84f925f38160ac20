#include <gtest/gtest.h>

#include <cmath>

#include "siseg/activation.hpp"
#include "siseg/errors.hpp"

namespace siseg {
namespace {

double true_sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

TEST(Activation, ReluPiecesAndEvaluation) {
  const auto relu = PiecewiseLinearActivation::relu();
  ASSERT_EQ(relu.piece_count(), 2u);
  EXPECT_EQ(relu.piece_of(-1.0), 0u);
  EXPECT_EQ(relu.piece_of(0.0), 1u);
  EXPECT_EQ(relu.piece_of(3.0), 1u);
  EXPECT_DOUBLE_EQ(relu.evaluate(-2.0), 0.0);
  EXPECT_DOUBLE_EQ(relu.evaluate(2.5), 2.5);
}

TEST(Activation, LeakyReluAndIdentity) {
  const auto leaky = PiecewiseLinearActivation::leaky_relu(0.1);
  EXPECT_DOUBLE_EQ(leaky.evaluate(-2.0), -0.2);
  EXPECT_DOUBLE_EQ(leaky.evaluate(2.0), 2.0);
  const auto id = PiecewiseLinearActivation::identity();
  EXPECT_EQ(id.piece_count(), 1u);
  EXPECT_DOUBLE_EQ(id.evaluate(-7.25), -7.25);
}

TEST(Activation, RejectsDiscontinuity) {
  EXPECT_THROW(PiecewiseLinearActivation({0.0}, {0.0, 1.0}, {0.0, 1.0}), ValidationError);
}

TEST(Activation, RejectsBadKnots) {
  EXPECT_THROW(PiecewiseLinearActivation({1.0, 1.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}), ValidationError);
  EXPECT_THROW(PiecewiseLinearActivation({0.0}, {1.0}, {0.0}), ValidationError);
  EXPECT_THROW(PiecewiseLinearActivation({NAN}, {0.0, 0.0}, {0.0, 0.0}), ValidationError);
}

TEST(Activation, SigmoidThreeCut) {
  const auto f = approximate_activation(SmoothActivation::sigmoid, 3);
  ASSERT_EQ(f.knots(), (std::vector<double>{-4.0, 4.0}));
  EXPECT_DOUBLE_EQ(f.slopes()[0], 0.0);
  EXPECT_DOUBLE_EQ(f.slopes()[1], 1.0 / 8.0);
  EXPECT_DOUBLE_EQ(f.slopes()[2], 0.0);
  EXPECT_DOUBLE_EQ(f.intercepts()[0], 0.0);
  EXPECT_DOUBLE_EQ(f.intercepts()[1], 0.5);
  EXPECT_DOUBLE_EQ(f.intercepts()[2], 1.0);
  EXPECT_DOUBLE_EQ(f.evaluate(-10.0), 0.0);
  EXPECT_DOUBLE_EQ(f.evaluate(2.0), 0.75);
  EXPECT_DOUBLE_EQ(f.evaluate(10.0), 1.0);
}

TEST(Activation, TanhThreeCut) {
  const auto f = approximate_activation(SmoothActivation::tanh, 3);
  ASSERT_EQ(f.knots(), (std::vector<double>{-2.0, 2.0}));
  EXPECT_DOUBLE_EQ(f.slopes()[1], 0.5);
  EXPECT_DOUBLE_EQ(f.intercepts()[1], 0.0);
  EXPECT_DOUBLE_EQ(f.evaluate(-5.0), -1.0);
  EXPECT_DOUBLE_EQ(f.evaluate(1.0), 0.5);
  EXPECT_DOUBLE_EQ(f.evaluate(5.0), 1.0);
}

TEST(Activation, FiveCutMatchesExactFunctionAtKnots) {
  const auto f = approximate_activation(SmoothActivation::sigmoid, 5);
  ASSERT_EQ(f.knots().size(), 4u);
  for (double k : f.knots()) EXPECT_NEAR(f.evaluate(k), true_sigmoid(k), 1e-12) << "knot " << k;
  EXPECT_DOUBLE_EQ(f.knots().front(), -4.0);
  EXPECT_DOUBLE_EQ(f.knots().back(), 4.0);
  const auto g = approximate_activation(SmoothActivation::tanh, 7);
  for (double k : g.knots()) EXPECT_NEAR(g.evaluate(k), std::tanh(k), 1e-12);
}

TEST(Activation, InvalidCutCounts) {
  EXPECT_THROW(approximate_activation(SmoothActivation::sigmoid, 4), ArgumentError);
  EXPECT_THROW(approximate_activation(SmoothActivation::tanh, 1), ArgumentError);
  EXPECT_THROW(parse_smooth_activation("softplus"), ArgumentError);
}

TEST(Activation, ApproximationsAreContinuous) {
  for (auto kind : {SmoothActivation::sigmoid, SmoothActivation::tanh}) {
    for (int cuts : {3, 5, 7, 9, 15}) {
      const auto f = approximate_activation(kind, cuts);
      for (std::size_t j = 0; j < f.knots().size(); ++j) {
        const double k = f.knots()[j];
        EXPECT_NEAR(f.evaluate_piece(j, k), f.evaluate_piece(j + 1, k), 1e-9);
      }
    }
  }
}

}  // namespace
}  // namespace siseg
