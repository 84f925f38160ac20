#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <optional>
#include <span>
#include <vector>

#include "siseg/image.hpp"

namespace siseg {

/// Covariance of the additive Gaussian noise: either sigma^2 I or a full
/// symmetric positive-definite matrix.
class NoiseModel {
 public:
  static NoiseModel isotropic(double sigma);
  /// Validates symmetry (1e-10) and positive definiteness via a Cholesky
  /// factorization.
  static NoiseModel full(Eigen::MatrixXd covariance);

  bool is_isotropic() const { return !covariance_.has_value(); }
  /// Standard deviation of the isotropic model.
  double sigma() const { return sigma_; }
  const Eigen::MatrixXd& covariance() const { return *covariance_; }
  /// Lower Cholesky factor of the full model.
  Eigen::MatrixXd cholesky_lower() const;

  /// Sigma * v.
  std::vector<double> apply(std::span<const double> v) const;

 private:
  NoiseModel() = default;
  double sigma_ = 1.0;
  std::optional<Eigen::MatrixXd> covariance_;
  std::optional<Eigen::LLT<Eigen::MatrixXd>> factor_;
};

/// x(z) = a + b z passing through the observed image at z = z_obs.
struct LineParametrization {
  std::vector<double> a;
  std::vector<double> b;
  double z_obs = 0.0;
  std::vector<double> eta;
  /// sqrt(eta' Sigma eta), the null standard deviation of eta' X.
  double sigma_eta = 1.0;
  TensorShape shape;

  std::vector<double> point(double z) const;
};

/// Object-minus-background mean contrast. Empty when either set is empty
/// (nothing was detected, so there is nothing to test).
std::optional<std::vector<double>> build_test_direction(const SegmentationMask& mask);

LineParametrization line_parametrization(const ImageVector& x_obs, std::span<const double> eta,
                                         const NoiseModel& noise);

/// Isotropic model from the unbiased sample variance of pooled reference values.
NoiseModel estimate_variance(std::span<const double> reference);
NoiseModel estimate_variance(const std::vector<ImageVector>& reference);

}  // namespace siseg
