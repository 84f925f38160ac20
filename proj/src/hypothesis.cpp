#include "siseg/hypothesis.hpp"

#include <cmath>

#include "siseg/errors.hpp"

namespace siseg {

NoiseModel NoiseModel::isotropic(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw ArgumentError("noise sigma must be positive and finite");
  NoiseModel m;
  m.sigma_ = sigma;
  return m;
}

NoiseModel NoiseModel::full(Eigen::MatrixXd covariance) {
  if (covariance.rows() != covariance.cols() || covariance.rows() == 0)
    throw ArgumentError("covariance must be a non-empty square matrix");
  if (!covariance.allFinite()) throw ArgumentError("covariance has non-finite entries");
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw ArgumentError("covariance is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) throw ArgumentError("covariance is not positive definite");
  const Eigen::VectorXd pivots = Eigen::MatrixXd(llt.matrixL()).diagonal();
  if ((pivots.array() <= 0.0).any()) throw ArgumentError("covariance is not positive definite");
  NoiseModel m;
  m.covariance_ = std::move(covariance);
  m.factor_ = std::move(llt);
  return m;
}

Eigen::MatrixXd NoiseModel::cholesky_lower() const {
  if (!factor_) {
    throw ArgumentError("isotropic noise model has no stored factor");
  }
  return factor_->matrixL();
}

std::vector<double> NoiseModel::apply(std::span<const double> v) const {
  std::vector<double> out(v.size());
  if (is_isotropic()) {
    const double var = sigma_ * sigma_;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = var * v[i];
    return out;
  }
  if (static_cast<std::size_t>(covariance_->rows()) != v.size())
    throw ArgumentError("covariance dimension does not match vector length");
  Eigen::Map<const Eigen::VectorXd> in(v.data(), static_cast<Eigen::Index>(v.size()));
  Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) = *covariance_ * in;
  return out;
}

std::vector<double> LineParametrization::point(double z) const {
  std::vector<double> x(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) x[i] = a[i] + b[i] * z;
  return x;
}

std::optional<std::vector<double>> build_test_direction(const SegmentationMask& mask) {
  const std::size_t objects = mask.object_count();
  const std::size_t background = mask.background_count();
  if (objects == 0 || background == 0) return std::nullopt;
  const double pos = 1.0 / static_cast<double>(objects);
  const double neg = -1.0 / static_cast<double>(background);
  std::vector<double> eta(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) eta[i] = mask.is_object(i) ? pos : neg;
  return eta;
}

LineParametrization line_parametrization(const ImageVector& x_obs, std::span<const double> eta,
                                         const NoiseModel& noise) {
  if (eta.size() != x_obs.size()) throw ArgumentError("test direction length does not match image");
  const std::vector<double> sigma_eta_vec = noise.apply(eta);
  double quad = 0.0;
  double z_obs = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    quad += eta[i] * sigma_eta_vec[i];
    z_obs += eta[i] * x_obs[i];
  }
  if (!(quad > 0.0) || !std::isfinite(quad))
    throw NumericError("degenerate test direction: eta' Sigma eta = " + std::to_string(quad));

  LineParametrization line;
  line.eta.assign(eta.begin(), eta.end());
  line.z_obs = z_obs;
  line.sigma_eta = std::sqrt(quad);
  line.shape = x_obs.shape();
  line.b.resize(eta.size());
  line.a.resize(eta.size());
  for (std::size_t i = 0; i < eta.size(); ++i) {
    line.b[i] = sigma_eta_vec[i] / quad;
    line.a[i] = x_obs[i] - line.b[i] * z_obs;
  }
  return line;
}

NoiseModel estimate_variance(std::span<const double> reference) {
  if (reference.size() < 2) throw ArgumentError("variance estimate needs at least 2 values");
  double mean = 0.0;
  for (double v : reference) mean += v;
  mean /= static_cast<double>(reference.size());
  double ss = 0.0;
  for (double v : reference) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(reference.size() - 1);
  if (!(var > 0.0)) throw ArgumentError("reference values are constant; variance is zero");
  return NoiseModel::isotropic(std::sqrt(var));
}

NoiseModel estimate_variance(const std::vector<ImageVector>& reference) {
  std::vector<double> pooled;
  for (const auto& img : reference) pooled.insert(pooled.end(), img.values().begin(), img.values().end());
  return estimate_variance(pooled);
}

}  // namespace siseg
