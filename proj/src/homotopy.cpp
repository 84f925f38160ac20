#include "siseg/homotopy.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <ostream>

#include "siseg/errors.hpp"

namespace siseg {

namespace {

// Largest root among constraints that hold for z >= root, i.e. the left end
// of the region the constraints describe.
double lower_root(std::span<const AffineUnitConstraint> constraints, double slope_tol) {
  double lo = -std::numeric_limits<double>::infinity();
  for (const auto& c : constraints) {
    if (c.slope < -slope_tol) lo = std::max(lo, -c.intercept / c.slope);
  }
  return lo;
}

std::size_t count_changes(std::span<const std::uint32_t> prev, std::span<const std::uint32_t> cur) {
  if (prev.size() != cur.size()) return cur.size();
  std::size_t n = 0;
  for (std::size_t i = 0; i < cur.size(); ++i) n += prev[i] != cur[i];
  return n;
}

}  // namespace

double TruncationRegion::total_length() const {
  double total = 0.0;
  for (const auto& iv : intervals) total += iv.length();
  return total;
}

bool TruncationRegion::contains(double z, double tol) const {
  return std::any_of(intervals.begin(), intervals.end(),
                     [&](const Interval& iv) { return iv.contains(z, tol); });
}

double next_breakpoint(std::span<const AffineUnitConstraint> constraints, double z_t, double z_max,
                       double slope_tol) {
  const double tol = 1e-9 * std::max(1.0, std::abs(z_t));
  double next = std::numeric_limits<double>::infinity();
  for (const auto& c : constraints) {
    if (c.slope <= slope_tol) continue;
    const double root = -c.intercept / c.slope;
    if (!std::isfinite(root)) throw NumericError("non-finite constraint root");
    if (root < z_t - tol) {
      throw ConsistencyError("constraint of unit (" + std::to_string(c.unit.layer) + ", " +
                             std::to_string(c.unit.index) + ") flips at " + std::to_string(root) +
                             ", behind the sweep position " + std::to_string(z_t));
    }
    if (root > z_t) next = std::min(next, root);
  }
  return std::min(next, z_max);
}

Interval constraint_interval(std::span<const AffineUnitConstraint> constraints, double z,
                             double z_min, double z_max, double slope_tol) {
  double lo = z_min;
  double hi = z_max;
  for (const auto& c : constraints) {
    if (c.slope > slope_tol)
      hi = std::min(hi, -c.intercept / c.slope);
    else if (c.slope < -slope_tol)
      lo = std::max(lo, -c.intercept / c.slope);
  }
  const double tol = 1e-9 * std::max({1.0, std::abs(z), z_max - z_min});
  if (lo > hi + tol || !(z >= lo - tol && z <= hi + tol))
    throw ConsistencyError("constraints do not admit an interval around " + std::to_string(z));
  return {std::min(lo, hi), std::max(lo, hi)};
}

RegionPath compute_solution_path(const NetworkSpec& net, const LineParametrization& line,
                                 double z_min, double z_max, const PathOptions& options) {
  if (!(z_min < z_max) || !std::isfinite(z_min) || !std::isfinite(z_max))
    throw ArgumentError("search range must satisfy z_min < z_max");
  RegionPath path;
  path.z_min = z_min;
  path.z_max = z_max;
  path.breakpoints.push_back(z_min);

  const double delta = options.step_fraction * (z_max - z_min);
  std::vector<std::uint32_t> previous_signature;
  double z_t = z_min;
  std::size_t steps = 0;

  while (z_t < z_max) {
    if (++steps > options.max_steps)
      throw PathExplosionError("breakpoint sweep exceeded " + std::to_string(options.max_steps) +
                               " steps");
    double rep = std::min(z_t + delta, 0.5 * (z_t + z_max));
    LineEvaluation eval = forward_line(net, line.a, line.b, rep, line.shape);

    // If the representative point landed past a boundary very close to z_t,
    // step back towards z_t until the region really starts there.
    const double sliver_tol = 1e-12 * std::max(1.0, std::abs(z_t));
    for (int refine = 0; refine < 64; ++refine) {
      const double lo = lower_root(eval.constraints, options.slope_tol);
      if (!(lo > z_t + sliver_tol) || !(lo < rep)) break;
      rep = z_t + 0.5 * (lo - z_t);
      eval = forward_line(net, line.a, line.b, rep, line.shape);
    }

    const double next = next_breakpoint(eval.constraints, z_t, z_max, options.slope_tol);
    if (!std::isfinite(next)) throw NumericError("non-finite breakpoint");
    if (!(next > z_t)) throw ConsistencyError("breakpoint sweep made no progress at " + std::to_string(z_t));

    if (options.verify_midpoint) {
      const auto mid = forward_line(net, line.a, line.b, 0.5 * (z_t + next), line.shape);
      if (mid.signature != eval.signature)
        throw ConsistencyError("signature changes inside region [" + std::to_string(z_t) + ", " +
                               std::to_string(next) + "]");
    }

    Region region;
    region.lo = z_t;
    region.hi = next;
    region.signature_hash = eval.signature_hash;
    region.piece_changes = previous_signature.empty() ? 0 : count_changes(previous_signature, eval.signature);
    region.mask = std::move(eval.mask);
    path.regions.push_back(std::move(region));
    path.breakpoints.push_back(next);
    previous_signature = std::move(eval.signature);
    z_t = next;
  }
  return path;
}

TruncationRegion truncation_region(const RegionPath& path, const SegmentationMask& mask_obs,
                                   double z_obs) {
  TruncationRegion out;
  out.flavor = TruncationFlavor::homotopy;
  for (const auto& r : path.regions) {
    if (!(r.mask == mask_obs)) continue;
    if (!out.intervals.empty() && out.intervals.back().hi == r.lo)
      out.intervals.back().hi = r.hi;
    else
      out.intervals.push_back({r.lo, r.hi});
  }
  const double tol = 1e-9 * (path.z_max - path.z_min);
  if (!out.contains(z_obs, tol))
    throw ConsistencyError("observed position " + std::to_string(z_obs) +
                           " is not inside any region with the observed mask");
  return out;
}

TruncationRegion oc_region(const NetworkSpec& net, const LineParametrization& line, double z_obs,
                           double z_min, double z_max, double slope_tol) {
  const auto eval = forward_line(net, line.a, line.b, z_obs, line.shape);
  TruncationRegion out;
  out.flavor = TruncationFlavor::over_conditioned;
  out.intervals.push_back(constraint_interval(eval.constraints, z_obs, z_min, z_max, slope_tol));
  return out;
}

void write_path_dump(const RegionPath& path, std::ostream& out) {
  for (const auto& r : path.regions) {
    nlohmann::json rec{{"lo", r.lo},
                       {"hi", r.hi},
                       {"mask_rle", r.mask.run_length_encoding()},
                       {"piece_changes", r.piece_changes},
                       {"signature_hash", r.signature_hash}};
    out << rec.dump() << '\n';
  }
}

}  // namespace siseg
