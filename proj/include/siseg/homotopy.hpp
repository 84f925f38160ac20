#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "siseg/hypothesis.hpp"
#include "siseg/network.hpp"

namespace siseg {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  bool contains(double z, double tol = 0.0) const { return z >= lo - tol && z <= hi + tol; }
  bool operator==(const Interval&) const = default;
};

/// A stretch [lo, hi] of the line on which every unit keeps its piece.
struct Region {
  double lo = 0.0;
  double hi = 0.0;
  std::uint64_t signature_hash = 0;
  SegmentationMask mask;
  /// Units whose selected piece differs from the previous region.
  std::size_t piece_changes = 0;
};

/// Output of the breakpoint sweep: regions tile [z_min, z_max] and
/// breakpoints[i], breakpoints[i+1] are exactly regions[i].lo, regions[i].hi.
struct RegionPath {
  double z_min = 0.0;
  double z_max = 0.0;
  std::vector<double> breakpoints;
  std::vector<Region> regions;
};

enum class TruncationFlavor { homotopy, over_conditioned };

/// Ordered, pairwise disjoint union of intervals.
struct TruncationRegion {
  std::vector<Interval> intervals;
  TruncationFlavor flavor = TruncationFlavor::homotopy;

  double total_length() const;
  bool contains(double z, double tol = 0.0) const;
};

struct PathOptions {
  std::size_t max_steps = 1'000'000;
  /// Constraints with |slope| at or below this never flip along the line.
  double slope_tol = 1e-12;
  /// Representative point of a region starting at z_t is z_t + step_fraction * (z_max - z_min).
  double step_fraction = 1e-9;
  /// Re-evaluate every region at its midpoint and require the same signature.
  bool verify_midpoint = false;
};

/// Smallest root -intercept/slope above z_t among constraints with
/// slope > slope_tol, clamped to z_max. Throws ConsistencyError for a root
/// behind z_t by more than 1e-9 * max(1, |z_t|).
double next_breakpoint(std::span<const AffineUnitConstraint> constraints, double z_t, double z_max,
                       double slope_tol = 1e-12);

/// Interval around z on which all `constraints` keep their sign, clamped to
/// [z_min, z_max].
Interval constraint_interval(std::span<const AffineUnitConstraint> constraints, double z,
                             double z_min, double z_max, double slope_tol = 1e-12);

RegionPath compute_solution_path(const NetworkSpec& net, const LineParametrization& line,
                                 double z_min, double z_max, const PathOptions& options = {});

/// Union of regions whose mask equals `mask_obs`, adjacent pieces merged.
TruncationRegion truncation_region(const RegionPath& path, const SegmentationMask& mask_obs,
                                   double z_obs);

/// Over-conditioned region: the single interval around z_obs on which every
/// piece selected at z_obs stays selected.
TruncationRegion oc_region(const NetworkSpec& net, const LineParametrization& line, double z_obs,
                           double z_min, double z_max, double slope_tol = 1e-12);

/// One JSON object per region: lo, hi, mask run-length encoding, piece changes.
void write_path_dump(const RegionPath& path, std::ostream& out);

}  // namespace siseg
