#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "gpmpc/types.hpp"

namespace gpmpc {

// Arc-length-parameterized curvature lookup table with linear interpolation
// between breakpoints.
struct CurvatureProfile {
  Eigen::VectorXd breakpoints;
  Eigen::VectorXd kappas;
  bool closed = false;

  double total_length() const { return breakpoints(breakpoints.size() - 1); }

  // Throws TrackError if breakpoints are not strictly increasing from 0, the
  // sizes disagree, or a closed profile has mismatched seam values.
  void validate() const;
};

// Linear interpolation of the curvature table at arc length s. Closed
// profiles wrap s modulo the length; open profiles clamp beyond the ends.
double curvature_at(const CurvatureProfile& profile, double s);

// Reduces s modulo the track length into [0, total_length). Only meaningful
// for closed profiles; throws std::invalid_argument otherwise.
double wrap_s(const CurvatureProfile& profile, double s);

// Result of projecting a Cartesian point onto the centerline.
struct Projection {
  double s = 0.0;
  double n = 0.0;
  double distance = 0.0;
};

// Cartesian centerline obtained by integrating the curvature profile from the
// origin pose (0, 0, heading 0). Positions and headings at arbitrary arc
// length are recovered by one RK4 step from the nearest stored grid node, so
// queries stay accurate between nodes.
class Centerline {
 public:
  static Centerline build(const CurvatureProfile& profile, double ds = 1e-3);

  const CurvatureProfile& profile() const { return profile_; }
  double total_length() const { return profile_.total_length(); }

  Eigen::Vector2d position(double s) const;
  double heading(double s) const;

  // Closest-point projection. With a hint (previous arc length), Newton
  // iteration from the hint; otherwise a global scan over grid nodes followed
  // by Newton refinement of every local minimum. Ties in distance within
  // tie_tol resolve to the smaller s. Throws ProjectionError when the offset
  // reaches the local curvature radius or no minimizer is found.
  Projection project(const Eigen::Vector2d& point,
                     std::optional<double> hint = std::nullopt) const;

  CurvilinearState to_curvilinear(const CartesianState& x,
                                  std::optional<double> hint = std::nullopt) const;
  CartesianState to_cartesian(const CurvilinearState& x) const;

  std::size_t grid_size() const { return static_cast<std::size_t>(s_.size()); }
  double grid_s(std::size_t i) const { return s_(static_cast<Eigen::Index>(i)); }

  static constexpr double tie_tol = 1e-9;

 private:
  Centerline() = default;

  // Pose (px, py, theta) at a grid node plus an RK4 continuation to s.
  Eigen::Vector3d pose(double s) const;
  double refine(double s0, const Eigen::Vector2d& point) const;

  CurvatureProfile profile_;
  Eigen::VectorXd s_;
  Eigen::VectorXd px_;
  Eigen::VectorXd py_;
  Eigen::VectorXd theta_;
  double h_ = 0.0;
};

// Closed benchmark track: a stadium-like loop with an S-curve section,
// |kappa| <= 1.2, roughly 13 m long. Built half-period symmetric (the second
// half repeats the first), so each half turns the heading by exactly pi and
// the integrated centerline closes to integrator precision.
CurvatureProfile benchmark_track();

// Constant-curvature profiles used throughout the tests.
CurvatureProfile straight_track(double length);
CurvatureProfile circle_track(double radius);

// Track document I/O: JSON object with `breakpoints`, `kappas`, `closed`.
CurvatureProfile load_track(const std::string& path);
void save_track(const CurvatureProfile& profile, const std::string& path);

// CSV export `s,p_x,p_y,theta,kappa` sampled at the given step.
void export_centerline_csv(const Centerline& centerline, double ds,
                           const std::string& path);

}  // namespace gpmpc
