#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "enmloc/mcl/mcl.hpp"
#include "enmloc/scan.hpp"

namespace enmloc::evalio {

/// Rows `time,x,y,theta,pos_std,yaw_std,converged,n_particles` after a
/// header line. Doubles use the shortest round-trip representation.
void write_trajectory_log(std::ostream& os, std::span<const mcl::TrajectoryRow> rows);
void write_trajectory_log_file(const std::string& path, std::span<const mcl::TrajectoryRow> rows);
std::vector<mcl::TrajectoryRow> read_trajectory_log(std::istream& is);
std::vector<mcl::TrajectoryRow> read_trajectory_log_file(const std::string& path);

struct TrajectorySample {
  double time = 0.0;
  Pose2 pose;
  bool converged = true;  // filter flag; ground truth is always "converged"
};

/// Samples with strictly increasing times.
struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::optional<double> convergence_time;

  /// Throws InvalidArgument unless times strictly increase.
  void validate() const;
};

Trajectory trajectory_from_log(std::span<const mcl::TrajectoryRow> rows);
/// Ground-truth trajectory of a dataset. Throws SchemaError if a scan has no gt.
Trajectory trajectory_from_scans(std::span<const LidarScan> scans);

struct AteReport {
  double loc_rmse = 0.0;  // centimeters
  double yaw_rmse = 0.0;  // degrees
  std::size_t n_matched = 0;
  bool success = false;
  std::optional<double> convergence_time;
};

/// Pairs each estimate with the ground-truth sample nearest in time, within
/// half the median ground-truth period. Returns (est index, gt index).
std::vector<std::pair<std::size_t, std::size_t>> match_by_time(const Trajectory& est,
                                                               const Trajectory& gt);

/// Location and yaw RMSE over matched pairs with est time >= from_time.
/// No alignment is applied. Throws EmptyOverlap when nothing matches.
AteReport ate_rmse(const Trajectory& est, const Trajectory& gt, double from_time);

struct SuccessCriteria {
  double error_gate = 0.3;  // meters
};

struct SuccessResult {
  bool success = false;
  std::optional<double> convergence_time;
};

/// Convergence time is the first matched estimate flagged converged whose
/// position error is under the gate. Success additionally needs every later
/// estimate still flagged and a post-convergence location RMSE under the gate.
SuccessResult success_and_convergence(const Trajectory& est, const Trajectory& gt,
                                      const SuccessCriteria& criteria = {});

/// `metric,value` rows.
void write_metrics(std::ostream& os, std::span<const std::pair<std::string, double>> metrics);

}  // namespace enmloc::evalio
