#include "enmloc/evalio/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "enmloc/error.hpp"

namespace enmloc::evalio {

namespace {

constexpr const char* kLogHeader = "time,x,y,theta,pos_std,yaw_std,converged,n_particles";

void put(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

template <typename T>
T parse_field(std::string_view field, std::size_t line) {
  T v{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw ParseError(line, "bad value '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace

void write_trajectory_log(std::ostream& os, std::span<const mcl::TrajectoryRow> rows) {
  std::string line;
  os << kLogHeader << '\n';
  for (const mcl::TrajectoryRow& r : rows) {
    line.clear();
    put(line, r.time);
    line += ',';
    put(line, r.pose.x());
    line += ',';
    put(line, r.pose.y());
    line += ',';
    put(line, r.pose.theta());
    line += ',';
    put(line, r.pos_std);
    line += ',';
    put(line, r.yaw_std);
    line += r.converged ? ",1," : ",0,";
    line += std::to_string(r.n_particles);
    line += '\n';
    os << line;
  }
  if (!os) {
    throw IoError("failed writing trajectory log");
  }
}

void write_trajectory_log_file(const std::string& path,
                               std::span<const mcl::TrajectoryRow> rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  write_trajectory_log(os, rows);
  os.close();
  if (!os) {
    throw IoError("failed writing '" + path + "'");
  }
}

std::vector<mcl::TrajectoryRow> read_trajectory_log(std::istream& is) {
  std::vector<mcl::TrajectoryRow> rows;
  std::string text;
  std::size_t line = 0;
  if (!std::getline(is, text)) {
    throw ParseError(1, "empty trajectory log");
  }
  ++line;
  if (!text.empty() && text.back() == '\r') {
    text.pop_back();
  }
  if (text != kLogHeader) {
    throw SchemaError(std::string("trajectory log header must be '") + kLogHeader + "'");
  }
  std::vector<std::string_view> fields;
  while (std::getline(is, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') {
      text.pop_back();
    }
    if (text.empty()) {
      continue;
    }
    fields.clear();
    std::string_view rest(text);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) {
        break;
      }
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 8) {
      throw ParseError(line, "expected 8 fields, got " + std::to_string(fields.size()));
    }
    mcl::TrajectoryRow r;
    r.time = parse_field<double>(fields[0], line);
    const double x = parse_field<double>(fields[1], line);
    const double y = parse_field<double>(fields[2], line);
    const double th = parse_field<double>(fields[3], line);
    if (!std::isfinite(th)) {
      throw ParseError(line, "non-finite heading");
    }
    r.pose = Pose2(x, y, th);
    r.pos_std = parse_field<double>(fields[4], line);
    r.yaw_std = parse_field<double>(fields[5], line);
    const int flag = parse_field<int>(fields[6], line);
    if (flag != 0 && flag != 1) {
      throw ParseError(line, "converged flag must be 0 or 1");
    }
    r.converged = flag == 1;
    r.n_particles = parse_field<std::size_t>(fields[7], line);
    rows.push_back(r);
  }
  return rows;
}

std::vector<mcl::TrajectoryRow> read_trajectory_log_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw IoError("cannot open '" + path + "'");
  }
  return read_trajectory_log(is);
}

void Trajectory::validate() const {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].time > samples[i - 1].time)) {
      throw InvalidArgument("trajectory times must strictly increase (sample " +
                            std::to_string(i) + ")");
    }
  }
}

Trajectory trajectory_from_log(std::span<const mcl::TrajectoryRow> rows) {
  Trajectory t;
  t.samples.reserve(rows.size());
  for (const mcl::TrajectoryRow& r : rows) {
    t.samples.push_back({r.time, r.pose, r.converged});
    if (r.converged && !t.convergence_time) {
      t.convergence_time = r.time;
    }
  }
  t.validate();
  return t;
}

Trajectory trajectory_from_scans(std::span<const LidarScan> scans) {
  Trajectory t;
  t.samples.reserve(scans.size());
  for (std::size_t i = 0; i < scans.size(); ++i) {
    if (!scans[i].gt) {
      throw SchemaError("scan " + std::to_string(i) + " has no ground-truth pose");
    }
    t.samples.push_back({scans[i].time, *scans[i].gt, true});
  }
  t.validate();
  return t;
}

std::vector<std::pair<std::size_t, std::size_t>> match_by_time(const Trajectory& est,
                                                               const Trajectory& gt) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (gt.samples.empty() || est.samples.empty()) {
    return out;
  }
  double tolerance = 1e-9;
  if (gt.samples.size() >= 2) {
    std::vector<double> periods;
    periods.reserve(gt.samples.size() - 1);
    for (std::size_t i = 1; i < gt.samples.size(); ++i) {
      periods.push_back(gt.samples[i].time - gt.samples[i - 1].time);
    }
    std::nth_element(periods.begin(), periods.begin() + periods.size() / 2, periods.end());
    tolerance = 0.5 * periods[periods.size() / 2];
  }
  for (std::size_t e = 0; e < est.samples.size(); ++e) {
    const double t = est.samples[e].time;
    const auto it = std::lower_bound(
        gt.samples.begin(), gt.samples.end(), t,
        [](const TrajectorySample& s, double v) { return s.time < v; });
    std::size_t best = gt.samples.size();
    double best_dt = tolerance;
    for (auto cand : {it, it == gt.samples.begin() ? it : it - 1}) {
      if (cand == gt.samples.end()) {
        continue;
      }
      const double dt = std::abs(cand->time - t);
      if (dt <= best_dt) {
        best_dt = dt;
        best = static_cast<std::size_t>(cand - gt.samples.begin());
      }
    }
    if (best < gt.samples.size()) {
      out.emplace_back(e, best);
    }
  }
  return out;
}

AteReport ate_rmse(const Trajectory& est, const Trajectory& gt, double from_time) {
  double se_pos = 0.0;
  double se_yaw = 0.0;
  std::size_t n = 0;
  for (const auto& [e, g] : match_by_time(est, gt)) {
    const TrajectorySample& a = est.samples[e];
    if (a.time < from_time) {
      continue;
    }
    const TrajectorySample& b = gt.samples[g];
    se_pos += (a.pose.translation() - b.pose.translation()).squared_norm();
    const double dyaw = angle_wrap(a.pose.theta() - b.pose.theta());
    se_yaw += dyaw * dyaw;
    ++n;
  }
  if (n == 0) {
    throw EmptyOverlap("no estimate matches a ground-truth sample after t=" +
                       std::to_string(from_time));
  }
  AteReport r;
  r.n_matched = n;
  r.loc_rmse = 100.0 * std::sqrt(se_pos / static_cast<double>(n));
  r.yaw_rmse = 180.0 / std::numbers::pi * std::sqrt(se_yaw / static_cast<double>(n));
  return r;
}

SuccessResult success_and_convergence(const Trajectory& est, const Trajectory& gt,
                                      const SuccessCriteria& criteria) {
  SuccessResult result;
  const auto pairs = match_by_time(est, gt);
  std::size_t first = pairs.size();
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const TrajectorySample& a = est.samples[pairs[k].first];
    const TrajectorySample& b = gt.samples[pairs[k].second];
    if (a.converged && (a.pose.translation() - b.pose.translation()).norm() < criteria.error_gate) {
      first = k;
      break;
    }
  }
  if (first == pairs.size()) {
    return result;
  }
  const std::size_t first_est = pairs[first].first;
  result.convergence_time = est.samples[first_est].time;
  for (std::size_t e = first_est; e < est.samples.size(); ++e) {
    if (!est.samples[e].converged) {
      return result;
    }
  }
  const AteReport after = ate_rmse(est, gt, *result.convergence_time);
  result.success = after.loc_rmse / 100.0 < criteria.error_gate;
  return result;
}

void write_metrics(std::ostream& os, std::span<const std::pair<std::string, double>> metrics) {
  os << "metric,value\n";
  std::string line;
  for (const auto& [name, value] : metrics) {
    line = name;
    line += ',';
    put(line, value);
    line += '\n';
    os << line;
  }
}

}  // namespace enmloc::evalio
