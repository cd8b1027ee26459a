#include "enmloc/evalio/dataset.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "enmloc/error.hpp"

namespace enmloc::evalio {

namespace {

using nlohmann::json;

template <typename T>
void put_number(std::string& out, T v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

void put_pose(std::string& out, const Pose2& p) {
  out += '[';
  put_number(out, p.x());
  out += ',';
  put_number(out, p.y());
  out += ',';
  put_number(out, p.theta());
  out += ']';
}

double get_number(const json& j, const char* key, std::size_t line) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw SchemaError("line " + std::to_string(line) + ": missing field '" + key + "'");
  }
  if (!it->is_number()) {
    throw SchemaError("line " + std::to_string(line) + ": field '" + key + "' is not a number");
  }
  return it->get<double>();
}

Pose2 get_pose(const json& j, const char* key, std::size_t line) {
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
      !v[2].is_number()) {
    throw SchemaError("line " + std::to_string(line) + ": field '" + key +
                      "' must be [x, y, theta]");
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

}  // namespace

void write_dataset(std::ostream& os, std::span<const LidarScan> scans) {
  std::string line;
  for (const LidarScan& s : scans) {
    line.clear();
    line += "{\"t\":";
    put_number(line, s.time);
    line += ",\"odom\":";
    put_pose(line, s.odom);
    if (s.gt) {
      line += ",\"gt\":";
      put_pose(line, *s.gt);
    }
    line += ",\"angle_min\":";
    put_number(line, s.angle_min);
    line += ",\"angle_inc\":";
    put_number(line, s.angle_inc);
    line += ",\"range_max\":";
    put_number(line, s.range_max);
    line += ",\"ranges\":[";
    for (std::size_t k = 0; k < s.rays.size(); ++k) {
      if (k > 0) {
        line += ',';
      }
      if (s.rays[k].valid) {
        put_number(line, static_cast<float>(s.rays[k].range));
      } else {
        line += "-1";
      }
    }
    line += "]}\n";
    os << line;
  }
  if (!os) {
    throw IoError("failed writing dataset");
  }
}

void write_dataset_file(const std::string& path, std::span<const LidarScan> scans) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  write_dataset(os, scans);
  os.close();
  if (!os) {
    throw IoError("failed writing '" + path + "'");
  }
}

std::vector<LidarScan> read_dataset(std::istream& is) {
  std::vector<LidarScan> scans;
  std::string text;
  std::size_t line = 0;
  while (std::getline(is, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(line, e.what());
    }
    if (!j.is_object()) {
      throw ParseError(line, "record is not a JSON object");
    }
    const double t = get_number(j, "t", line);
    if (!j.contains("odom")) {
      throw SchemaError("line " + std::to_string(line) + ": missing field 'odom'");
    }
    const Pose2 odom = get_pose(j, "odom", line);
    std::optional<Pose2> gt;
    if (j.contains("gt") && !j["gt"].is_null()) {
      gt = get_pose(j, "gt", line);
    }
    const double angle_min = get_number(j, "angle_min", line);
    const double angle_inc = get_number(j, "angle_inc", line);
    const double range_max = get_number(j, "range_max", line);
    const auto it = j.find("ranges");
    if (it == j.end() || !it->is_array()) {
      throw SchemaError("line " + std::to_string(line) + ": missing array field 'ranges'");
    }
    std::vector<double> ranges;
    ranges.reserve(it->size());
    for (const json& r : *it) {
      if (!r.is_number()) {
        throw SchemaError("line " + std::to_string(line) + ": non-numeric range");
      }
      ranges.push_back(storage_range(r.get<double>()));
    }
    scans.push_back(LidarScan::from_ranges(t, odom, gt, angle_min, angle_inc, range_max, ranges));
  }
  if (is.bad()) {
    throw IoError("failed reading dataset");
  }
  return scans;
}

std::vector<LidarScan> read_dataset_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw IoError("cannot open '" + path + "'");
  }
  return read_dataset(is);
}

}  // namespace enmloc::evalio
