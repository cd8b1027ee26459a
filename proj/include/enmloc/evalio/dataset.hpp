#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "enmloc/scan.hpp"

namespace enmloc::evalio {

/// JSON Lines, one scan per line:
///   {"t":..,"odom":[x,y,theta],"gt":[x,y,theta],"angle_min":..,"angle_inc":..,
///    "range_max":..,"ranges":[..]}
/// gt is optional and invalid rays are written as -1. Ranges are stored at
/// float precision, everything else at full double precision.
void write_dataset(std::ostream& os, std::span<const LidarScan> scans);
void write_dataset_file(const std::string& path, std::span<const LidarScan> scans);

/// Blank lines are skipped. Throws ParseError (with the line number) on
/// malformed JSON and SchemaError on missing or mistyped fields.
std::vector<LidarScan> read_dataset(std::istream& is);
std::vector<LidarScan> read_dataset_file(const std::string& path);

/// Range value as stored in a dataset file.
inline double storage_range(double r) { return static_cast<double>(static_cast<float>(r)); }

}  // namespace enmloc::evalio
