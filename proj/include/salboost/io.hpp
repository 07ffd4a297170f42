#pragma once

#include <string>

#include "salboost/cloud.hpp"

namespace salboost {

enum class CloudFormat { PcdAscii, PcdBinary, PlyAscii };

/// Reads PCD v0.7 (ascii / little-endian binary) or ASCII PLY, chosen by the
/// file's magic. Fields x y z are required; rgb / rgba (packed float or
/// uint32) and normal_x normal_y normal_z are picked up when present; other
/// fields are skipped. Errors carry the line or byte offset.
PointCloud load_cloud(const std::string& path);

/// Coordinates and normals are written as float64 so that binary round
/// trips are exact; ASCII uses 9 significant digits and "nan" tokens.
void save_cloud(const PointCloud& cloud, const std::string& path, CloudFormat format);

}  // namespace salboost
