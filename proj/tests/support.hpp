#pragma once

#include "mhspna/network.hpp"

#include <filesystem>
#include <initializer_list>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace testing {

using mhspna::Point;

inline mhspna::Link line(const std::string& id, std::initializer_list<Point> pts,
                         std::map<std::string, double, std::less<>> weights = {}) {
  return mhspna::make_link(id, std::vector<Point>(pts), std::move(weights));
}

/// A straight chain of `count` 100 m links named A, B, C, ...
inline mhspna::SpatialNetwork chain(int count) {
  std::vector<mhspna::Link> links;
  for (int i = 0; i < count; ++i) {
    links.push_back(line(std::string(1, static_cast<char>('A' + i)), {Point(100.0 * i, 0.0), Point(100.0 * (i + 1), 0.0)}));
  }
  return mhspna::SpatialNetwork::build(std::move(links));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mhspna_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
