#pragma once

#include <filesystem>
#include <vector>

#include "hida/geomodel.hpp"

namespace hida {

// Flat little-endian binary field format:
//   int64  magic = 0x48494441464c4431 ("HIDAFLD1")
//   int64  nx, ny, nz
//   double dx, dy, dz
//   double values[nx*ny*nz], x-fastest order
inline constexpr std::int64_t kFieldMagic = 0x48494441464c4431LL;

void write_field_binary(const std::filesystem::path& path, const GridSpec& grid,
                        const std::vector<double>& values);
// Returns the grid read from the header; values resized to match.
GridSpec read_field_binary(const std::filesystem::path& path,
                           std::vector<double>& values);

// CSV export for inspection: header i,j,k,value.
void write_field_csv(const std::filesystem::path& path, const GridSpec& grid,
                     const std::vector<double>& values);

}  // namespace hida
