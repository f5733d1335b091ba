#pragma once

#include "shapefind/voxel_grid.h"

#include <cstdint>
#include <vector>

namespace shapefind {

inline constexpr int kThumbnailSize = 256;

/// Orthographic silhouette of a grid viewed along its third axis, shaded by
/// depth, as a grayscale PNG. Deterministic for a given grid.
std::vector<std::uint8_t> render_thumbnail(const VoxelGrid& grid, int size = kThumbnailSize);

} // namespace shapefind
