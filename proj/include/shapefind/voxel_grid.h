#pragma once

#include "shapefind/geometry.h"
#include "shapefind/mesh.h"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace shapefind {

inline constexpr int kDefaultTargetCells = 20;

/// Occupancy grid in normalized model space. Cell (x, y, z) spans
/// [origin + (x, y, z) * pitch, origin + (x + 1, y + 1, z + 1) * pitch).
class VoxelGrid {
public:
    using Dims = std::array<std::uint16_t, 3>;

    VoxelGrid() = default;
    VoxelGrid(Dims dims, double pitch, const Vec3& origin);

    const Dims& dims() const { return dims_; }
    double pitch() const { return pitch_; }
    const Vec3& origin() const { return origin_; }
    std::uint64_t occupied_count() const { return occupied_; }
    std::size_t cell_count() const { return cells_.size(); }
    bool empty() const { return occupied_ == 0; }

    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) + dims_[0] * (static_cast<std::size_t>(y) + dims_[1] * static_cast<std::size_t>(z));
    }
    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && y >= 0 && z >= 0 && x < dims_[0] && y < dims_[1] && z < dims_[2];
    }
    bool occupied(int x, int y, int z) const { return in_bounds(x, y, z) && cells_[index(x, y, z)] != 0; }
    bool occupied(std::size_t linear) const { return cells_[linear] != 0; }
    void set(int x, int y, int z);
    void set(std::size_t linear);

    Vec3 center(int x, int y, int z) const {
        return origin_ + pitch_ * Vec3(x + 0.5, y + 0.5, z + 0.5);
    }
    /// Cell containing `p` with floor semantics; may be out of bounds.
    std::array<int, 3> cell_of(const Vec3& p) const;

    /// Centers of all occupied cells, x fastest.
    PointCloud occupied_centers() const;

    friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

private:
    Dims dims_{0, 0, 0};
    double pitch_ = 1.0;
    Vec3 origin_ = Vec3::Zero();
    std::uint64_t occupied_ = 0;
    std::vector<std::uint8_t> cells_;
};

enum class VoxelFill {
    Auto,   // solid for watertight meshes, shell otherwise
    Shell,  // every cell intersected by a triangle
    Solid,  // shell plus every cell whose center is inside the surface
};

/// Voxelizes a mesh that is already normalized (largest extent 100) and
/// expressed in its principal frame. Pitch is 100 / target_cells; the origin
/// is the minimum corner of the mesh's axis-aligned bounds.
VoxelGrid voxelize(const TriangleMesh& normalized_mesh, int target_cells = kDefaultTargetCells,
                   VoxelFill fill = VoxelFill::Auto);

/// Occupancy of the cells containing the given normalized points.
VoxelGrid voxelize_points(const PointCloud& normalized_points, int target_cells = kDefaultTargetCells);

/// `.vox` encoding: little-endian header {"SFVX", u16 version, 3 x u16 dims,
/// f64 pitch, 3 x f64 origin, u64 occupied_count} followed by the occupancy
/// bits (x fastest, LSB first) zero-padded to a byte boundary.
inline constexpr std::uint16_t kVoxFormatVersion = 1;
std::vector<std::uint8_t> encode_vox(const VoxelGrid& grid);
VoxelGrid decode_vox(std::span<const std::uint8_t> bytes);
void write_vox(const std::filesystem::path& path, const VoxelGrid& grid);
VoxelGrid read_vox(const std::filesystem::path& path);

} // namespace shapefind
