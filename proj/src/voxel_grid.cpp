#include "shapefind/voxel_grid.h"

#include "shapefind/binary_io.h"
#include "shapefind/error.h"
#include "shapefind/features.h"

#include <algorithm>
#include <cmath>

namespace shapefind {

VoxelGrid::VoxelGrid(Dims dims, double pitch, const Vec3& origin)
    : dims_(dims), pitch_(pitch), origin_(origin),
      cells_(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0) {}

void VoxelGrid::set(int x, int y, int z) { set(index(x, y, z)); }

void VoxelGrid::set(std::size_t linear) {
    if (cells_[linear] == 0) {
        cells_[linear] = 1;
        ++occupied_;
    }
}

std::array<int, 3> VoxelGrid::cell_of(const Vec3& p) const {
    std::array<int, 3> c;
    for (int i = 0; i < 3; ++i) {
        double u = std::floor((p[i] - origin_[i]) / pitch_);
        c[i] = static_cast<int>(std::clamp(u, -1e9, 1e9));
    }
    return c;
}

PointCloud VoxelGrid::occupied_centers() const {
    PointCloud out;
    out.reserve(occupied_);
    for (int z = 0; z < dims_[2]; ++z)
        for (int y = 0; y < dims_[1]; ++y)
            for (int x = 0; x < dims_[0]; ++x)
                if (cells_[index(x, y, z)]) out.push_back(center(x, y, z));
    return out;
}

namespace {

VoxelGrid::Dims grid_dims(const Vec3& extents, double pitch) {
    VoxelGrid::Dims dims;
    for (int i = 0; i < 3; ++i) {
        double cells = std::ceil(extents[i] / pitch - 1e-6);
        dims[i] = static_cast<std::uint16_t>(std::clamp(cells, 1.0, 65535.0));
    }
    return dims;
}

// Separating-axis triangle/box overlap (Akenine-Moller), box given by center
// and half extents, triangle already translated so the box center is at 0.
bool triangle_box_overlap(const Vec3& half, Vec3 v0, Vec3 v1, Vec3 v2) {
    const Vec3 e0 = v1 - v0, e1 = v2 - v1, e2 = v0 - v2;

    auto axis_test = [&](const Vec3& axis) {
        double p0 = axis.dot(v0), p1 = axis.dot(v1), p2 = axis.dot(v2);
        double mn = std::min({p0, p1, p2}), mx = std::max({p0, p1, p2});
        double r = half.x() * std::abs(axis.x()) + half.y() * std::abs(axis.y()) + half.z() * std::abs(axis.z());
        return !(mn > r || mx < -r);
    };

    for (const Vec3& edge : {e0, e1, e2})
        for (int k = 0; k < 3; ++k) {
            Vec3 axis = Vec3::Unit(k).cross(edge);
            if (axis.squaredNorm() == 0.0) continue;
            if (!axis_test(axis)) return false;
        }

    for (int k = 0; k < 3; ++k) {
        double mn = std::min({v0[k], v1[k], v2[k]}), mx = std::max({v0[k], v1[k], v2[k]});
        if (mn > half[k] || mx < -half[k]) return false;
    }

    Vec3 normal = e0.cross(e1);
    if (normal.squaredNorm() == 0.0) return true;  // degenerate: bbox test above suffices
    return axis_test(normal);
}

void fill_shell(VoxelGrid& grid, const TriangleMesh& mesh) {
    const auto& dims = grid.dims();
    // Cells are treated as half-open: the upper face of every cell except the
    // last one along an axis is pulled in slightly so triangles lying exactly
    // on a cell boundary mark only the cell above it.
    constexpr double kShrink = 1e-9;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        Vec3 u[3];
        for (int k = 0; k < 3; ++k) u[k] = (mesh.corner(t, k) - grid.origin()) / grid.pitch();
        std::array<int, 3> lo, hi;
        for (int i = 0; i < 3; ++i) {
            double mn = std::min({u[0][i], u[1][i], u[2][i]});
            double mx = std::max({u[0][i], u[1][i], u[2][i]});
            lo[i] = std::clamp(static_cast<int>(std::floor(mn)), 0, dims[i] - 1);
            hi[i] = std::clamp(static_cast<int>(std::floor(mx)), 0, dims[i] - 1);
        }
        for (int z = lo[2]; z <= hi[2]; ++z)
            for (int y = lo[1]; y <= hi[1]; ++y)
                for (int x = lo[0]; x <= hi[0]; ++x) {
                    if (grid.occupied(x, y, z)) continue;
                    std::array<int, 3> c = {x, y, z};
                    Vec3 bmin, bmax;
                    for (int i = 0; i < 3; ++i) {
                        bmin[i] = c[i];
                        bmax[i] = c[i] + 1 - (c[i] + 1 < dims[i] ? kShrink : 0.0);
                    }
                    // Outermost cells also absorb geometry that strays past the
                    // bounds by rounding.
                    for (int i = 0; i < 3; ++i) {
                        if (c[i] == 0) bmin[i] -= 1e-9;
                        if (c[i] == dims[i] - 1) bmax[i] += 1e-9;
                    }
                    Vec3 center = 0.5 * (bmin + bmax);
                    Vec3 half = 0.5 * (bmax - bmin);
                    if (triangle_box_overlap(half, u[0] - center, u[1] - center, u[2] - center)) grid.set(x, y, z);
                }
    }
}

// Parity fill along z. Ray positions are nudged off the column centers by a
// tiny irrational fraction of the pitch so rays never pass exactly through
// mesh edges or vertices of axis-aligned geometry.
void fill_interior(VoxelGrid& grid, const TriangleMesh& mesh) {
    const auto& dims = grid.dims();
    const double pitch = grid.pitch();
    const Vec3& origin = grid.origin();
    const double nudge_x = pitch * 3.14159265358979e-7;
    const double nudge_y = pitch * 2.71828182845905e-7;

    std::vector<std::vector<std::uint32_t>> columns(static_cast<std::size_t>(dims[0]) * dims[1]);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        double mnx = std::min({mesh.corner(t, 0).x(), mesh.corner(t, 1).x(), mesh.corner(t, 2).x()});
        double mxx = std::max({mesh.corner(t, 0).x(), mesh.corner(t, 1).x(), mesh.corner(t, 2).x()});
        double mny = std::min({mesh.corner(t, 0).y(), mesh.corner(t, 1).y(), mesh.corner(t, 2).y()});
        double mxy = std::max({mesh.corner(t, 0).y(), mesh.corner(t, 1).y(), mesh.corner(t, 2).y()});
        int x0 = std::max(0, static_cast<int>(std::floor((mnx - origin.x() - nudge_x) / pitch - 0.5)));
        int x1 = std::min(dims[0] - 1, static_cast<int>(std::ceil((mxx - origin.x() - nudge_x) / pitch - 0.5)));
        int y0 = std::max(0, static_cast<int>(std::floor((mny - origin.y() - nudge_y) / pitch - 0.5)));
        int y1 = std::min(dims[1] - 1, static_cast<int>(std::ceil((mxy - origin.y() - nudge_y) / pitch - 0.5)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) columns[x + dims[0] * static_cast<std::size_t>(y)].push_back(static_cast<std::uint32_t>(t));
    }

    std::vector<double> hits;
    for (int y = 0; y < dims[1]; ++y)
        for (int x = 0; x < dims[0]; ++x) {
            const auto& tris = columns[x + dims[0] * static_cast<std::size_t>(y)];
            if (tris.empty()) continue;
            const double px = origin.x() + (x + 0.5) * pitch + nudge_x;
            const double py = origin.y() + (y + 0.5) * pitch + nudge_y;
            hits.clear();
            for (auto t : tris) {
                const Vec3 a = mesh.corner(t, 0), b = mesh.corner(t, 1), c = mesh.corner(t, 2);
                double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
                if (det == 0.0) continue;
                double w1 = ((px - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (py - a.y())) / det;
                double w2 = ((b.x() - a.x()) * (py - a.y()) - (px - a.x()) * (b.y() - a.y())) / det;
                double w0 = 1.0 - w1 - w2;
                if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
                hits.push_back(w0 * a.z() + w1 * b.z() + w2 * c.z());
            }
            std::sort(hits.begin(), hits.end());
            for (std::size_t k = 0; k + 1 < hits.size(); k += 2) {
                for (int z = 0; z < dims[2]; ++z) {
                    double cz = origin.z() + (z + 0.5) * pitch;
                    if (cz >= hits[k] && cz <= hits[k + 1]) grid.set(x, y, z);
                }
            }
        }
}

} // namespace

VoxelGrid voxelize(const TriangleMesh& mesh, int target_cells, VoxelFill fill) {
    if (target_cells <= 0) throw Error(ErrorKind::InvalidArgument, "voxelize: target_cells must be positive");
    auto bounds = mesh_bounds(mesh);
    if (bounds.empty()) throw Error(ErrorKind::Degenerate, "voxelize: mesh has no triangles");
    const double pitch = kNormalizedExtent / target_cells;
    VoxelGrid grid(grid_dims(bounds.extents(), pitch), pitch, bounds.min);

    if (fill == VoxelFill::Auto) fill = is_watertight(mesh) ? VoxelFill::Solid : VoxelFill::Shell;
    fill_shell(grid, mesh);
    if (fill == VoxelFill::Solid) fill_interior(grid, mesh);
    return grid;
}

VoxelGrid voxelize_points(const PointCloud& points, int target_cells) {
    if (target_cells <= 0) throw Error(ErrorKind::InvalidArgument, "voxelize_points: target_cells must be positive");
    auto bounds = bounds_of(points);
    if (bounds.empty()) throw Error(ErrorKind::Degenerate, "voxelize_points: no points");
    const double pitch = kNormalizedExtent / target_cells;
    VoxelGrid grid(grid_dims(bounds.extents(), pitch), pitch, bounds.min);
    const auto& dims = grid.dims();
    for (const auto& p : points) {
        auto c = grid.cell_of(p);
        for (int i = 0; i < 3; ++i) c[i] = std::clamp(c[i], 0, dims[i] - 1);
        grid.set(c[0], c[1], c[2]);
    }
    return grid;
}

std::vector<std::uint8_t> encode_vox(const VoxelGrid& grid) {
    ByteWriter out;
    out.bytes(std::string_view("SFVX"));
    out.u16(kVoxFormatVersion);
    for (auto d : grid.dims()) out.u16(d);
    out.f64(grid.pitch());
    for (int i = 0; i < 3; ++i) out.f64(grid.origin()[i]);
    out.u64(grid.occupied_count());

    std::uint8_t byte = 0;
    const std::size_t n = grid.cell_count();
    for (std::size_t i = 0; i < n; ++i) {
        if (grid.occupied(i)) byte |= static_cast<std::uint8_t>(1u << (i % 8));
        if (i % 8 == 7) {
            out.u8(byte);
            byte = 0;
        }
    }
    if (n % 8 != 0) out.u8(byte);
    return out.take();
}

VoxelGrid decode_vox(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes, ".vox");
    if (in.bytes(4) != "SFVX") throw Error(ErrorKind::Parse, ".vox: bad magic");
    auto version = in.u16();
    if (version != kVoxFormatVersion)
        throw Error(ErrorKind::Incompatible, ".vox: unsupported version " + std::to_string(version));
    VoxelGrid::Dims dims;
    for (auto& d : dims) d = in.u16();
    double pitch = in.f64();
    Vec3 origin;
    for (int i = 0; i < 3; ++i) origin[i] = in.f64();
    auto declared = in.u64();
    if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0 || !(pitch > 0.0))
        throw Error(ErrorKind::Parse, ".vox: invalid grid header");

    VoxelGrid grid(dims, pitch, origin);
    const std::size_t n = grid.cell_count();
    auto payload = in.bytes((n + 7) / 8);
    for (std::size_t i = 0; i < n; ++i)
        if (static_cast<std::uint8_t>(payload[i / 8]) & (1u << (i % 8))) grid.set(i);
    if (!in.at_end()) throw Error(ErrorKind::Parse, ".vox: trailing bytes at offset " + std::to_string(in.offset()));
    if (grid.occupied_count() != declared)
        throw Error(ErrorKind::Parse, ".vox: occupied_count mismatch (header " + std::to_string(declared) +
                                          ", bits " + std::to_string(grid.occupied_count()) + ")");
    return grid;
}

void write_vox(const std::filesystem::path& path, const VoxelGrid& grid) { write_file(path, encode_vox(grid)); }

VoxelGrid read_vox(const std::filesystem::path& path) { return decode_vox(read_file(path)); }

} // namespace shapefind
