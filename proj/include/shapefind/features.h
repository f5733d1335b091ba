#pragma once

#include "shapefind/geometry.h"
#include "shapefind/mesh.h"

#include <array>
#include <cstdint>
#include <utility>

namespace shapefind {

/// Orthonormal frame from principal component analysis. Rows of `axes` are
/// the principal directions ordered by descending variance; the basis is
/// always right-handed.
struct PrincipalFrame {
    Mat3 axes = Mat3::Identity();
    Vec3 centroid = Vec3::Zero();
    /// Covariance rank was below 3; the missing axes were completed
    /// orthogonally (or the frame fell back to world axes).
    bool rank_deficient = false;
    /// Two or more principal variances were (nearly) equal, so the order of
    /// the axes carries no information.
    bool ambiguous_order = false;

    /// World point -> frame coordinates.
    Vec3 to_frame(const Vec3& p) const { return axes * (p - centroid); }
    /// Frame coordinates -> world point.
    Vec3 from_frame(const Vec3& q) const { return centroid + axes.transpose() * q; }
};

inline constexpr std::uint64_t kSurfaceSampleSeed = 0x5F00D;
inline constexpr std::size_t kSurfaceSampleCount = 4096;

/// Uniform, area-weighted samples on the mesh surface. Deterministic for a
/// given mesh and seed on every platform.
PointCloud sample_surface(const TriangleMesh& mesh, std::size_t count = kSurfaceSampleCount,
                          std::uint64_t seed = kSurfaceSampleSeed);

/// Uniformly weighted PCA. Near-degenerate eigenspaces (isotropic clouds such
/// as cubes or spheres) are resolved deterministically by picking the basis
/// inside the eigenspace that minimises the bounding box of the points.
PrincipalFrame principal_axes(const PointCloud& points);

/// PCA of the mesh surface from its exact area-weighted second moments.
/// `samples` (surface points) settle ties and axis signs.
PrincipalFrame surface_principal_axes(const TriangleMesh& mesh, const PointCloud& samples);

struct NormalizedExtents {
    double scale_factor = 1.0;
    std::array<double, 3> extents{};
};

/// Uniform scale that maps the largest extent to 100. Throws Degenerate for
/// non-positive extents.
NormalizedExtents normalize_extents(const std::array<double, 3>& extents_mm);

inline constexpr double kNormalizedExtent = 100.0;

struct Oabb {
    /// Extents along the frame axes sorted descending.
    std::array<double, 3> extents{};
    PrincipalFrame frame;
    /// Projection range per frame axis, in frame order (unsorted).
    Vec3 frame_min = Vec3::Zero();
    Vec3 frame_max = Vec3::Zero();
    /// Covariance was rank < 2 and the box fell back to world axes.
    bool axis_aligned_fallback = false;
};

/// Object-aligned bounding box: PCA over area-weighted surface samples, with
/// extents measured over the mesh vertices in that frame.
Oabb compute_oabb(const TriangleMesh& mesh);

/// OABB of a point cloud (used for sketches).
Oabb compute_oabb(const PointCloud& points);

/// Proportion ratios (e2/e1, e3/e2) of extents sorted descending. Throws
/// Degenerate when e3 is zero or the input is not sorted and positive.
std::pair<double, double> compute_ratios(const std::array<double, 3>& sorted_extents);

} // namespace shapefind
