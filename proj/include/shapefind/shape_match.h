#pragma once

#include "shapefind/features.h"
#include "shapefind/geometry.h"
#include "shapefind/voxel_grid.h"

#include <cstdint>
#include <vector>

namespace shapefind {

/// Proper rigid motion p -> rotation * p + translation.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidTransform identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    /// (this * other)(p) == this->apply(other.apply(p))
    RigidTransform operator*(const RigidTransform& other) const {
        return {rotation * other.rotation, rotation * other.translation + translation};
    }
    RigidTransform inverse() const {
        Mat3 rt = rotation.transpose();
        return {rt, -(rt * translation)};
    }
    /// RᵀR = I and det R = +1 within `tol`.
    bool is_proper(double tol = 1e-9) const;
};

/// Exact nearest-neighbour lookup over a fixed point set using a uniform
/// grid of buckets with ring-by-ring expansion.
class NearestNeighborGrid {
public:
    NearestNeighborGrid(const PointCloud& points, double cell_size);

    struct Hit {
        std::uint32_t index;
        double squared_distance;
    };
    Hit nearest(const Vec3& query) const;
    const PointCloud& points() const { return points_; }

private:
    PointCloud points_;
    double cell_;
    Vec3 origin_;
    std::array<int, 3> dims_{};
    std::vector<std::uint32_t> cell_start_;  // CSR offsets, size cells + 1
    std::vector<std::uint32_t> order_;       // point indices grouped by cell
};

struct IcpOptions {
    int max_iterations = 50;
    double tolerance = 1e-4;  // stop once |ΔRMS| falls below this
};

struct IcpResult {
    RigidTransform transform;
    double rms = 0.0;
    int iterations = 0;
    /// RMS after each accepted iterate, starting with the residual at `init`.
    std::vector<double> rms_history;
};

/// Point-to-point ICP with the closed-form least-squares rigid fit (no
/// scaling). The returned iterate is the best one seen; the RMS sequence is
/// non-increasing.
IcpResult icp_align(const PointCloud& source, const PointCloud& target, const RigidTransform& init,
                    const IcpOptions& options = {});
IcpResult icp_align(const PointCloud& source, const NearestNeighborGrid& target, const RigidTransform& init,
                    const IcpOptions& options = {});

/// Least-squares rigid motion mapping src[i] onto dst[i] (Kabsch/Horn).
RigidTransform best_rigid_fit(const PointCloud& src, const PointCloud& dst);

struct AlignOptions {
    IcpOptions icp;
    int starts = 4;                  // proper PCA sign assignments to try, 1..4
    /// When either frame has an ambiguous axis order, also try every proper
    /// signed permutation of the axes (24 starts in total).
    bool permute_ambiguous = true;
    /// Permuted starts are first run for screen_iterations; only the
    /// refine_top lowest residuals are refined to convergence.
    int screen_iterations = 6;
    int refine_top = 4;
    double neighbor_cell_pitches = 2.0;  // NN bucket edge in model pitches
};

struct AlignResult {
    RigidTransform transform;  // sketch space -> model space
    double rms = 0.0;
    int start_index = 0;
    std::vector<IcpResult> per_start;
};

/// Starts from the PCA frame alignment of sketch onto model under each proper
/// sign assignment, refines each with ICP on voxel centers and keeps the
/// lowest residual (earliest start on ties).
AlignResult multi_start_align(const VoxelGrid& sketch, const VoxelGrid& model, const AlignOptions& options = {});

/// A model grid prepared once for repeated alignment: voxel centers, their
/// principal frame and a nearest-neighbour grid over them.
struct AlignTarget {
    AlignTarget(const VoxelGrid& grid, double neighbor_cell_pitches = 2.0);

    PointCloud points;
    PrincipalFrame frame;
    NearestNeighborGrid neighbors;
};

/// Same as above with the sketch's voxel centers and frame supplied.
AlignResult multi_start_align(const PointCloud& source, const PrincipalFrame& source_frame, const AlignTarget& target,
                              const AlignOptions& options = {});

/// Rotations of the four proper sign assignments of the principal axes.
std::vector<Mat3> sign_flip_starts();
/// The 24 proper signed permutation matrices, sign flips of the identity
/// permutation first.
std::vector<Mat3> signed_permutation_starts();

/// Number of distinct occupied model cells hit by transformed sketch voxel
/// centers.
std::uint64_t overlap_count(const VoxelGrid& sketch, const VoxelGrid& model, const RigidTransform& transform);

struct MatchScore {
    std::uint64_t overlap_voxels = 0;
    double sketch_norm = 0.0;
    double model_norm = 0.0;
    double avg = 0.0;

    friend bool operator==(const MatchScore&, const MatchScore&) = default;
};

MatchScore score(const VoxelGrid& sketch, const VoxelGrid& model, const RigidTransform& transform);
MatchScore make_score(std::uint64_t overlap, std::uint64_t sketch_count, std::uint64_t model_count);

} // namespace shapefind
