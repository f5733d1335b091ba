#include "shapefind/shape_match.h"

#include "shapefind/error.h"
#include "shapefind/features.h"

#include <Eigen/SVD>

#include <algorithm>
#include <numeric>
#include <cmath>
#include <limits>

namespace shapefind {

bool RigidTransform::is_proper(double tol) const {
    if (!rotation.allFinite() || !translation.allFinite()) return false;
    if (((rotation.transpose() * rotation) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(rotation.determinant() - 1.0) <= tol;
}

NearestNeighborGrid::NearestNeighborGrid(const PointCloud& points, double cell_size)
    : points_(points), cell_(cell_size) {
    if (points_.empty()) throw Error(ErrorKind::InvalidArgument, "nearest-neighbour grid over an empty point set");
    if (!(cell_ > 0.0)) throw Error(ErrorKind::InvalidArgument, "nearest-neighbour grid cell size must be positive");
    auto box = bounds_of(points_);
    origin_ = box.min;
    Vec3 ext = box.extents();
    for (int i = 0; i < 3; ++i) dims_[i] = static_cast<int>(std::floor(ext[i] / cell_)) + 1;

    const std::size_t cells = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
    std::vector<std::uint32_t> cell_of(points_.size());
    cell_start_.assign(cells + 1, 0);
    for (std::size_t i = 0; i < points_.size(); ++i) {
        std::array<int, 3> c;
        for (int k = 0; k < 3; ++k)
            c[k] = std::clamp(static_cast<int>(std::floor((points_[i][k] - origin_[k]) / cell_)), 0, dims_[k] - 1);
        cell_of[i] = static_cast<std::uint32_t>(c[0] + dims_[0] * (c[1] + static_cast<std::size_t>(dims_[1]) * c[2]));
        ++cell_start_[cell_of[i] + 1];
    }
    for (std::size_t c = 0; c < cells; ++c) cell_start_[c + 1] += cell_start_[c];
    order_.resize(points_.size());
    std::vector<std::uint32_t> cursor(cell_start_.begin(), cell_start_.end() - 1);
    for (std::size_t i = 0; i < points_.size(); ++i) order_[cursor[cell_of[i]]++] = static_cast<std::uint32_t>(i);
}

NearestNeighborGrid::Hit NearestNeighborGrid::nearest(const Vec3& q) const {
    std::array<long, 3> c;
    for (int k = 0; k < 3; ++k)
        c[k] = static_cast<long>(std::clamp(std::floor((q[k] - origin_[k]) / cell_), -1e9, 1e9));

    long r0 = 0;
    for (int k = 0; k < 3; ++k) r0 = std::max({r0, c[k] - (dims_[k] - 1), -c[k]});

    Hit best{0, std::numeric_limits<double>::infinity()};
    auto scan_cell = [&](long x, long y, long z) {
        std::size_t cell = static_cast<std::size_t>(x + dims_[0] * (y + static_cast<long>(dims_[1]) * z));
        for (auto i = cell_start_[cell]; i < cell_start_[cell + 1]; ++i) {
            auto idx = order_[i];
            double d = (points_[idx] - q).squaredNorm();
            if (d < best.squared_distance || (d == best.squared_distance && idx < best.index)) best = {idx, d};
        }
    };

    for (long r = r0;; ++r) {
        long z0 = std::max(c[2] - r, 0L), z1 = std::min(c[2] + r, static_cast<long>(dims_[2] - 1));
        long y0 = std::max(c[1] - r, 0L), y1 = std::min(c[1] + r, static_cast<long>(dims_[1] - 1));
        long x0 = std::max(c[0] - r, 0L), x1 = std::min(c[0] + r, static_cast<long>(dims_[0] - 1));
        for (long z = z0; z <= z1; ++z)
            for (long y = y0; y <= y1; ++y) {
                bool full_row = std::abs(z - c[2]) == r || std::abs(y - c[1]) == r;
                if (full_row) {
                    for (long x = x0; x <= x1; ++x) scan_cell(x, y, z);
                } else {
                    if (c[0] - r >= 0 && c[0] - r < dims_[0]) scan_cell(c[0] - r, y, z);
                    if (r > 0 && c[0] + r >= 0 && c[0] + r < dims_[0]) scan_cell(c[0] + r, y, z);
                }
            }

        // Distance from q to the outside of the scanned block, ignoring faces
        // beyond which the grid has no cells.
        double bound = std::numeric_limits<double>::infinity();
        bool exhausted = true;
        for (int k = 0; k < 3; ++k) {
            if (c[k] - r > 0) {
                bound = std::min(bound, q[k] - (origin_[k] + (c[k] - r) * cell_));
                exhausted = false;
            }
            if (c[k] + r < dims_[k] - 1) {
                bound = std::min(bound, (origin_[k] + (c[k] + r + 1) * cell_) - q[k]);
                exhausted = false;
            }
        }
        if (exhausted) break;
        if (best.squared_distance < std::numeric_limits<double>::infinity() && bound >= 0 &&
            best.squared_distance <= bound * bound)
            break;
    }
    return best;
}

RigidTransform best_rigid_fit(const PointCloud& src, const PointCloud& dst) {
    if (src.size() != dst.size() || src.empty())
        throw Error(ErrorKind::InvalidArgument, "best_rigid_fit: point sets must be non-empty and equal in size");
    const double n = static_cast<double>(src.size());
    Vec3 ms = Vec3::Zero(), md = Vec3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        ms += src[i];
        md += dst[i];
    }
    ms /= n;
    md /= n;
    Mat3 h = Mat3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - ms) * (dst[i] - md).transpose();

    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU(), v = svd.matrixV();
    Mat3 d = Mat3::Identity();
    if ((v * u.transpose()).determinant() < 0) d(2, 2) = -1.0;
    RigidTransform out;
    out.rotation = v * d * u.transpose();
    out.translation = md - out.rotation * ms;
    return out;
}

namespace {

double residual(const PointCloud& source, const NearestNeighborGrid& target, const RigidTransform& t,
                PointCloud* matches) {
    double sum = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
        auto hit = target.nearest(t.apply(source[i]));
        sum += hit.squared_distance;
        if (matches) (*matches)[i] = target.points()[hit.index];
    }
    return std::sqrt(sum / static_cast<double>(source.size()));
}

} // namespace

IcpResult icp_align(const PointCloud& source, const NearestNeighborGrid& target, const RigidTransform& init,
                    const IcpOptions& options) {
    if (source.empty()) throw Error(ErrorKind::InvalidArgument, "icp_align: empty source point set");

    IcpResult result;
    result.transform = init;
    PointCloud matches(source.size());
    PointCloud next_matches(source.size());
    double current = residual(source, target, init, &matches);
    result.rms = current;
    result.rms_history.push_back(current);

    for (int it = 1; it <= options.max_iterations; ++it) {
        result.iterations = it;
        RigidTransform candidate = best_rigid_fit(source, matches);
        double next = residual(source, target, candidate, &next_matches);
        // The least-squares step cannot increase the error in exact
        // arithmetic; a rounding-level increase means the iteration has
        // converged and the previous iterate is kept.
        if (next > current) break;
        result.transform = candidate;
        result.rms = next;
        result.rms_history.push_back(next);
        std::swap(matches, next_matches);
        bool converged = std::abs(current - next) < options.tolerance;
        current = next;
        if (converged) break;
    }
    return result;
}

IcpResult icp_align(const PointCloud& source, const PointCloud& target, const RigidTransform& init,
                    const IcpOptions& options) {
    if (target.empty()) throw Error(ErrorKind::InvalidArgument, "icp_align: empty target point set");
    // Bucket size: about two average point spacings of the target.
    auto box = bounds_of(target);
    double diag = box.extents().norm();
    double cell = diag > 0 ? 2.0 * diag / std::cbrt(static_cast<double>(target.size())) : 1.0;
    NearestNeighborGrid grid(target, cell);
    return icp_align(source, grid, init, options);
}

std::vector<Mat3> sign_flip_starts() {
    std::vector<Mat3> out;
    for (Vec3 d : {Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)}) out.push_back(d.asDiagonal());
    return out;
}

AlignTarget::AlignTarget(const VoxelGrid& grid, double neighbor_cell_pitches)
    : points(grid.occupied_centers()),
      frame(principal_axes(points)),
      neighbors(points, neighbor_cell_pitches * grid.pitch()) {}

AlignResult multi_start_align(const PointCloud& source, const PrincipalFrame& source_frame, const AlignTarget& target,
                              const AlignOptions& options) {
    if (source.empty()) throw Error(ErrorKind::InvalidArgument, "multi_start_align: empty sketch");
    AlignResult best;
    best.rms = std::numeric_limits<double>::infinity();
    const bool permute =
        options.permute_ambiguous && (source_frame.ambiguous_order || target.frame.ambiguous_order);
    auto flips = permute ? signed_permutation_starts() : sign_flip_starts();
    int starts = permute ? static_cast<int>(flips.size()) : std::clamp(options.starts, 1, static_cast<int>(flips.size()));
    std::vector<RigidTransform> inits(starts);
    for (int s = 0; s < starts; ++s) {
        inits[s].rotation = target.frame.axes.transpose() * flips[s] * source_frame.axes;
        inits[s].translation = target.frame.centroid - inits[s].rotation * source_frame.centroid;
    }
    std::vector<int> order(starts);
    std::iota(order.begin(), order.end(), 0);
    if (permute && options.refine_top > 0 && options.refine_top < starts) {
        // screen every permutation with a short ICP run, refine the best few
        IcpOptions quick = options.icp;
        quick.max_iterations = std::min(quick.max_iterations, options.screen_iterations);
        std::vector<double> screened(starts);
        for (int s = 0; s < starts; ++s) {
            auto r = icp_align(source, target.neighbors, inits[s], quick);
            screened[s] = r.rms;
            inits[s] = r.transform;
        }
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return screened[a] < screened[b]; });
        order.resize(options.refine_top);
        std::sort(order.begin(), order.end());
    }
    for (int s : order) {
        auto result = icp_align(source, target.neighbors, inits[s], options.icp);
        if (result.rms < best.rms) {
            best.rms = result.rms;
            best.transform = result.transform;
            best.start_index = s;
        }
        best.per_start.push_back(std::move(result));
    }
    return best;
}

std::vector<Mat3> signed_permutation_starts() {
    auto out = sign_flip_starts();
    const std::array<std::array<int, 3>, 5> perms = {{{0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    for (const auto& perm : perms) {
        Mat3 p = Mat3::Zero();
        for (int i = 0; i < 3; ++i) p(i, perm[i]) = 1.0;
        for (const auto& flip : sign_flip_starts()) {
            Mat3 m = flip * p;
            // odd permutations need an odd number of sign flips to stay proper
            if (m.determinant() < 0) m = -m;
            out.push_back(m);
        }
    }
    return out;
}

AlignResult multi_start_align(const VoxelGrid& sketch, const VoxelGrid& model, const AlignOptions& options) {
    if (sketch.empty() || model.empty()) throw Error(ErrorKind::InvalidArgument, "multi_start_align: empty grid");
    auto source = sketch.occupied_centers();
    AlignTarget target(model, options.neighbor_cell_pitches);
    return multi_start_align(source, principal_axes(source), target, options);
}

std::uint64_t overlap_count(const VoxelGrid& sketch, const VoxelGrid& model, const RigidTransform& transform) {
    std::vector<std::uint8_t> hit(model.cell_count(), 0);
    std::uint64_t count = 0;
    const auto& d = sketch.dims();
    for (int z = 0; z < d[2]; ++z)
        for (int y = 0; y < d[1]; ++y)
            for (int x = 0; x < d[0]; ++x) {
                if (!sketch.occupied(x, y, z)) continue;
                auto c = model.cell_of(transform.apply(sketch.center(x, y, z)));
                if (!model.in_bounds(c[0], c[1], c[2])) continue;
                auto idx = model.index(c[0], c[1], c[2]);
                if (model.occupied(idx) && !hit[idx]) {
                    hit[idx] = 1;
                    ++count;
                }
            }
    return count;
}

MatchScore make_score(std::uint64_t overlap, std::uint64_t sketch_count, std::uint64_t model_count) {
    MatchScore s;
    s.overlap_voxels = overlap;
    s.sketch_norm = sketch_count ? static_cast<double>(overlap) / static_cast<double>(sketch_count) : 0.0;
    s.model_norm = model_count ? static_cast<double>(overlap) / static_cast<double>(model_count) : 0.0;
    s.avg = (s.sketch_norm + s.model_norm) / 2.0;
    return s;
}

MatchScore score(const VoxelGrid& sketch, const VoxelGrid& model, const RigidTransform& transform) {
    return make_score(overlap_count(sketch, model, transform), sketch.occupied_count(), model.occupied_count());
}

} // namespace shapefind
