#include "shapefind/features.h"

#include "shapefind/error.h"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace shapefind {

namespace {

// Relative eigenvalue gap below which two principal directions are treated
// as interchangeable.
constexpr double kEigenTieTolerance = 0.15;
constexpr double kRankTolerance = 1e-12;

// Platform-independent uniform double in [0, 1) from a 64-bit engine.
double unit_double(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double projected_range(const PointCloud& points, const Vec3& centroid, const Vec3& dir) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& p : points) {
        double d = dir.dot(p - centroid);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    return hi - lo;
}

// Rotates the pair (a, b) inside its plane to the angle that minimises the
// area of the projected bounding rectangle. Coarse 1 degree scan followed by
// golden-section refinement; the coarse optimum is kept unless refinement
// strictly improves it.
void minimize_planar_box(const PointCloud& points, const Vec3& centroid, Vec3& a, Vec3& b) {
    auto area_at = [&](double theta) {
        double c = std::cos(theta), s = std::sin(theta);
        Vec3 u = c * a + s * b;
        Vec3 v = -s * a + c * b;
        return projected_range(points, centroid, u) * projected_range(points, centroid, v);
    };

    constexpr int kSteps = 90;
    const double step = (std::numbers::pi / 2) / kSteps;
    double best_theta = 0.0;
    double best_area = area_at(0.0);
    for (int k = 1; k < kSteps; ++k) {
        double area = area_at(k * step);
        if (area < best_area * (1.0 - 1e-12)) {
            best_area = area;
            best_theta = k * step;
        }
    }

    constexpr double kInvPhi = 0.6180339887498949;
    double lo = best_theta - step, hi = best_theta + step;
    double x1 = hi - kInvPhi * (hi - lo), x2 = lo + kInvPhi * (hi - lo);
    double f1 = area_at(x1), f2 = area_at(x2);
    for (int it = 0; it < 40; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - kInvPhi * (hi - lo);
            f1 = area_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + kInvPhi * (hi - lo);
            f2 = area_at(x2);
        }
    }
    double refined = 0.5 * (lo + hi);
    if (area_at(refined) < best_area * (1.0 - 1e-9)) best_theta = refined;
    if (best_theta == 0.0) return;

    double c = std::cos(best_theta), s = std::sin(best_theta);
    Vec3 u = c * a + s * b;
    Vec3 v = -s * a + c * b;
    a = u.normalized();
    b = v.normalized();
}

Vec3 orthogonal_to(const Vec3& v) {
    int least = 0;
    for (int i = 1; i < 3; ++i)
        if (std::abs(v[i]) < std::abs(v[least])) least = i;
    Vec3 e = Vec3::Unit(least);
    return (e - v.dot(e) * v).normalized();
}

// Flip each axis so the third moment along it is positive; symmetric
// distributions fall back to making the largest component positive.
void canonicalize_signs(const PointCloud& points, const Vec3& centroid, Mat3& axes) {
    for (int k = 0; k < 3; ++k) {
        Vec3 dir = axes.row(k).transpose();
        double skew = 0.0, scale = 0.0;
        for (const auto& p : points) {
            double d = dir.dot(p - centroid);
            skew += d * d * d;
            scale += std::abs(d * d * d);
        }
        bool flip;
        if (std::abs(skew) > 1e-6 * scale) {
            flip = skew < 0;
        } else {
            int largest = 0;
            for (int i = 1; i < 3; ++i)
                if (std::abs(dir[i]) > std::abs(dir[largest]) + 1e-12) largest = i;
            flip = dir[largest] < 0;
        }
        if (flip) axes.row(k) *= -1.0;
    }
}

// Orders the axes inside [first, last] by descending projected range.
void order_by_extent(const PointCloud& points, const Vec3& centroid, Mat3& axes, int first, int last) {
    std::array<std::pair<double, Vec3>, 3> items;
    int n = last - first + 1;
    for (int i = 0; i < n; ++i) {
        Vec3 dir = axes.row(first + i).transpose();
        items[i] = {projected_range(points, centroid, dir), dir};
    }
    std::stable_sort(items.begin(), items.begin() + n,
                     [](const auto& l, const auto& r) { return l.first > r.first * (1.0 + 1e-9); });
    for (int i = 0; i < n; ++i) axes.row(first + i) = items[i].second.transpose();
}

} // namespace

PointCloud sample_surface(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
    PointCloud out;
    if (mesh.triangles.empty() || count == 0) return out;

    std::vector<double> cumulative(mesh.triangles.size());
    double total = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        total += 0.5 * (mesh.corner(t, 1) - mesh.corner(t, 0)).cross(mesh.corner(t, 2) - mesh.corner(t, 0)).norm();
        cumulative[t] = total;
    }
    if (!(total > 0.0)) return out;

    std::mt19937_64 rng(seed);
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        double pick = unit_double(rng) * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
        std::size_t t = std::min<std::size_t>(it - cumulative.begin(), mesh.triangles.size() - 1);
        double r1 = std::sqrt(unit_double(rng));
        double r2 = unit_double(rng);
        out.push_back((1.0 - r1) * mesh.corner(t, 0) + r1 * (1.0 - r2) * mesh.corner(t, 1) +
                      r1 * r2 * mesh.corner(t, 2));
    }
    return out;
}

namespace {

// Eigen-decomposes `cov`; `points` resolve ties and sign conventions.
PrincipalFrame frame_from_covariance(const Mat3& cov, const Vec3& centroid, const PointCloud& points) {
    PrincipalFrame frame;
    frame.centroid = centroid;

    Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
    // Eigen returns ascending eigenvalues.
    std::array<double, 3> lambda = {solver.eigenvalues()[2], solver.eigenvalues()[1], solver.eigenvalues()[0]};
    Mat3 axes;
    for (int k = 0; k < 3; ++k) axes.row(k) = solver.eigenvectors().col(2 - k).transpose();

    const double top = std::max(lambda[0], 0.0);
    int rank = 0;
    for (double l : lambda)
        if (top > 0.0 && l > kRankTolerance * top) ++rank;

    if (rank == 0) {
        frame.axes = Mat3::Identity();
        frame.rank_deficient = true;
        return frame;
    }
    if (rank < 3) {
        frame.rank_deficient = true;
        frame.ambiguous_order = rank == 2 && lambda[0] - lambda[1] <= kEigenTieTolerance * lambda[0];
        Vec3 e0 = axes.row(0).transpose();
        Vec3 e1 = rank == 2 ? Vec3(axes.row(1).transpose()) : orthogonal_to(e0);
        e1 = (e1 - e1.dot(e0) * e0).normalized();
        axes.row(0) = e0.transpose();
        axes.row(1) = e1.transpose();
        axes.row(2) = e0.cross(e1).transpose();
        canonicalize_signs(points, centroid, axes);
    } else {
        auto tied = [&](int i, int j) { return lambda[i] - lambda[j] <= kEigenTieTolerance * lambda[i]; };
        if (tied(0, 2) || (tied(0, 1) && tied(1, 2))) {
            // Isotropic: start from world axes and sweep planar rotations.
            frame.ambiguous_order = true;
            axes = Mat3::Identity();
            for (int sweep = 0; sweep < 2; ++sweep) {
                for (auto [i, j] : {std::pair{0, 1}, std::pair{1, 2}, std::pair{0, 2}}) {
                    Vec3 a = axes.row(i).transpose(), b = axes.row(j).transpose();
                    minimize_planar_box(points, centroid, a, b);
                    axes.row(i) = a.transpose();
                    axes.row(j) = b.transpose();
                }
            }
            order_by_extent(points, centroid, axes, 0, 2);
        } else if (tied(0, 1) || tied(1, 2)) {
            frame.ambiguous_order = true;
            bool upper = tied(0, 1) && (!tied(1, 2) || lambda[0] - lambda[1] <= lambda[1] - lambda[2]);
            int i = upper ? 0 : 1, j = upper ? 1 : 2;
            Vec3 a = axes.row(i).transpose(), b = axes.row(j).transpose();
            minimize_planar_box(points, centroid, a, b);
            axes.row(i) = a.transpose();
            axes.row(j) = b.transpose();
            order_by_extent(points, centroid, axes, i, j);
        }
        canonicalize_signs(points, centroid, axes);
    }

    if (axes.determinant() < 0) axes.row(2) *= -1.0;
    frame.axes = axes;
    return frame;
}

} // namespace

PrincipalFrame principal_axes(const PointCloud& points) {
    if (points.empty()) throw Error(ErrorKind::InvalidArgument, "principal_axes: empty point set");
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : points) centroid += p;
    centroid /= static_cast<double>(points.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& p : points) {
        Vec3 d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= static_cast<double>(points.size());
    return frame_from_covariance(cov, centroid, points);
}

PrincipalFrame surface_principal_axes(const TriangleMesh& mesh, const PointCloud& samples) {
    if (samples.empty()) throw Error(ErrorKind::InvalidArgument, "surface_principal_axes: empty point set");
    // exact second moments of the surface: for a triangle with corners a, b, c
    // and area A, the integral of x x^T is A/12 (sum v v^T + s s^T), s = a+b+c
    double area = 0.0;
    Vec3 first = Vec3::Zero();
    Mat3 second = Mat3::Zero();
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        Vec3 a = mesh.corner(t, 0), b = mesh.corner(t, 1), c = mesh.corner(t, 2);
        double A = 0.5 * (b - a).cross(c - a).norm();
        if (!(A > 0.0)) continue;
        Vec3 s = a + b + c;
        area += A;
        first += A / 3.0 * s;
        second += A / 12.0 * (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose());
    }
    if (!(area > 0.0)) return principal_axes(samples);
    Vec3 centroid = first / area;
    Mat3 cov = second / area - centroid * centroid.transpose();
    cov = 0.5 * (cov + cov.transpose());
    return frame_from_covariance(cov, centroid, samples);
}

NormalizedExtents normalize_extents(const std::array<double, 3>& extents_mm) {
    for (double e : extents_mm)
        if (!(e > 0.0) || !std::isfinite(e))
            throw Error(ErrorKind::Degenerate, "normalize_extents: extents must be positive and finite");
    double largest = std::max({extents_mm[0], extents_mm[1], extents_mm[2]});
    NormalizedExtents out;
    out.scale_factor = kNormalizedExtent / largest;
    for (int i = 0; i < 3; ++i)
        out.extents[i] = extents_mm[i] == largest ? kNormalizedExtent : extents_mm[i] * out.scale_factor;
    return out;
}

namespace {

template <typename PointRange>
Oabb oabb_in_frame(const PrincipalFrame& frame, const PointRange& points) {
    Oabb box;
    box.frame = frame;
    box.frame_min = Vec3::Constant(std::numeric_limits<double>::infinity());
    box.frame_max = -box.frame_min;
    for (const auto& p : points) {
        Vec3 q = frame.to_frame(p);
        box.frame_min = box.frame_min.cwiseMin(q);
        box.frame_max = box.frame_max.cwiseMax(q);
    }
    Vec3 ext = box.frame_max - box.frame_min;
    box.extents = {ext[0], ext[1], ext[2]};
    std::sort(box.extents.begin(), box.extents.end(), std::greater<>());
    return box;
}

PrincipalFrame axis_aligned_frame(const Aabb& bounds) {
    PrincipalFrame frame;
    frame.centroid = 0.5 * (bounds.min + bounds.max);
    Vec3 ext = bounds.extents();
    std::array<int, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int l, int r) { return ext[l] > ext[r]; });
    for (int k = 0; k < 3; ++k) frame.axes.row(k) = Vec3::Unit(order[k]).transpose();
    if (frame.axes.determinant() < 0) frame.axes.row(2) *= -1.0;
    frame.rank_deficient = true;
    return frame;
}

bool collinear(const PrincipalFrame& frame, const PointCloud& samples) {
    if (!frame.rank_deficient) return false;
    // rank-deficient frames from principal_axes keep planar inputs; only
    // fall back when the spread along the second axis vanishes
    double r0 = projected_range(samples, frame.centroid, frame.axes.row(0).transpose());
    double r1 = projected_range(samples, frame.centroid, frame.axes.row(1).transpose());
    return !(r1 > 1e-9 * r0);
}

std::vector<Vec3, Eigen::aligned_allocator<Vec3>> used_vertices(const TriangleMesh& mesh) {
    std::vector<char> used(mesh.vertices.size(), 0);
    for (const auto& t : mesh.triangles)
        for (auto idx : t) used[idx] = 1;
    PointCloud out;
    for (std::size_t i = 0; i < used.size(); ++i)
        if (used[i]) out.push_back(mesh.vertices[i]);
    return out;
}

} // namespace

Oabb compute_oabb(const TriangleMesh& mesh) {
    auto samples = sample_surface(mesh);
    if (samples.empty()) throw Error(ErrorKind::Degenerate, "compute_oabb: mesh has no surface area");
    auto vertices = used_vertices(mesh);
    auto frame = surface_principal_axes(mesh, samples);
    if (collinear(frame, samples)) {
        Oabb box = oabb_in_frame(axis_aligned_frame(mesh_bounds(mesh)), vertices);
        box.axis_aligned_fallback = true;
        return box;
    }
    return oabb_in_frame(frame, vertices);
}

Oabb compute_oabb(const PointCloud& points) {
    if (points.empty()) throw Error(ErrorKind::Degenerate, "compute_oabb: empty point set");
    auto frame = principal_axes(points);
    if (collinear(frame, points)) {
        Oabb box = oabb_in_frame(axis_aligned_frame(bounds_of(points)), points);
        box.axis_aligned_fallback = true;
        return box;
    }
    return oabb_in_frame(frame, points);
}

std::pair<double, double> compute_ratios(const std::array<double, 3>& e) {
    if (!(e[2] > 0.0)) throw Error(ErrorKind::Degenerate, "compute_ratios: smallest extent is zero (flat object)");
    if (!(e[0] >= e[1] && e[1] >= e[2]) || !std::isfinite(e[0]))
        throw Error(ErrorKind::InvalidArgument, "compute_ratios: extents must be sorted descending");
    return {e[1] / e[0], e[2] / e[1]};
}

} // namespace shapefind
