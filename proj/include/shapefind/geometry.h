#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <limits>
#include <vector>

namespace shapefind {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using PointCloud = std::vector<Vec3, Eigen::aligned_allocator<Vec3>>;

struct Aabb {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void extend(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    bool empty() const { return !(min.x() <= max.x()); }
    Vec3 extents() const { return empty() ? Vec3::Zero() : Vec3(max - min); }
};

inline Aabb bounds_of(const PointCloud& points) {
    Aabb box;
    for (const auto& p : points) box.extend(p);
    return box;
}

inline std::array<double, 3> to_array(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
inline Vec3 from_array(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

} // namespace shapefind
