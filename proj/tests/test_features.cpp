#include "shapefind/corpus_gen.h"
#include "shapefind/error.h"
#include "shapefind/features.h"

#include "support.h"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace shapefind;
using Catch::Approx;

namespace {

bool orthonormal_proper(const Mat3& m, double tol = 1e-9) {
    return (m * m.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < tol && std::abs(m.determinant() - 1.0) < tol;
}

Mat3 rot_z(double deg) {
    return Eigen::AngleAxisd(deg * std::numbers::pi / 180.0, Vec3::UnitZ()).toRotationMatrix();
}

PointCloud box_cloud(double x, double y, double z, int n = 6) {
    PointCloud pts;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            for (int k = 0; k <= n; ++k) pts.emplace_back(x * i / n - x / 2, y * j / n - y / 2, z * k / n - z / 2);
    return pts;
}

} // namespace

TEST_CASE("normalize_extents scales the largest extent to 100") {
    auto a = normalize_extents({50, 25, 10});
    CHECK(a.scale_factor == 2.0);
    CHECK(a.extents == std::array<double, 3>{100, 50, 20});
    auto b = normalize_extents({100, 100, 100});
    CHECK(b.scale_factor == 1.0);
    CHECK(b.extents == std::array<double, 3>{100, 100, 100});
    auto c = normalize_extents({0.4, 0.2, 0.1});
    CHECK(c.scale_factor == Approx(250.0).epsilon(1e-12));
    CHECK(c.extents[0] == Approx(100).epsilon(1e-12));
    CHECK(c.extents[1] == Approx(50).epsilon(1e-12));
    CHECK(c.extents[2] == Approx(25).epsilon(1e-12));
    CHECK_THROWS_AS(normalize_extents({1, 0, 1}), Error);
    CHECK_THROWS_AS(normalize_extents({1, -2, 1}), Error);
}

TEST_CASE("compute_ratios divides sorted extents") {
    auto [r1, r2] = compute_ratios({40, 20, 10});
    CHECK(r1 == 0.5);
    CHECK(r2 == 0.5);
    for (double k : {0.01, 1.0, 37.5, 1e6}) CHECK(compute_ratios({k, k, k}) == std::pair{1.0, 1.0});
    CHECK_THROWS_AS(compute_ratios({10, 5, 0}), Error);
    CHECK_THROWS_AS(compute_ratios({5, 10, 1}), Error);
}

TEST_CASE("ratios are invariant under uniform scaling of random boxes") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(1.0, 100.0), s(0.01, 100.0);
    for (int i = 0; i < 200; ++i) {
        std::array<double, 3> e{u(rng), u(rng), u(rng)};
        std::sort(e.begin(), e.end(), std::greater<>());
        double k = s(rng);
        auto base = compute_ratios(e);
        auto scaled = compute_ratios({e[0] * k, e[1] * k, e[2] * k});
        CHECK(std::abs(base.first - scaled.first) <= 1e-12);
        CHECK(std::abs(base.second - scaled.second) <= 1e-12);
    }
}

TEST_CASE("OABB of an axis-aligned box") {
    auto box = compute_oabb(make_box(40, 20, 10));
    CHECK(box.extents[0] == Approx(40).margin(1e-9));
    CHECK(box.extents[1] == Approx(20).margin(1e-9));
    CHECK(box.extents[2] == Approx(10).margin(1e-9));
    CHECK(orthonormal_proper(box.frame.axes));
    // world axes up to sign and permutation
    for (int i = 0; i < 3; ++i) CHECK(box.frame.axes.row(i).cwiseAbs().maxCoeff() == Approx(1.0).margin(1e-9));
}

TEST_CASE("OABB of a rotated box matches the analytic extents") {
    auto mesh = make_box(40, 20, 10);
    Mat3 r = rot_z(30);
    auto rotated = transformed(mesh, [&](const Vec3& p) { return Vec3(r * p + Vec3(5, -3, 2)); });
    auto box = compute_oabb(rotated);
    CHECK(box.extents[0] == Approx(40).margin(1e-3));
    CHECK(box.extents[1] == Approx(20).margin(1e-3));
    CHECK(box.extents[2] == Approx(10).margin(1e-3));
}

TEST_CASE("OABB of a sphere is its diameter within sampling tolerance") {
    auto box = compute_oabb(make_uv_sphere(10));
    for (double e : box.extents) CHECK(e == Approx(20).epsilon(0.02));
}

TEST_CASE("OABB of cubes is the cube itself") {
    for (double side : {1.0, 37.0, 92.9}) {
        auto box = compute_oabb(make_box(side, side, side));
        for (double e : box.extents) CHECK(e == Approx(side).epsilon(1e-9));
        CHECK(box.frame.ambiguous_order);
    }
}

TEST_CASE("ratios are invariant under rigid motion and uniform scale") {
    std::mt19937_64 rng(5);
    std::vector<TriangleMesh> shapes = {make_box(40, 20, 10), make_cylinder(10, 50), make_torus(30, 6),
                                        make_vase(80, 25, 0.5, 2)};
    for (const auto& mesh : shapes) {
        auto base = compute_oabb(mesh);
        auto [b1, b2] = compute_ratios(base.extents);
        for (int i = 0; i < 3; ++i) {
            Mat3 r = testing::random_rotation(rng);
            double k = std::uniform_real_distribution<double>(0.2, 5.0)(rng);
            auto moved = transformed(mesh, [&](const Vec3& p) { return Vec3(k * (r * p) + Vec3(1, 2, 3)); });
            auto [m1, m2] = compute_ratios(compute_oabb(moved).extents);
            CHECK(m1 == Approx(b1).margin(1e-3));
            CHECK(m2 == Approx(b2).margin(1e-3));
        }
    }
}

TEST_CASE("principal axes of an elongated box follow its longest side") {
    auto frame = principal_axes(box_cloud(60, 20, 8));
    CHECK(std::abs(frame.axes.row(0).dot(Vec3::UnitX())) == Approx(1.0).margin(1e-6));
    CHECK(std::abs(frame.axes.row(1).dot(Vec3::UnitY())) == Approx(1.0).margin(1e-6));
    CHECK(orthonormal_proper(frame.axes));
    CHECK_FALSE(frame.ambiguous_order);
}

TEST_CASE("principal axes conjugate under rotation") {
    std::mt19937_64 rng(9);
    auto cloud = box_cloud(60, 30, 10);
    auto base = principal_axes(cloud);
    for (int i = 0; i < 20; ++i) {
        Mat3 r = testing::random_rotation(rng);
        PointCloud moved;
        for (const auto& p : cloud) moved.push_back(r * p);
        auto frame = principal_axes(moved);
        for (int k = 0; k < 3; ++k) {
            Vec3 expected = r * base.axes.row(k).transpose();
            CHECK(std::abs(frame.axes.row(k).dot(expected)) == Approx(1.0).margin(1e-9));
        }
        CHECK(orthonormal_proper(frame.axes));
    }
}

TEST_CASE("principal axes of a cube are orthonormal") {
    auto frame = principal_axes(box_cloud(10, 10, 10));
    CHECK(orthonormal_proper(frame.axes));
    CHECK(frame.ambiguous_order);
}

TEST_CASE("rank-deficient clouds get a completed proper frame") {
    PointCloud line;
    for (int i = 0; i < 10; ++i) line.emplace_back(i, 2.0 * i, 0.0);
    auto frame = principal_axes(line);
    CHECK(frame.rank_deficient);
    CHECK(orthonormal_proper(frame.axes));
    CHECK(std::abs(frame.axes.row(0).dot(Vec3(1, 2, 0).normalized())) == Approx(1.0).margin(1e-9));

    PointCloud plane;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 3; ++j) plane.emplace_back(4.0 * i, j, 0.0);
    auto pf = principal_axes(plane);
    CHECK(pf.rank_deficient);
    CHECK(orthonormal_proper(pf.axes));
    CHECK(std::abs(pf.axes.row(2).dot(Vec3::UnitZ())) == Approx(1.0).margin(1e-9));
}

TEST_CASE("surface sampling is deterministic and stays on the surface") {
    auto mesh = make_box(10, 20, 30);
    auto a = sample_surface(mesh, 500);
    auto b = sample_surface(mesh, 500);
    CHECK(a == b);
    CHECK(sample_surface(mesh, 500, 1) != a);
    for (const auto& p : a) {
        double face = std::min({5 - std::abs(p.x()), 10 - std::abs(p.y()), 15 - std::abs(p.z())});
        CHECK(std::abs(face) < 1e-9);
    }
}
