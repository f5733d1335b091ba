#include "shapefind/corpus_gen.h"
#include "shapefind/error.h"
#include "shapefind/shape_match.h"

#include "support.h"

#include <catch_amalgamated.hpp>

#include <numbers>
#include <random>
#include <set>

using namespace shapefind;
using Catch::Approx;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, int n, const Vec3& scale) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    PointCloud pts;
    for (int i = 0; i < n; ++i) pts.emplace_back(scale.x() * u(rng), scale.y() * u(rng), scale.z() * u(rng));
    return pts;
}

VoxelGrid solid_block(VoxelGrid::Dims dims, int x0, int y0, int z0, int n) {
    VoxelGrid g(dims, 5.0, Vec3::Zero());
    for (int z = z0; z < z0 + n; ++z)
        for (int y = y0; y < y0 + n; ++y)
            for (int x = x0; x < x0 + n; ++x) g.set(x, y, z);
    return g;
}

/// Overlap by direct enumeration: map every sketch cell, collect distinct
/// occupied model cells in a set.
std::uint64_t enumerate_overlap(const VoxelGrid& s, const VoxelGrid& m, const RigidTransform& t) {
    std::set<std::array<int, 3>> hit;
    for (int z = 0; z < s.dims()[2]; ++z)
        for (int y = 0; y < s.dims()[1]; ++y)
            for (int x = 0; x < s.dims()[0]; ++x) {
                if (!s.occupied(x, y, z)) continue;
                Vec3 p = t.apply(s.center(x, y, z));
                std::array<int, 3> c;
                for (int k = 0; k < 3; ++k) c[k] = static_cast<int>(std::floor((p[k] - m.origin()[k]) / m.pitch()));
                if (m.occupied(c[0], c[1], c[2])) hit.insert(c);
            }
    return hit.size();
}

VoxelGrid grid_of(const TriangleMesh& mesh) { return voxelize(mesh, 20, VoxelFill::Solid); }

} // namespace

TEST_CASE("nearest neighbour grid is exact") {
    std::mt19937_64 rng(21);
    auto pts = random_cloud(rng, 400, Vec3(100, 60, 30));
    NearestNeighborGrid grid(pts, 10.0);
    auto queries = random_cloud(rng, 300, Vec3(300, 200, 100));
    for (const auto& q : queries) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : pts) best = std::min(best, (p - q).squaredNorm());
        CHECK(grid.nearest(q).squared_distance == best);
    }
}

TEST_CASE("ICP fixed points") {
    std::mt19937_64 rng(1);
    auto pts = random_cloud(rng, 200, Vec3(100, 50, 20));
    auto same = icp_align(pts, pts, RigidTransform::identity());
    CHECK(same.rms == 0.0);
    CHECK(same.iterations == 1);
    CHECK(same.transform.rotation.isApprox(Mat3::Identity(), 1e-12));

    Mat3 r = Eigen::AngleAxisd(std::numbers::pi / 6, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    PointCloud rotated;
    for (const auto& p : pts) rotated.push_back(r * p);
    RigidTransform init{r, Vec3::Zero()};
    auto fixed = icp_align(pts, rotated, init);
    CHECK(fixed.rms_history.front() < 1e-12);
    CHECK(fixed.rms < 1e-12);
}

TEST_CASE("ICP recovers a pure translation") {
    std::mt19937_64 rng(2);
    auto pts = random_cloud(rng, 300, Vec3(100, 50, 20));
    Vec3 t(0.75, -0.4, 0.3);
    PointCloud moved;
    for (const auto& p : pts) moved.push_back(p + t);
    auto r = icp_align(pts, moved, RigidTransform::identity());
    CHECK((r.transform.translation - t).norm() < 1e-9);
    CHECK(r.rms < 1e-9);
}

TEST_CASE("ICP residual is non-increasing and rotations stay proper on random pairs") {
    std::mt19937_64 rng(1000);
    std::uniform_int_distribution<int> size(5, 80);
    std::uniform_real_distribution<double> shift(-20, 20);
    for (int trial = 0; trial < 1000; ++trial) {
        auto src = random_cloud(rng, size(rng), Vec3(100, 60, 30));
        auto dst = random_cloud(rng, size(rng), Vec3(80, 80, 40));
        RigidTransform init{testing::random_rotation(rng), Vec3(shift(rng), shift(rng), shift(rng))};
        auto r = icp_align(src, dst, init);
        for (std::size_t i = 1; i < r.rms_history.size(); ++i) REQUIRE(r.rms_history[i] <= r.rms_history[i - 1]);
        REQUIRE(r.transform.is_proper(1e-9));
        REQUIRE(r.rms == r.rms_history.back());
        REQUIRE(r.iterations <= 50);
    }
}

TEST_CASE("ICP on an empty set is an error") {
    PointCloud empty, one = {Vec3(1, 2, 3)};
    CHECK_THROWS_AS(icp_align(empty, one, RigidTransform::identity()), Error);
    CHECK_THROWS_AS(icp_align(one, empty, RigidTransform::identity()), Error);
}

TEST_CASE("best rigid fit recovers a known motion") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 50; ++i) {
        auto src = random_cloud(rng, 30, Vec3(10, 10, 10));
        RigidTransform truth{testing::random_rotation(rng), Vec3(1, -2, 3)};
        PointCloud dst;
        for (const auto& p : src) dst.push_back(truth.apply(p));
        auto fit = best_rigid_fit(src, dst);
        CHECK((fit.rotation - truth.rotation).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((fit.translation - truth.translation).norm() < 1e-9);
    }
}

TEST_CASE("start sets are proper rotations") {
    auto flips = sign_flip_starts();
    REQUIRE(flips.size() == 4);
    CHECK(flips[0] == Mat3::Identity());
    auto perms = signed_permutation_starts();
    REQUIRE(perms.size() == 24);
    for (std::size_t i = 0; i < perms.size(); ++i) {
        CHECK(RigidTransform{perms[i], Vec3::Zero()}.is_proper());
        if (i < 4) CHECK(perms[i] == flips[i]);
        for (std::size_t j = 0; j < i; ++j) CHECK(perms[i] != perms[j]);
    }
}

TEST_CASE("multi-start alignment of a grid with itself") {
    for (const auto& mesh : {make_box(100, 50, 20), make_torus(35, 12), make_vase(100, 30, 0.5, 3)}) {
        auto g = grid_of(mesh);
        auto aligned = multi_start_align(g, g);
        CHECK(aligned.rms < 1e-9);
        CHECK(score(g, g, aligned.transform).avg == 1.0);
    }
}

TEST_CASE("multi-start alignment undoes a 90 degree turn about a principal axis") {
    auto model = grid_of(make_box(100, 60, 30));
    Mat3 r = Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitX()).toRotationMatrix();
    PointCloud rotated;
    for (const auto& p : model.occupied_centers()) rotated.push_back(r * p);
    AlignTarget target(model);
    auto aligned = multi_start_align(rotated, principal_axes(rotated), target);
    CHECK(aligned.rms < model.pitch() / 2);
    // exhaustive oracle over the four sign starts gives the same best residual
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : aligned.per_start) best = std::min(best, r.rms);
    CHECK(aligned.rms == best);
}

TEST_CASE("sphere against sphere aligns from any start") {
    auto g = grid_of(make_uv_sphere(50));
    auto aligned = multi_start_align(g, g);
    for (const auto& r : aligned.per_start) CHECK(r.rms < 1e-6);
}

TEST_CASE("overlap identities") {
    auto g = grid_of(make_cube_with_hole(100, 0.3, 0.6));
    auto same = score(g, g, RigidTransform::identity());
    CHECK(same.overlap_voxels == g.occupied_count());
    CHECK(same.sketch_norm == 1.0);
    CHECK(same.model_norm == 1.0);
    CHECK(same.avg == 1.0);

    RigidTransform far{Mat3::Identity(), Vec3(1000, 0, 0)};
    auto disjoint = score(g, g, far);
    CHECK(disjoint == MatchScore{0, 0.0, 0.0, 0.0});
}

TEST_CASE("nested solid cubes: 10^3 inside 20^3") {
    auto model = solid_block({20, 20, 20}, 0, 0, 0, 20);
    auto sketch = solid_block({20, 20, 20}, 5, 5, 5, 10);
    auto s = score(sketch, model, RigidTransform::identity());
    CHECK(enumerate_overlap(sketch, model, RigidTransform::identity()) == 1000);
    CHECK(s.overlap_voxels == 1000);
    CHECK(s.sketch_norm == 1.0);
    CHECK(s.model_norm == 0.125);
    CHECK(s.avg == 0.5625);
}

TEST_CASE("overlap counts distinct model cells") {
    // two sketch cells at half the model pitch land in the same model cell
    VoxelGrid model({2, 1, 1}, 10.0, Vec3::Zero());
    model.set(0, 0, 0);
    VoxelGrid sketch({2, 1, 1}, 5.0, Vec3::Zero());
    sketch.set(0, 0, 0);
    sketch.set(1, 0, 0);
    auto s = score(sketch, model, RigidTransform::identity());
    CHECK(s.overlap_voxels == 1);
    CHECK(s.sketch_norm == 0.5);
    CHECK(s.model_norm == 1.0);
}

TEST_CASE("overlap agrees with direct enumeration under random motions") {
    std::mt19937_64 rng(8);
    auto model = grid_of(make_torus(35, 12));
    auto sketch = grid_of(make_cylinder(30, 60));
    std::uniform_real_distribution<double> shift(-20, 20);
    for (int i = 0; i < 200; ++i) {
        RigidTransform t{testing::random_rotation(rng), Vec3(50 + shift(rng), 50 + shift(rng), shift(rng))};
        auto s = score(sketch, model, t);
        CHECK(s.overlap_voxels == enumerate_overlap(sketch, model, t));
        CHECK(s.avg == (s.sketch_norm + s.model_norm) / 2.0);
        CHECK(s.sketch_norm >= 0.0);
        CHECK(s.sketch_norm <= 1.0);
        CHECK(s.model_norm >= 0.0);
        CHECK(s.model_norm <= 1.0);
    }
}

TEST_CASE("sketch inside model gives (S, 1, S/M, (1+S/M)/2)") {
    auto model = solid_block({20, 20, 20}, 0, 0, 0, 20);
    auto sketch = solid_block({20, 20, 20}, 2, 3, 4, 7);
    auto s = score(sketch, model, RigidTransform::identity());
    double S = 343, M = 8000;
    CHECK(s.overlap_voxels == 343);
    CHECK(s.sketch_norm == 1.0);
    CHECK(s.model_norm == S / M);
    CHECK(s.avg == (1.0 + S / M) / 2.0);
}
