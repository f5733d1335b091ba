#include "shapefind/binary_io.h"
#include "shapefind/catalog.h"
#include "shapefind/corpus_gen.h"
#include "shapefind/features.h"
#include "shapefind/mesh.h"

#include "support.h"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <set>

using namespace shapefind;
namespace fs = std::filesystem;

namespace {

/// Independent edge-manifold check: every directed edge appears once and its
/// reverse appears once.
bool oriented_closed_manifold(const TriangleMesh& m) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k) ++directed[{t[k], t[(k + 1) % 3]}];
    for (const auto& [e, n] : directed) {
        if (n != 1) return false;
        auto rev = directed.find({e.second, e.first});
        if (rev == directed.end() || rev->second != 1) return false;
    }
    return true;
}

double signed_volume(const TriangleMesh& m) {
    double v = 0;
    for (std::size_t t = 0; t < m.triangle_count(); ++t) v += m.corner(t, 0).dot(m.corner(t, 1).cross(m.corner(t, 2)));
    return v / 6.0;
}

std::map<std::string, std::vector<std::uint8_t>> tree(const fs::path& root) {
    std::map<std::string, std::vector<std::uint8_t>> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
    return out;
}

} // namespace

TEST_CASE("family names round-trip") {
    CHECK(all_families().size() == 10);
    for (auto f : all_families()) CHECK(family_from_name(family_name(f)) == f);
    CHECK_FALSE(family_from_name("blob"));
    CHECK(family_name(Family::DoubleTorus) == "double_torus");
    CHECK(family_name(Family::VaseProfile) == "vase_profile");
}

TEST_CASE("every generated mesh is a closed, outward-oriented manifold") {
    GenSpec spec;
    spec.count = 40;
    spec.seed = 99;
    for (const auto& m : generate_models(spec)) {
        INFO(m.id << " " << family_name(m.family));
        CHECK(oriented_closed_manifold(m.mesh));
        CHECK(is_watertight(m.mesh));
        CHECK(signed_volume(m.mesh) > 0);
        CHECK(validate_mesh(m.mesh).usable);
    }
}

TEST_CASE("double torus is two tori sharing a tangent region") {
    auto m = make_double_torus(20, 5);
    CHECK(oriented_closed_manifold(m));
    auto box = compute_oabb(m);
    CHECK(box.extents[0] == Catch::Approx(4 * 25).epsilon(0.01));
    CHECK(box.extents[1] == Catch::Approx(2 * 25).epsilon(0.01));
    CHECK(box.extents[2] == Catch::Approx(10).epsilon(0.01));
}

TEST_CASE("same generator settings give a byte-identical corpus") {
    testing::TempDir dir;
    GenSpec spec;
    spec.seed = 7;
    spec.count = 10;
    spec.out_dir = dir / "a";
    write_corpus(spec);
    spec.out_dir = dir / "b";
    write_corpus(spec);
    auto a = tree(dir / "a");
    CHECK(a.size() == 20);
    CHECK(a == tree(dir / "b"));
    spec.seed = 8;
    spec.out_dir = dir / "c";
    write_corpus(spec);
    CHECK(a != tree(dir / "c"));
}

TEST_CASE("count 0 gives an empty corpus") {
    testing::TempDir dir;
    GenSpec spec;
    spec.count = 0;
    spec.out_dir = dir / "empty";
    write_corpus(spec);
    CHECK(fs::is_directory(dir / "empty"));
    CHECK(fs::is_empty(dir / "empty"));
}

TEST_CASE("families cycle and names carry synonyms") {
    GenSpec spec;
    spec.count = 30;
    spec.families = {Family::VaseProfile, Family::Torus, Family::SHook};
    auto models = generate_models(spec);
    std::set<std::string> vase_names;
    for (std::size_t i = 0; i < models.size(); ++i) {
        CHECK(models[i].family == spec.families[i % 3]);
        if (models[i].family == Family::VaseProfile) vase_names.insert(models[i].name);
    }
    CHECK(vase_names.size() > 1);
    bool planter_without_vase = false;
    for (const auto& m : models)
        if (m.family == Family::VaseProfile) {
            std::string all = m.name + " " + m.description;
            for (const auto& t : m.tags) all += " " + t;
            std::transform(all.begin(), all.end(), all.begin(), ::tolower);
            if (all.find("planter") != std::string::npos && all.find("vase") == std::string::npos) planter_without_vase = true;
        }
    CHECK(planter_without_vase);
}

TEST_CASE("generated corpus ingests fully spatial") {
    testing::TempDir dir;
    GenSpec spec;
    spec.count = 20;
    spec.seed = 4;
    spec.out_dir = dir / "corpus";
    write_corpus(spec);
    IngestConfig config;
    config.created_at = "x";
    auto result = ingest_corpus(spec.out_dir, dir / "index", config);
    CHECK(result.report.summary() == "20 ingested, 20 spatial, 0 text-only");
}

TEST_CASE("generator proportions spread across the ratio square") {
    GenSpec spec;
    spec.count = 60;
    std::set<std::pair<int, int>> quadrants;
    for (const auto& m : generate_models(spec)) {
        auto [r1, r2] = compute_ratios(compute_oabb(m.mesh).extents);
        CHECK(r1 > 0);
        CHECK(r1 <= 1);
        CHECK(r2 > 0);
        CHECK(r2 <= 1);
        quadrants.insert({r1 > 0.5, r2 > 0.5});
    }
    CHECK(quadrants.size() == 4);
}
