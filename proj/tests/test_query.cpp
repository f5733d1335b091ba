#include "shapefind/error.h"
#include "shapefind/query.h"

#include "sketches.h"
#include "support.h"

#include <catch_amalgamated.hpp>

#include <numbers>
#include <set>

using namespace shapefind;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;
using Strings = std::vector<std::string>;

namespace {

struct Fixture {
    testing::TempDir dir{"query"};
    IngestResult built = testing::build_index(dir.path(), 20, 7);
    IndexBundle& bundle = built.bundle;
    std::vector<GeneratedModel> models = [] {
        GenSpec spec;
        spec.count = 20;
        spec.seed = 7;
        return generate_models(spec);
    }();
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

ArtifactRecord spatial_record(const std::string& id, double r1, double r2) {
    ArtifactRecord r;
    r.id = id;
    r.name = id;
    SpatialFeatures s;
    s.oabb_extents_mm = {100, 100 * r1, 100 * r1 * r2};
    s.r1 = r1;
    s.r2 = r2;
    r.spatial = s;
    return r;
}

IndexBundle synthetic_bundle(const std::vector<ArtifactRecord>& records) {
    IndexBundle b;
    b.catalog = records;
    std::sort(b.catalog.begin(), b.catalog.end(), [](const auto& a, const auto& c) { return a.id < c.id; });
    b.text = TextIndex(text_documents(b.catalog));
    std::vector<RatioEntry> ratios;
    for (const auto& r : b.catalog)
        if (r.spatial) ratios.push_back({r.id, r.spatial->r1, r.spatial->r2});
    b.ratios = RatioIndex(ratios);
    return b;
}

Strings ids_of(const std::vector<SketchResult>& rs) {
    Strings out;
    for (const auto& r : rs) out.push_back(r.id);
    return out;
}

} // namespace

TEST_CASE("sketch wire format parses and round-trips") {
    auto j = nlohmann::json::parse(R"({
        "strokes": [[[0,0,0],[10,0,0],[10,5,0]], [[1,1,1],[2,2,2]]],
        "stroke_radius_mm": 1.5,
        "bases": [{"id": "m0001", "transform": {"rotation": [0,-1,0, 1,0,0, 0,0,1], "translation": [5,6,7]}, "scale": 2.0}],
        "term": "vase", "limit": 10, "offset": 20})");
    auto q = sketch_from_json(j);
    CHECK(q.strokes.size() == 2);
    CHECK(q.strokes[0][2] == Vec3(10, 5, 0));
    CHECK(q.stroke_radius_mm == 1.5);
    REQUIRE(q.bases.size() == 1);
    CHECK(q.bases[0].transform.rotation(0, 1) == -1);
    CHECK(q.bases[0].transform.translation == Vec3(5, 6, 7));
    CHECK(q.bases[0].scale == 2.0);
    CHECK(q.term == std::optional<std::string>("vase"));
    CHECK(q.limit == 10);
    CHECK(q.offset == 20);
    auto again = sketch_from_json(nlohmann::json::parse(sketch_to_json(q).dump()));
    CHECK(sketch_to_json(again) == sketch_to_json(q));
}

TEST_CASE("sketch wire format defaults") {
    auto q = sketch_from_json(nlohmann::json::parse(R"({"strokes": [[[0,0,0],[1,0,0]]]})"));
    CHECK(q.stroke_radius_mm == 2.0);
    CHECK(q.limit == 24);
    CHECK(q.offset == 0);
    CHECK_FALSE(q.term);
}

TEST_CASE("sketch invariants are enforced") {
    auto bad = [](const char* text) { return sketch_from_json(nlohmann::json::parse(text)); };
    CHECK_THROWS_WITH(bad(R"({"strokes": []})"), ContainsSubstring("no strokes"));
    CHECK_THROWS_WITH(bad(R"({"strokes": [[[0,0,0]]]})"), ContainsSubstring("fewer than 2"));
    CHECK_THROWS_WITH(bad(R"({"strokes": [[[0,0,0],[1,0]]]})"), ContainsSubstring("strokes[0][1]"));
    CHECK_THROWS_WITH(bad(R"({"strokes": [[[0,0,0],[1,0,0]]], "limit": 201})"), ContainsSubstring("limit"));
    CHECK_THROWS_WITH(bad(R"({"strokes": [[[0,0,0],[1,0,0]]], "offset": -1})"), ContainsSubstring("offset"));
    CHECK_THROWS_WITH(bad(R"({"strokes": [[[0,0,0],[1,0,0]]], "stroke_radius_mm": 0})"), ContainsSubstring("radius"));
    CHECK_THROWS_WITH(bad(R"({"bases": [{"id": "a", "scale": -1}]})"), ContainsSubstring("scale"));
    CHECK_THROWS_WITH(bad(R"({"bases": [{"id": "a", "transform": {"rotation": [2,0,0,0,1,0,0,0,1]}}]})"),
                      ContainsSubstring("rotation"));
    CHECK_THROWS_AS(bad(R"([1,2])"), Error);
}

TEST_CASE("a straight stroke composes into a tube") {
    auto& f = fixture();
    SketchQuery q;
    q.stroke_radius_mm = 2.0;
    q.strokes = {{Vec3(0, 0, 0), Vec3(100, 0, 0)}};
    auto c = compose_query(q, f.bundle);
    CHECK(c.extents_mm[0] == Approx(104).margin(1e-3));
    CHECK(c.extents_mm[1] == Approx(4).margin(1e-3));
    CHECK(c.extents_mm[2] == Approx(4).margin(1e-3));
    auto box = bounds_of(c.points_mm);
    CHECK(box.extents().x() == Approx(104).margin(1e-3));
    // tube samples are no further apart than half a pitch of the normalized grid
    std::vector<double> xs;
    for (const auto& p : c.points_mm)
        if (std::abs(p.y()) < 1e-6 && std::abs(p.z()) < 1e-6) xs.push_back(p.x());
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 1; i < xs.size(); ++i) CHECK(xs[i] - xs[i - 1] <= 104.0 / 20 / 2 + 1e-9);
}

TEST_CASE("a base model alone composes into its voxel centers in mm") {
    auto& f = fixture();
    const auto& rec = f.bundle.catalog.at(3);
    SketchQuery q;
    q.bases = {{rec.id, RigidTransform::identity(), 1.0}};
    auto c = compose_query(q, f.bundle);
    auto centers = f.bundle.voxel(rec.id)->occupied_centers();
    REQUIRE(c.points_mm.size() == centers.size());
    for (std::size_t i = 0; i < centers.size(); ++i)
        CHECK((c.points_mm[i] - rec.spatial->to_mm(centers[i])).norm() < 1e-9 * rec.spatial->oabb_extents_mm[0] + 1e-3);
}

TEST_CASE("sketching onto a base extends it along the stroke only") {
    auto& f = fixture();
    const auto& rec = f.bundle.catalog.at(6);
    SketchQuery base_only;
    base_only.bases = {{rec.id, RigidTransform::identity(), 1.0}};
    auto base = compose_query(base_only, f.bundle);
    auto bb = bounds_of(base.points_mm);

    SketchQuery with_handle = base_only;
    with_handle.stroke_radius_mm = 1.0;
    Vec3 mid = (bb.min + bb.max) / 2;
    with_handle.strokes = {{Vec3(bb.max.x() - 1, mid.y(), mid.z()), Vec3(bb.max.x() + 30, mid.y(), mid.z())}};
    auto joined = compose_query(with_handle, f.bundle);
    CHECK(joined.points_mm.size() > base.points_mm.size());
    auto jb = bounds_of(joined.points_mm);
    CHECK(jb.max.x() > bb.max.x() + 29);
    CHECK(jb.min.x() == Approx(bb.min.x()).margin(1e-3));
    CHECK(jb.min.y() == Approx(bb.min.y()).margin(1e-3));
    CHECK(jb.max.y() == Approx(bb.max.y()).margin(1e-3));
    CHECK(jb.min.z() == Approx(bb.min.z()).margin(1e-3));
    CHECK(jb.max.z() == Approx(bb.max.z()).margin(1e-3));
}

TEST_CASE("unknown or text-only bases are errors") {
    auto& f = fixture();
    SketchQuery q;
    q.bases = {{"nope", RigidTransform::identity(), 1.0}};
    try {
        compose_query(q, f.bundle);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NotFound);
        CHECK_THAT(e.what(), ContainsSubstring("nope"));
    }
    auto b = synthetic_bundle({spatial_record("a", 1, 1)});
    b.catalog[0].spatial.reset();
    q.bases = {{"a", RigidTransform::identity(), 1.0}};
    CHECK_THROWS_WITH(compose_query(q, b), ContainsSubstring("a"));
}

TEST_CASE("candidate selection intersects text and ratio sets") {
    std::vector<ArtifactRecord> recs;
    for (int i = 0; i < 5; ++i) {
        auto r = spatial_record("cube" + std::to_string(i), 1.0 - 0.01 * i, 1.0 - 0.02 * i);
        r.name = "Cube";
        recs.push_back(r);
    }
    for (int i = 0; i < 5; ++i) {
        auto r = spatial_record("plate" + std::to_string(i), 0.8 + 0.02 * i, 0.05 + 0.01 * i);
        r.name = "Plate";
        recs.push_back(r);
    }
    auto b = synthetic_bundle(recs);
    QueryConfig strict;
    strict.max_widenings = 0;

    SECTION("no term: all cubes, no plates at tau 0.2") {
        auto c = select_candidates(b, std::nullopt, 1.0, 1.0, strict);
        CHECK(c == Strings{"cube0", "cube1", "cube2", "cube3", "cube4"});
    }
    SECTION("a term matching nothing yields nothing") {
        CHECK(select_candidates(b, std::string("teapot"), 1.0, 1.0).empty());
    }
    SECTION("term restricts to its text matches") {
        CHECK(select_candidates(b, std::string("plate"), 1.0, 1.0, strict).empty());
        CHECK(select_candidates(b, std::string("plate"), 0.85, 0.07, strict).size() == 5);
    }
    SECTION("generic and stopword-only terms restrict nothing") {
        CandidateTrace trace;
        auto c = select_candidates(b, std::string("the object"), 1.0, 1.0, strict, &trace);
        CHECK(c.size() == 5);
        CHECK_FALSE(trace.term_applied);
        QueryConfig required = strict;
        required.require_term = true;
        CHECK_THROWS_AS(select_candidates(b, std::string("a model"), 1.0, 1.0, required), Error);
        CHECK_THROWS_AS(select_candidates(b, std::nullopt, 1.0, 1.0, required), Error);
        CHECK(select_candidates(b, std::string("cube"), 1.0, 1.0, required).size() == 5);
    }
}

TEST_CASE("staged widening stops at the first radius that reaches k_min") {
    std::vector<ArtifactRecord> recs;
    for (int i = 0; i < 5; ++i) recs.push_back(spatial_record("near" + std::to_string(i), 0.5 + 0.01 * i, 0.5));
    for (int i = 0; i < 30; ++i) {
        double a = 2 * std::numbers::pi * i / 30;
        recs.push_back(spatial_record("ring" + std::to_string(10 + i), 0.5 + 0.25 * std::cos(a), 0.5 + 0.25 * std::sin(a)));
    }
    for (int i = 0; i < 10; ++i) recs.push_back(spatial_record("far" + std::to_string(i), 0.05 + 0.001 * i, 0.05));
    auto b = synthetic_bundle(recs);
    CandidateTrace trace;
    auto c = select_candidates(b, std::nullopt, 0.5, 0.5, {}, &trace);
    REQUIRE(trace.radii.size() == 2);
    CHECK(trace.radii[0] == 0.2);
    CHECK(trace.radii[1] == Approx(0.3));
    CHECK(trace.sizes == std::vector<std::size_t>{5, 35});
    CHECK(c.size() == 35);

    QueryConfig capped;
    capped.max_widenings = 3;
    capped.k_min = 1000;
    select_candidates(b, std::nullopt, 0.5, 0.5, capped, &trace);
    CHECK(trace.radii.size() == 4);
    for (std::size_t i = 1; i < trace.sizes.size(); ++i) CHECK(trace.sizes[i] >= trace.sizes[i - 1]);
}

TEST_CASE("self-retrieval, scale invariance and result invariants") {
    auto& f = fixture();
    for (int i : {0, 5, 7}) {
        const auto& model = f.models[i];
        auto q = testing::surface_sketch(model.mesh, 1000 + i);
        auto base = search_sketch(q, f.bundle);
        INFO(model.id << " " << family_name(model.family));
        REQUIRE_FALSE(base.results.empty());
        CHECK(base.results[0].id == model.id);
        CHECK(base.results[0].score.avg >= 0.8);

        for (std::size_t k = 0; k < base.results.size(); ++k) {
            const auto& r = base.results[k];
            CHECK(r.rank == static_cast<int>(k + 1));
            if (k) CHECK(base.results[k - 1].score.avg >= r.score.avg);
            CHECK(r.transform.is_proper(1e-9));
            double model_e1 = f.bundle.find(r.id)->spatial->oabb_extents_mm[0];
            CHECK(r.suggested_scale * model_e1 == Approx(base.results[0].suggested_scale *
                                                          f.bundle.find(base.results[0].id)->spatial->oabb_extents_mm[0])
                                                       .epsilon(1e-9));
        }

        auto big = search_sketch(testing::scaled(q, 3.7), f.bundle);
        REQUIRE(ids_of(big.results) == ids_of(base.results));
        for (std::size_t k = 0; k < base.results.size(); ++k) {
            CHECK(big.results[k].score == base.results[k].score);
            CHECK(big.results[k].suggested_scale / base.results[k].suggested_scale == Approx(3.7).epsilon(1e-9));
        }
        for (int a = 0; a < 3; ++a) CHECK(big.sketch_extents_mm[a] == Approx(3.7 * base.sketch_extents_mm[a]).epsilon(1e-9));
    }
}

TEST_CASE("sketch results with a term stay inside the text matches") {
    auto& f = fixture();
    auto q = testing::surface_sketch(f.models[4].mesh, 77, Mat3::Identity(), 1024);
    for (const char* term : {"vase", "ring", "hook", "planter", "cube"}) {
        q.term = term;
        auto s = search_sketch(q, f.bundle);
        std::set<std::string> allowed;
        for (const auto& h : f.bundle.text.match(term)) allowed.insert(h.id);
        for (const auto& r : s.results) CHECK(allowed.count(r.id) == 1);
        CHECK(s.trace.term_applied);
    }
}

TEST_CASE("pagination of sketch results") {
    auto& f = fixture();
    auto q = testing::surface_sketch(f.models[2].mesh, 5, Mat3::Identity(), 1024);
    q.limit = 200;
    auto all = search_sketch(q, f.bundle);
    q.limit = 3;
    q.offset = 2;
    auto page = search_sketch(q, f.bundle);
    CHECK(page.total == all.total);
    REQUIRE(page.results.size() == std::min<std::size_t>(3, all.total - 2));
    for (std::size_t k = 0; k < page.results.size(); ++k) {
        CHECK(page.results[k].id == all.results[k + 2].id);
        CHECK(page.results[k].rank == static_cast<int>(k + 3));
    }
}

TEST_CASE("text search endpoint semantics") {
    auto& f = fixture();
    auto hits = f.bundle.text.match("vase");
    auto r = search_text(f.bundle, "vase", 24, 0);
    REQUIRE(r.size() == hits.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        CHECK(r[i].id == hits[i].id);
        CHECK(r[i].rank == static_cast<int>(i + 1));
    }
    std::vector<TextDocument> docs;
    for (int i = 0; i < 5; ++i) docs.push_back({"d" + std::to_string(i), "knob", {}, "", ""});
    IndexBundle b;
    b.text = TextIndex(docs);
    auto page = search_text(b, "knob", 2, 2);
    REQUIRE(page.size() == 2);
    CHECK(page[0].rank == 3);
    CHECK(page[1].rank == 4);
    CHECK_THROWS_WITH(search_text(b, "the", 2, 0), ContainsSubstring("empty query"));
    CHECK_THROWS_AS(search_text(b, "knob", 0, 0), Error);
    CHECK_THROWS_AS(search_text(b, "knob", 201, 0), Error);
}
