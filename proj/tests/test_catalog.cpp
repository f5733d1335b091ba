#include "shapefind/binary_io.h"
#include "shapefind/catalog.h"
#include "shapefind/corpus_gen.h"
#include "shapefind/error.h"
#include "shapefind/image.h"

#include "support.h"

#include <catch_amalgamated.hpp>

using namespace shapefind;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

IngestConfig fixed_config() {
    IngestConfig c;
    c.created_at = "2026-01-01T00:00:00Z";
    return c;
}

void three_primitives(const fs::path& corpus) {
    testing::write_model(corpus, "box", make_box(40, 20, 10), testing::meta("Desk Box", "Storage", {"box"}));
    testing::write_model(corpus, "ring", make_torus(20, 4), testing::meta("Ring", "Jewelry", {"ring"}));
    testing::write_model(corpus, "vase", make_vase(80, 25, 0.5, 2), testing::meta("Vase", "Home", {"vase"}));
}

std::vector<std::string> list_tree(const fs::path& root) {
    std::vector<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) out.push_back(fs::relative(e.path(), root).string());
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

TEST_CASE("map_category") {
    CategoryMap m;
    m.table = {{"Hand Tools", "tools"}};
    m.identity_default = false;
    CHECK(map_category("Hand Tools", m) == "tools");
    CHECK(map_category("Garden", m) == "uncategorized");
    CHECK(map_category("", m) == "uncategorized");
    CategoryMap identity;
    CHECK(map_category("Garden", identity) == "Garden");
    CHECK(map_category("", identity) == "uncategorized");
}

TEST_CASE("category map file") {
    testing::TempDir dir;
    testing::write_text(dir / "cats.json", R"({"Hand Tools": "tools", "Vases": "home"})");
    auto m = CategoryMap::from_json_file(dir / "cats.json");
    CHECK_FALSE(m.identity_default);
    CHECK(map_category("Vases", m) == "home");
    testing::write_text(dir / "bad.json", R"({"Hand Tools": 3})");
    CHECK_THROWS_AS(CategoryMap::from_json_file(dir / "bad.json"), Error);
}

TEST_CASE("three valid primitives ingest with spatial features") {
    testing::TempDir dir;
    three_primitives(dir / "corpus");
    auto result = ingest_corpus(dir / "corpus", dir / "index", fixed_config());
    CHECK(result.report.summary() == "3 ingested, 3 spatial, 0 text-only");
    CHECK(result.bundle.catalog.size() == 3);
    std::size_t vox = 0;
    for (const auto& e : fs::directory_iterator(dir / "index" / "voxels")) vox += e.path().extension() == ".vox";
    CHECK(vox == 3);

    const auto* box = result.bundle.find("box");
    REQUIRE(box);
    REQUIRE(box->spatial);
    CHECK(box->spatial->oabb_extents_mm[0] == Catch::Approx(40).margin(1e-9));
    CHECK(box->spatial->r1 == box->spatial->oabb_extents_mm[1] / box->spatial->oabb_extents_mm[0]);
    CHECK(box->spatial->r2 == box->spatial->oabb_extents_mm[2] / box->spatial->oabb_extents_mm[1]);
    CHECK(box->mesh_stats.triangle_count == 12);
    CHECK(box->mesh_stats.watertight);
    CHECK(box->category == "Storage");
    for (const auto& r : result.bundle.catalog) {
        const auto& s = *r.spatial;
        CHECK(s.oabb_extents_mm[0] >= s.oabb_extents_mm[1]);
        CHECK(s.oabb_extents_mm[1] >= s.oabb_extents_mm[2]);
        Mat3 a = s.principal_axes;
        CHECK((a * a.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(fs::is_regular_file(dir / "index" / r.mesh_file));
    }
}

TEST_CASE("open and broken meshes") {
    testing::TempDir dir;
    auto corpus = dir / "corpus";
    three_primitives(corpus);
    auto open = make_box(30, 30, 30);
    open.triangles.pop_back();
    testing::write_model(corpus, "open", open, testing::meta("Open Tray", "Storage"));
    testing::write_model(corpus, "broken", make_box(1, 1, 1), testing::meta("Broken Hook", "Tools", {"hook"}));
    testing::write_text(corpus / "broken" / "mesh.stl", "solid nothing\nfacet normal 0 0 1\n");

    SECTION("open meshes stay text-only when configured so") {
        auto config = fixed_config();
        config.open_meshes = OpenMeshPolicy::TextOnly;
        auto result = ingest_corpus(corpus, dir / "index", config);
        CHECK(result.report.summary() == "5 ingested, 3 spatial, 2 text-only");
        CHECK_FALSE(result.bundle.find("open")->spatial);
        CHECK_FALSE(result.bundle.find("broken")->spatial);
        CHECK(result.bundle.text.match("tray").at(0).id == "open");
        CHECK(result.bundle.text.match("hook").at(0).id == "broken");
        CHECK(result.bundle.ratios.size() == 3);
    }
    SECTION("open meshes get shell features by default") {
        auto result = ingest_corpus(corpus, dir / "index", fixed_config());
        CHECK(result.report.summary() == "5 ingested, 4 spatial, 1 text-only");
        const auto* open_rec = result.bundle.find("open");
        REQUIRE(open_rec->spatial);
        CHECK_FALSE(open_rec->spatial->solid);
        CHECK_FALSE(open_rec->mesh_stats.watertight);
    }
}

TEST_CASE("malformed metadata skips the model with a report entry") {
    testing::TempDir dir;
    auto corpus = dir / "corpus";
    three_primitives(corpus);
    testing::write_model(corpus, "bad", make_box(5, 5, 5), testing::meta("x"));
    testing::write_text(corpus / "bad" / "meta.json", "{ name: ");
    testing::write_model(corpus, "noname", make_box(5, 5, 5), nlohmann::json{{"description", "d"}});
    auto result = ingest_corpus(corpus, dir / "index", fixed_config());
    CHECK(result.report.summary() == "3 ingested, 3 spatial, 0 text-only, 2 skipped");
    CHECK(result.bundle.find("bad") == nullptr);
    std::size_t fatal = 0;
    for (const auto& i : result.report.issues) fatal += i.fatal_for_model;
    CHECK(fatal == 2);
}

TEST_CASE("missing corpus and unwritable output are fatal") {
    testing::TempDir dir;
    CHECK_THROWS_AS(ingest_corpus(dir / "nope", dir / "index"), Error);
    three_primitives(dir / "corpus");
    testing::write_text(dir / "file", "x");
    CHECK_THROWS_AS(ingest_corpus(dir / "corpus", dir / "file" / "index", fixed_config()), Error);
}

TEST_CASE("ingestion is deterministic") {
    testing::TempDir dir;
    GenSpec spec;
    spec.count = 12;
    spec.seed = 3;
    spec.out_dir = dir / "corpus";
    write_corpus(spec);
    auto config = fixed_config();
    config.threads = 3;
    auto a = ingest_corpus(dir / "corpus", dir / "a", config);
    config.threads = 1;
    auto b = ingest_corpus(dir / "corpus", dir / "b", config);
    CHECK(a.bundle.catalog == b.bundle.catalog);
    CHECK(a.bundle.build_info == b.bundle.build_info);
    auto files = list_tree(dir / "a");
    CHECK(files == list_tree(dir / "b"));
    for (const auto& f : files)
        if (fs::is_regular_file(dir / "a" / f)) CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
}

TEST_CASE("every category is in the canonical set after ingest") {
    testing::TempDir dir;
    GenSpec spec;
    spec.count = 20;
    spec.out_dir = dir / "corpus";
    write_corpus(spec);
    auto config = fixed_config();
    config.categories.table = {{"Home", "home"}, {"Jewelry", "jewelry"}, {"Tools", "tools"}};
    config.categories.identity_default = false;
    auto result = ingest_corpus(dir / "corpus", dir / "index", config);
    for (const auto& r : result.bundle.catalog) {
        INFO(r.id << " " << r.category);
        CHECK((r.category == "home" || r.category == "jewelry" || r.category == "tools" || r.category == "uncategorized"));
    }
}

TEST_CASE("save then load reproduces the bundle") {
    testing::TempDir dir;
    three_primitives(dir / "corpus");
    auto png = encode_png_gray(8, 8, std::vector<std::uint8_t>(64, 128));
    write_file(dir / "corpus" / "ring" / "thumb.png", png);
    testing::write_text(dir / "corpus" / "vase" / "thumb.png", "not really a png");
    auto built = ingest_corpus(dir / "corpus", dir / "index", fixed_config()).bundle;
    auto loaded = load_bundle(dir / "index");
    CHECK(loaded.catalog == built.catalog);
    CHECK(loaded.build_info == built.build_info);
    CHECK(loaded.text == built.text);
    CHECK(loaded.ratios == built.ratios);
    CHECK(loaded.voxels == built.voxels);
    CHECK(loaded.find("ring")->thumbnail_file == std::optional<std::string>("thumbs/ring.png"));
    CHECK(read_file(dir / "index" / "thumbs" / "ring.png") == png);
    CHECK_FALSE(loaded.find("vase")->thumbnail_file);

    save_bundle(loaded, dir / "copy");
    for (const char* f : {"catalog.json", "text.idx", "ratios.idx", "build.json", "voxels/ring.vox"})
        CHECK(read_file(dir / "copy" / f) == read_file(dir / "index" / f));
}

TEST_CASE("catalog JSON keeps ratios to full precision") {
    ArtifactRecord r;
    r.id = "x";
    r.name = "n";
    r.mesh_file = "meshes/x.stl";
    SpatialFeatures s;
    s.oabb_extents_mm = {3.0, 1.0 / 3.0, 1e-7};
    s.r1 = 1.0 / 9.0;
    s.r2 = 0.1 + 0.2;
    s.voxel_ref = "voxels/x.vox";
    s.principal_axes = Eigen::AngleAxisd(0.3, Vec3(1, 1, 0).normalized()).toRotationMatrix();
    s.centroid = Vec3(1e-3, -2.5, 1.0 / 7.0);
    s.scale = 100.0 / 3.0;
    r.spatial = s;
    r.attribution.designer = "Ada";
    auto back = catalog_from_json(catalog_to_json({r}));
    REQUIRE(back.size() == 1);
    CHECK(back[0] == r);
}

TEST_CASE("load rejects incompatible versions and missing files") {
    testing::TempDir dir;
    three_primitives(dir / "corpus");
    ingest_corpus(dir / "corpus", dir / "index", fixed_config());

    SECTION("newer format version") {
        auto build = nlohmann::json::parse(testing::read_text(dir / "index" / "build.json"));
        build["format_version"] = kBundleFormatVersion + 1;
        testing::write_text(dir / "index" / "build.json", build.dump());
        try {
            load_bundle(dir / "index");
            FAIL("expected an incompatibility error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Incompatible);
        }
    }
    SECTION("deleted voxel file") {
        fs::remove(dir / "index" / "voxels" / "ring.vox");
        CHECK_THROWS_WITH(load_bundle(dir / "index"), ContainsSubstring("ring.vox"));
    }
    SECTION("deleted text index") {
        fs::remove(dir / "index" / "text.idx");
        CHECK_THROWS_WITH(load_bundle(dir / "index"), ContainsSubstring("text.idx"));
    }
}

TEST_CASE("records partition into spatial and text-only") {
    testing::TempDir dir;
    three_primitives(dir / "corpus");
    testing::write_model(dir / "corpus", "t", make_box(1, 1, 1), testing::meta("Text Only"));
    fs::remove(dir / "corpus" / "t" / "mesh.stl");
    auto b = ingest_corpus(dir / "corpus", dir / "index", fixed_config()).bundle;
    for (const auto& r : b.catalog) CHECK((r.spatial.has_value() == (b.voxel(r.id) != nullptr)));
    CHECK(b.find("t")->mesh_file.empty());
    CHECK(b.ratios.size() == 3);
}
