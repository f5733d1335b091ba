#include "shapefind/corpus_gen.h"
#include "shapefind/error.h"
#include "shapefind/mesh.h"

#include "support.h"

#include <catch_amalgamated.hpp>

#include <algorithm>

using namespace shapefind;
using Catch::Matchers::ContainsSubstring;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

std::vector<std::array<double, 3>> sorted_vertices(const TriangleMesh& m) {
    std::vector<std::array<double, 3>> v;
    for (const auto& p : m.vertices) v.push_back(to_array(p));
    std::sort(v.begin(), v.end());
    return v;
}

const char* kCubeObj = R"(# unit cube, quads
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 4 3 2
f 5 6 7 8
f 1 2 6 5
f 2 3 7 6
f 3 4 8 7
f 4 1 5 8
)";

} // namespace

TEST_CASE("binary STL cube welds to 8 vertices") {
    auto stl = write_stl_binary(make_box(1, 1, 1));
    auto mesh = parse_mesh(stl);
    CHECK(mesh.vertices.size() == 8);
    CHECK(mesh.triangle_count() == 12);
    CHECK(is_watertight(mesh));
}

TEST_CASE("ASCII and binary STL of the same cube agree") {
    auto cube = make_box(1, 1, 1);
    auto from_binary = parse_mesh(write_stl_binary(cube));
    auto from_ascii = parse_mesh(bytes_of(write_stl_ascii(cube)));
    CHECK(from_ascii.triangles == from_binary.triangles);
    CHECK(sorted_vertices(from_ascii) == sorted_vertices(from_binary));
}

TEST_CASE("garbage bytes do not parse") {
    std::vector<std::uint8_t> junk = {0x13, 0x77, 0x02, 0xff, 0x00, 0x41, 0x9c, 0x10, 0x55, 0xee};
    CHECK_THROWS_AS(parse_mesh(junk), Error);
    CHECK_THROWS_AS(parse_mesh(std::vector<std::uint8_t>{}), Error);
}

TEST_CASE("truncated binary STL reports the byte offset") {
    auto stl = write_stl_binary(make_box(2, 3, 4));
    stl.resize(stl.size() - 20);
    try {
        parse_mesh(stl, MeshFormat::Stl);
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK_THAT(e.what(), ContainsSubstring("offset 634"));
    }
}

TEST_CASE("OBJ quads are fan-triangulated") {
    auto mesh = parse_mesh(bytes_of(kCubeObj), MeshFormat::Obj);
    CHECK(mesh.vertices.size() == 8);
    CHECK(mesh.triangle_count() == 12);
    CHECK(is_watertight(mesh));
    auto from_stl = parse_mesh(write_stl_binary(mesh));
    CHECK(sorted_vertices(from_stl) == sorted_vertices(mesh));
}

TEST_CASE("OBJ negative indices and out-of-range faces") {
    CHECK(parse_mesh(bytes_of("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n"), MeshFormat::Obj).triangle_count() == 1);
    CHECK_THROWS_WITH(parse_mesh(bytes_of("v 0 0 0\nv 1 0 0\nf 1 2 7\n"), MeshFormat::Obj),
                      ContainsSubstring("out of range"));
}

TEST_CASE("vertices within the weld tolerance merge") {
    MeshBuilder b;
    auto a = b.add_vertex(Vec3(1, 2, 3));
    auto c = b.add_vertex(Vec3(1 + 5e-7, 2 - 5e-7, 3));
    auto d = b.add_vertex(Vec3(1 + 5e-6, 2, 3));
    CHECK(a == c);
    CHECK(a != d);
}

TEST_CASE("watertightness is an edge-manifold check") {
    auto box = make_box(10, 20, 30);
    CHECK(is_watertight(box));
    auto open = box;
    open.triangles.pop_back();
    CHECK_FALSE(is_watertight(open));
    auto v = validate_mesh(open);
    CHECK(v.usable);
    CHECK_FALSE(v.watertight);
}

TEST_CASE("validation flags unusable meshes without repairing them") {
    TriangleMesh empty;
    CHECK_FALSE(validate_mesh(empty).usable);

    TriangleMesh nan = make_box(1, 1, 1);
    nan.vertices[0].x() = std::nan("");
    auto before = nan.vertices;
    CHECK_FALSE(validate_mesh(nan).usable);
    CHECK(std::isnan(nan.vertices[0].x()));

    TriangleMesh flat;
    flat.vertices = {Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(2, 2, 2)};
    flat.triangles = {{0, 1, 2}};
    CHECK_FALSE(validate_mesh(flat).usable);
}

TEST_CASE("parse, serialize, parse preserves triangles and vertices") {
    for (auto family : all_families()) {
        GenSpec spec;
        spec.count = 1;
        spec.families = {family};
        auto model = generate_models(spec).at(0);
        auto once = parse_mesh(write_stl_binary(model.mesh));
        auto twice = parse_mesh(write_stl_binary(once));
        INFO(family_name(family));
        CHECK(once.triangle_count() == model.mesh.triangle_count());
        CHECK(twice.triangle_count() == once.triangle_count());
        CHECK(sorted_vertices(twice) == sorted_vertices(once));
        auto via_obj = parse_mesh(bytes_of(write_obj(once)), MeshFormat::Obj);
        CHECK(via_obj.triangle_count() == once.triangle_count());
        CHECK(via_obj.vertices.size() == once.vertices.size());
    }
}

TEST_CASE("format detection by extension") {
    CHECK(format_from_path("a/mesh.STL") == MeshFormat::Stl);
    CHECK(format_from_path("mesh.obj") == MeshFormat::Obj);
    CHECK(format_from_path("mesh.ply") == MeshFormat::Auto);
}
