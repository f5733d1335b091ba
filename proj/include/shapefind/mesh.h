#pragma once

#include "shapefind/geometry.h"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace shapefind {

/// Indexed triangle mesh in millimetres.
struct TriangleMesh {
    PointCloud vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;

    std::size_t triangle_count() const { return triangles.size(); }
    Vec3 corner(std::size_t tri, int k) const { return vertices[triangles[tri][k]]; }
};

enum class MeshFormat { Auto, Stl, Obj };

/// Vertex tolerance used when welding parsed meshes.
inline constexpr double kVertexWeldTolerance = 1e-6;

/// Accumulates triangles while welding vertices that lie within the weld
/// tolerance (Chebyshev distance) of an earlier vertex.
class MeshBuilder {
public:
    explicit MeshBuilder(double tolerance = kVertexWeldTolerance) : tol_(tolerance) {}

    std::uint32_t add_vertex(const Vec3& p);
    void add_triangle(const Vec3& a, const Vec3& b, const Vec3& c);
    void add_triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
        mesh_.triangles.push_back({a, b, c});
    }
    const TriangleMesh& mesh() const { return mesh_; }
    TriangleMesh take() { return std::move(mesh_); }

private:
    struct KeyHash {
        std::size_t operator()(const std::array<std::int64_t, 3>& k) const noexcept {
            std::uint64_t h = 1469598103934665603ull;
            for (auto v : k) h = (h ^ static_cast<std::uint64_t>(v)) * 1099511628211ull;
            return static_cast<std::size_t>(h);
        }
    };

    double tol_;
    TriangleMesh mesh_;
    std::unordered_map<std::array<std::int64_t, 3>, std::vector<std::uint32_t>, KeyHash> cells_;
};

MeshFormat format_from_path(const std::filesystem::path& path);

/// Parses binary/ASCII STL or Wavefront OBJ. Vertices are welded within
/// kVertexWeldTolerance; polygon faces are fan-triangulated. Throws
/// Error(Parse) for malformed or empty input.
TriangleMesh parse_mesh(std::span<const std::uint8_t> bytes, MeshFormat hint = MeshFormat::Auto);
TriangleMesh load_mesh(const std::filesystem::path& path);

std::vector<std::uint8_t> write_stl_binary(const TriangleMesh& mesh);
std::string write_stl_ascii(const TriangleMesh& mesh, const std::string& name = "mesh");
std::string write_obj(const TriangleMesh& mesh);

/// Every undirected edge is shared by exactly two triangles.
bool is_watertight(const TriangleMesh& mesh);

struct MeshValidation {
    bool usable = false;     // may receive spatial features
    bool watertight = false;
    std::string reason;      // why the mesh is unusable, empty otherwise
};

/// Checks only; never modifies the mesh.
MeshValidation validate_mesh(const TriangleMesh& mesh);

Aabb mesh_bounds(const TriangleMesh& mesh);
double surface_area(const TriangleMesh& mesh);

/// Returns a copy with every vertex mapped through `f`.
template <typename F>
TriangleMesh transformed(const TriangleMesh& mesh, F&& f) {
    TriangleMesh out = mesh;
    for (auto& v : out.vertices) v = f(v);
    return out;
}

} // namespace shapefind
