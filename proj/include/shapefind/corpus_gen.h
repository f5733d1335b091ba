#pragma once

#include "shapefind/mesh.h"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace shapefind {

enum class Family {
    Cube,
    Box,
    Sphere,
    Cylinder,
    Torus,
    DoubleTorus,
    VaseProfile,
    Bowl,
    SHook,
    FlatPlate,
};

const std::vector<Family>& all_families();
std::string family_name(Family f);
std::optional<Family> family_from_name(std::string_view name);

struct GenSpec {
    std::uint64_t seed = 7;
    int count = 10;
    std::vector<Family> families = all_families();
    std::filesystem::path out_dir;
};

struct GeneratedModel {
    std::string id;
    Family family;
    TriangleMesh mesh;
    std::string name;
    std::string description;
    std::vector<std::string> tags;
    std::string category;
    std::string designer;
    std::string license;
};

/// Parametric watertight shapes. Dimensions are in millimetres; `u` values
/// are shape parameters in [0, 1] that the generator stratifies per family.
TriangleMesh make_box(double x, double y, double z);
TriangleMesh make_cube_with_hole(double side, double hole_radius_frac, double hole_depth_frac);
TriangleMesh make_truncated_sphere(double radius, double cut_frac);
TriangleMesh make_cylinder(double radius, double height, int segments = 48);
TriangleMesh make_torus(double major, double minor, int major_segments = 48, int minor_segments = 20);
TriangleMesh make_double_torus(double major, double minor);
TriangleMesh make_vase(double height, double max_radius, double neck_frac, double wall);
TriangleMesh make_bowl(double radius, double height_frac, double wall);
TriangleMesh make_s_hook(double upper_radius, double lower_radius, double shank, double wire);
TriangleMesh make_uv_sphere(double radius, int rings = 32, int segments = 48);

/// Generates `count` models deterministically: model i belongs to family
/// families[i % families.size()] and its shape parameters are stratified
/// across the instances of that family.
std::vector<GeneratedModel> generate_models(const GenSpec& spec);

/// Writes `<out_dir>/<id>/mesh.stl` (binary) and `meta.json` per model.
void write_corpus(const GenSpec& spec);

} // namespace shapefind
