#include "shapefind/corpus_gen.h"

#include "shapefind/binary_io.h"
#include "shapefind/error.h"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace shapefind {

namespace {

constexpr double kPi = std::numbers::pi;

class IndexedMesh {
public:
    std::uint32_t vertex(const Vec3& p) {
        mesh_.vertices.push_back(p);
        return static_cast<std::uint32_t>(mesh_.vertices.size() - 1);
    }
    void tri(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
        if (a == b || b == c || a == c) return;
        mesh_.triangles.push_back({a, b, c});
    }
    void quad(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d) {
        tri(a, b, c);
        tri(a, c, d);
    }
    void append(const TriangleMesh& other) {
        auto base = static_cast<std::uint32_t>(mesh_.vertices.size());
        mesh_.vertices.insert(mesh_.vertices.end(), other.vertices.begin(), other.vertices.end());
        for (const auto& t : other.triangles) mesh_.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
    }
    /// Flips every triangle if the enclosed signed volume is negative.
    TriangleMesh finish() {
        double volume = 0.0;
        for (std::size_t t = 0; t < mesh_.triangles.size(); ++t)
            volume += mesh_.corner(t, 0).dot(mesh_.corner(t, 1).cross(mesh_.corner(t, 2)));
        if (volume < 0)
            for (auto& t : mesh_.triangles) std::swap(t[1], t[2]);
        return std::move(mesh_);
    }

private:
    TriangleMesh mesh_;
};

// Revolves a profile of (radius, z) points about the z axis. Points with zero
// radius become single pole vertices. Closed profiles join last to first.
TriangleMesh revolve(const std::vector<std::pair<double, double>>& profile, bool closed, int segments) {
    IndexedMesh m;
    std::vector<std::vector<std::uint32_t>> rings;
    for (auto [r, z] : profile) {
        std::vector<std::uint32_t> ring(segments);
        if (r <= 1e-12) {
            auto pole = m.vertex({0.0, 0.0, z});
            std::fill(ring.begin(), ring.end(), pole);
        } else {
            for (int j = 0; j < segments; ++j) {
                double a = 2.0 * kPi * j / segments;
                ring[j] = m.vertex({r * std::cos(a), r * std::sin(a), z});
            }
        }
        rings.push_back(std::move(ring));
    }
    std::size_t n = rings.size();
    std::size_t spans = closed ? n : n - 1;
    for (std::size_t i = 0; i < spans; ++i) {
        const auto& a = rings[i];
        const auto& b = rings[(i + 1) % n];
        for (int j = 0; j < segments; ++j) {
            int k = (j + 1) % segments;
            m.quad(a[j], b[j], b[k], a[k]);
        }
    }
    return m.finish();
}

double smooth_lerp(double a, double b, double t) {
    t = std::clamp(t, 0.0, 1.0);
    t = t * t * (3.0 - 2.0 * t);
    return a + (b - a) * t;
}

// Piecewise smoothstep through (h, r) control points sorted by h.
double profile_radius(const std::vector<std::pair<double, double>>& ctrl, double h) {
    if (h <= ctrl.front().first) return ctrl.front().second;
    for (std::size_t i = 0; i + 1 < ctrl.size(); ++i)
        if (h <= ctrl[i + 1].first)
            return smooth_lerp(ctrl[i].second, ctrl[i + 1].second,
                               (h - ctrl[i].first) / (ctrl[i + 1].first - ctrl[i].first));
    return ctrl.back().second;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

private:
    std::mt19937_64 engine_;
};

} // namespace

TriangleMesh make_box(double x, double y, double z) {
    IndexedMesh m;
    std::uint32_t v[8];
    for (int i = 0; i < 8; ++i)
        v[i] = m.vertex({(i & 1 ? 0.5 : -0.5) * x, (i & 2 ? 0.5 : -0.5) * y, (i & 4 ? 0.5 : -0.5) * z});
    // faces as outward-facing quads
    m.quad(v[0], v[2], v[3], v[1]);  // -z
    m.quad(v[4], v[5], v[7], v[6]);  // +z
    m.quad(v[0], v[1], v[5], v[4]);  // -y
    m.quad(v[2], v[6], v[7], v[3]);  // +y
    m.quad(v[0], v[4], v[6], v[2]);  // -x
    m.quad(v[1], v[3], v[7], v[5]);  // +x
    return m.finish();
}

TriangleMesh make_cube_with_hole(double side, double hole_radius_frac, double hole_depth_frac) {
    constexpr int kSamples = 32;  // divisible by 8 so the square corners are samples
    const double h = side / 2.0;
    const double hole_r = hole_radius_frac * side;
    const double floor_z = side * (1.0 - hole_depth_frac);
    IndexedMesh m;

    std::vector<std::uint32_t> outer(kSamples), rim(kSamples), floor_ring(kSamples);
    for (int k = 0; k < kSamples; ++k) {
        double a = 2.0 * kPi * k / kSamples;
        double c = std::cos(a), s = std::sin(a);
        double t = h / std::max(std::abs(c), std::abs(s));
        Vec3 p(t * c, t * s, side);
        // snap square samples exactly onto the faces
        for (int i = 0; i < 2; ++i)
            if (std::abs(std::abs(p[i]) - h) < 1e-9) p[i] = std::copysign(h, p[i]);
        outer[k] = m.vertex(p);
        rim[k] = m.vertex({hole_r * c, hole_r * s, side});
        floor_ring[k] = m.vertex({hole_r * c, hole_r * s, floor_z});
    }
    auto floor_center = m.vertex({0.0, 0.0, floor_z});

    for (int k = 0; k < kSamples; ++k) {
        int n = (k + 1) % kSamples;
        m.tri(rim[k], outer[k], outer[n]);      // top annulus
        m.tri(rim[k], outer[n], rim[n]);
        m.tri(rim[k], rim[n], floor_ring[n]);    // pocket wall
        m.tri(rim[k], floor_ring[n], floor_ring[k]);
        m.tri(floor_center, floor_ring[k], floor_ring[n]);  // pocket floor
    }

    // Bottom corners in counter-clockwise order starting at angle -135°.
    std::uint32_t bottom[4] = {m.vertex({-h, -h, 0}), m.vertex({h, -h, 0}), m.vertex({h, h, 0}), m.vertex({-h, h, 0})};
    m.tri(bottom[0], bottom[2], bottom[1]);
    m.tri(bottom[0], bottom[3], bottom[2]);

    // Side faces: corner samples sit at k = 4, 12, 20, 28 (45°, 135°, ...).
    const int corner_k[4] = {20, 28, 4, 12};  // above bottom[0..3]
    for (int side_idx = 0; side_idx < 4; ++side_idx) {
        int start = corner_k[side_idx];
        int end = corner_k[(side_idx + 1) % 4];
        std::uint32_t b_start = bottom[side_idx], b_end = bottom[(side_idx + 1) % 4];
        std::vector<std::uint32_t> top;
        for (int k = start;; k = (k + 1) % kSamples) {
            top.push_back(outer[k]);
            if (k == end) break;
        }
        m.tri(b_start, b_end, top.back());
        for (std::size_t i = 0; i + 1 < top.size(); ++i) m.tri(b_start, top[i + 1], top[i]);
    }
    return m.finish();
}

TriangleMesh make_uv_sphere(double radius, int rings, int segments) {
    std::vector<std::pair<double, double>> profile;
    for (int i = 0; i <= rings; ++i) {
        double phi = -kPi / 2 + kPi * i / rings;
        profile.emplace_back(i == 0 || i == rings ? 0.0 : radius * std::cos(phi), radius * std::sin(phi));
    }
    return revolve(profile, false, segments);
}

TriangleMesh make_truncated_sphere(double radius, double cut_frac) {
    const double z_cut = -radius + 2.0 * radius * cut_frac;
    const double phi_cut = std::asin(std::clamp(z_cut / radius, -1.0, 1.0));
    std::vector<std::pair<double, double>> profile;
    profile.emplace_back(0.0, z_cut);
    constexpr int kArc = 28;
    for (int i = 0; i <= kArc; ++i) {
        double phi = phi_cut + (kPi / 2 - phi_cut) * i / kArc;
        profile.emplace_back(i == kArc ? 0.0 : radius * std::cos(phi), i == kArc ? radius : radius * std::sin(phi));
    }
    return revolve(profile, false, 48);
}

TriangleMesh make_cylinder(double radius, double height, int segments) {
    return revolve({{0.0, 0.0}, {radius, 0.0}, {radius, height}, {0.0, height}}, false, segments);
}

TriangleMesh make_torus(double major, double minor, int major_segments, int minor_segments) {
    std::vector<std::pair<double, double>> profile;
    for (int i = 0; i < minor_segments; ++i) {
        double a = 2.0 * kPi * i / minor_segments;
        profile.emplace_back(major + minor * std::cos(a), minor * std::sin(a));
    }
    return revolve(profile, true, major_segments);
}

TriangleMesh make_double_torus(double major, double minor) {
    // Two coplanar rings whose outer equators touch at the origin.
    IndexedMesh m;
    const double offset = major + minor;
    auto ring = make_torus(major, minor);
    m.append(transformed(ring, [&](const Vec3& p) { return Vec3(p.x() - offset, p.y(), p.z()); }));
    m.append(transformed(ring, [&](const Vec3& p) { return Vec3(p.x() + offset, p.y(), p.z()); }));
    return m.finish();
}

TriangleMesh make_vase(double height, double max_radius, double neck_frac, double wall) {
    const std::vector<std::pair<double, double>> ctrl = {
        {0.0, 0.62 * max_radius},
        {0.35 * height, max_radius},
        {0.8 * height, neck_frac * max_radius},
        {height, (neck_frac + 0.5 * (1.0 - neck_frac)) * max_radius},
    };
    constexpr int kRows = 24;
    std::vector<std::pair<double, double>> profile;
    profile.emplace_back(0.0, 0.0);
    for (int i = 0; i <= kRows; ++i) {
        double z = height * i / kRows;
        profile.emplace_back(profile_radius(ctrl, z), z);
    }
    for (int i = kRows; i >= 0; --i) {
        double z = wall + (height - wall) * i / kRows;
        profile.emplace_back(profile_radius(ctrl, z) - wall, z);
    }
    profile.emplace_back(0.0, wall);
    return revolve(profile, false, 48);
}

TriangleMesh make_bowl(double radius, double height_frac, double wall) {
    const double height = height_frac * 2.0 * radius;
    const double foot = 0.35 * radius;
    const double t0 = std::asin(foot / radius);
    constexpr int kRows = 20;
    std::vector<std::pair<double, double>> profile;
    profile.emplace_back(0.0, 0.0);
    for (int i = 0; i <= kRows; ++i) {
        double t = t0 + (kPi / 2 - t0) * i / kRows;
        profile.emplace_back(radius * std::sin(t), height * (1.0 - std::cos(t)) / (1.0 - std::cos(t0)) -
                                                       height * std::cos(t0) / (1.0 - std::cos(t0)) * 0.0);
    }
    // Re-base the outer curve so the foot sits at z = 0 and the rim at `height`.
    const double z0 = profile[1].second, z1 = profile.back().second;
    for (std::size_t i = 1; i < profile.size(); ++i)
        profile[i].second = (profile[i].second - z0) / (z1 - z0) * height;
    const double inner = radius - wall;
    for (int i = kRows; i >= 0; --i) {
        double t = (kPi / 2) * i / kRows;
        double z = wall + (height - wall) * (1.0 - std::cos(t));
        profile.emplace_back(i == 0 ? 0.0 : inner * std::sin(t), z);
    }
    return revolve(profile, false, 48);
}

TriangleMesh make_s_hook(double upper_radius, double lower_radius, double shank, double wire) {
    // Centerline in the xz plane: lower arc, straight shank, upper arc.
    std::vector<Vec3> path;
    constexpr int kArc = 28;
    const double h = shank / 2.0;
    const double sweep = 1.3 * kPi;
    for (int i = kArc; i >= 1; --i) {
        double a = -sweep * i / kArc;  // lower arc around (-lower_radius, -h)
        path.emplace_back(-lower_radius + lower_radius * std::cos(a), 0.0, -h + lower_radius * std::sin(a));
    }
    constexpr int kShank = 6;
    for (int i = 0; i <= kShank; ++i) path.emplace_back(0.0, 0.0, -h + shank * i / kShank);
    for (int i = 1; i <= kArc; ++i) {
        double a = kPi - sweep * i / kArc;  // upper arc around (upper_radius, h)
        path.emplace_back(upper_radius + upper_radius * std::cos(a), 0.0, h + upper_radius * std::sin(a));
    }

    constexpr int kRing = 16;
    IndexedMesh m;
    std::vector<std::vector<std::uint32_t>> rings;
    const Vec3 y_axis(0, 1, 0);
    for (std::size_t i = 0; i < path.size(); ++i) {
        Vec3 tangent = (path[std::min(i + 1, path.size() - 1)] - path[i == 0 ? 0 : i - 1]).normalized();
        Vec3 normal = y_axis.cross(tangent).normalized();
        std::vector<std::uint32_t> ring(kRing);
        for (int j = 0; j < kRing; ++j) {
            double a = 2.0 * kPi * j / kRing;
            ring[j] = m.vertex(path[i] + wire * (std::cos(a) * normal + std::sin(a) * y_axis));
        }
        rings.push_back(std::move(ring));
    }
    for (std::size_t i = 0; i + 1 < rings.size(); ++i)
        for (int j = 0; j < kRing; ++j) {
            int k = (j + 1) % kRing;
            m.quad(rings[i][j], rings[i + 1][j], rings[i + 1][k], rings[i][k]);
        }
    auto start = m.vertex(path.front());
    auto end = m.vertex(path.back());
    for (int j = 0; j < kRing; ++j) {
        int k = (j + 1) % kRing;
        m.tri(start, rings.front()[j], rings.front()[k]);
        m.tri(end, rings.back()[k], rings.back()[j]);
    }
    return m.finish();
}

const std::vector<Family>& all_families() {
    static const std::vector<Family> families = {
        Family::Cube,  Family::Box,         Family::Sphere, Family::Cylinder, Family::Torus,
        Family::DoubleTorus, Family::VaseProfile, Family::Bowl, Family::SHook, Family::FlatPlate,
    };
    return families;
}

std::string family_name(Family f) {
    switch (f) {
    case Family::Cube: return "cube";
    case Family::Box: return "box";
    case Family::Sphere: return "sphere";
    case Family::Cylinder: return "cylinder";
    case Family::Torus: return "torus";
    case Family::DoubleTorus: return "double_torus";
    case Family::VaseProfile: return "vase_profile";
    case Family::Bowl: return "bowl";
    case Family::SHook: return "s_hook";
    case Family::FlatPlate: return "flat_plate";
    }
    return "unknown";
}

std::optional<Family> family_from_name(std::string_view name) {
    for (auto f : all_families())
        if (family_name(f) == name) return f;
    return std::nullopt;
}

namespace {

struct Texts {
    std::vector<std::string> names;
    std::vector<std::string> descriptions;
    std::vector<std::vector<std::string>> tags;
    std::vector<std::string> categories;
};

const Texts& texts_for(Family f) {
    static const Texts cube{
        {"Storage Cube", "Cube Pen Holder", "Desk Cube Organizer", "Pocket Cube", "Cube Tealight Holder"},
        {"A cube with a round pocket on top for pens or small parts.",
         "Cubic desk organizer with a cylindrical cavity.",
         "Simple cube holder, prints without supports."},
        {{"cube", "organizer", "desk"}, {"cube", "pen holder"}, {"cube", "storage", "office"}},
        {"Organization", "Office"}};
    static const Texts box{
        {"Rectangular Block", "Parts Box", "Riser Block", "Brick Spacer", "Stacking Block"},
        {"Solid rectangular block, useful as a spacer or riser.", "Plain cuboid, scale to the size you need.",
         "A sturdy block for leveling furniture."},
        {{"box", "block", "spacer"}, {"cuboid", "riser"}, {"block", "brick"}},
        {"Household", "Tools"}};
    static const Texts sphere{
        {"Ball", "Dome Paperweight", "Sphere Ornament", "Round Knob", "Flat-bottom Sphere"},
        {"A ball with a flat base so it stands on the desk.", "Round dome, heavy when printed with high infill.",
         "Decorative sphere cut flat at the bottom."},
        {{"sphere", "ball"}, {"dome", "paperweight"}, {"sphere", "ornament", "decor"}},
        {"Home Decor", "Art"}};
    static const Texts cylinder{
        {"Cylinder", "Round Spacer", "Pillar", "Dowel", "Puck"},
        {"A plain cylinder.", "Round spacer for shelves and standoffs.", "Solid round column, scale as needed."},
        {{"cylinder", "round"}, {"spacer", "standoff"}, {"pillar", "column"}},
        {"Hand Tools", "Household"}};
    static const Texts torus{
        {"Ring", "Simple Band Ring", "Finger Ring", "Donut Ring", "Plain Ring"},
        {"Plain ring, print in PLA or resin.", "A simple band for everyday wear.", "Round ring with a circular cross section."},
        {{"ring", "jewelry"}, {"band", "ring"}, {"ring", "fashion"}},
        {"Jewelry", "Fashion"}};
    static const Texts double_torus{
        {"Double Ring", "Two-Finger Ring", "Infinity Double Band", "Twin Ring", "Double Finger Ring"},
        {"A ring worn across two fingers.", "Two joined bands for neighbouring fingers.",
         "Statement jewelry piece made of two rings."},
        {{"ring", "jewelry", "double"}, {"jewelry", "two finger"}, {"ring", "statement"}},
        {"Jewelry", "Fashion"}};
    static const Texts vase{
        {"Vase", "Planter", "Flower Pot", "Bud Vase", "Succulent Planter"},
        {"Decorative vase with a narrow neck.", "Planter for succulents and herbs.", "A pot for small plants on the windowsill."},
        {{"vase", "decor", "flower"}, {"planter", "garden"}, {"pot", "plant"}},
        {"Home Decor", "Garden"}};
    static const Texts bowl{
        {"Bowl", "Fruit Bowl", "Key Bowl", "Catch-all Dish", "Snack Bowl"},
        {"Round bowl with a small foot.", "Shallow dish for keys and coins.", "Bowl for fruit or snacks."},
        {{"bowl", "kitchen"}, {"dish", "tray"}, {"bowl", "decor"}},
        {"Kitchen & Dining", "Home Decor"}};
    static const Texts hook{
        {"S Hook", "Closet Hook", "Hanger Hook", "Utility Hook", "Kitchen Rail Hook"},
        {"S-shaped hook for hanging bags or tools.", "Hook for closet rods.", "Hang utensils from a rail."},
        {{"hook", "hanger"}, {"hook", "closet"}, {"s-hook", "utility"}},
        {"Hooks", "Household"}};
    static const Texts plate{
        {"Mounting Plate", "Name Plate", "Coaster", "Tile", "Base Plate"},
        {"Flat plate for mounting electronics.", "A thin flat tile.", "Coaster for cups and mugs."},
        {{"plate", "flat"}, {"tile", "coaster"}, {"plate", "mount"}},
        {"Household", "Tools"}};

    switch (f) {
    case Family::Cube: return cube;
    case Family::Box: return box;
    case Family::Sphere: return sphere;
    case Family::Cylinder: return cylinder;
    case Family::Torus: return torus;
    case Family::DoubleTorus: return double_torus;
    case Family::VaseProfile: return vase;
    case Family::Bowl: return bowl;
    case Family::SHook: return hook;
    case Family::FlatPlate: return plate;
    }
    return cube;
}

TriangleMesh make_family_mesh(Family f, double strat, Rng& rng) {
    const double size = rng.uniform(30.0, 120.0);
    switch (f) {
    case Family::Cube:
        return make_cube_with_hole(size, 0.12 + 0.28 * strat, rng.uniform(0.35, 0.8));
    case Family::Box: {
        double a = 0.3 + 0.55 * strat;
        double b = rng.uniform(0.25, 0.9);
        return make_box(size, size * a, size * a * b);
    }
    case Family::Sphere:
        return make_truncated_sphere(size / 2.0, 0.05 + 0.4 * strat);
    case Family::Cylinder: {
        double aspect = 0.3 + 2.7 * strat;  // height / diameter
        double diameter = size / std::max(1.0, aspect);
        return make_cylinder(diameter / 2.0, diameter * aspect);
    }
    case Family::Torus: {
        double minor_frac = 0.12 + 0.33 * strat;
        double major = size / (2.0 * (1.0 + minor_frac));
        return make_torus(major, major * minor_frac);
    }
    case Family::DoubleTorus: {
        double minor_frac = 0.15 + 0.25 * strat;
        double major = size / (4.0 * (1.0 + minor_frac));
        return make_double_torus(major, major * minor_frac);
    }
    case Family::VaseProfile: {
        double aspect = 1.0 + 1.6 * strat;  // height / max diameter
        double max_r = size / (2.0 * std::max(1.0, aspect));
        return make_vase(2.0 * max_r * aspect, max_r, rng.uniform(0.45, 0.85), std::max(1.2, 0.06 * max_r));
    }
    case Family::Bowl: {
        double r = size / 2.0;
        return make_bowl(r, 0.22 + 0.3 * strat, std::max(1.2, 0.06 * r));
    }
    case Family::SHook: {
        double upper = size * (0.18 + 0.12 * strat);
        double lower = size * (0.3 - 0.12 * strat);
        return make_s_hook(upper, lower, size * rng.uniform(0.2, 0.6), std::max(1.5, size * 0.035));
    }
    case Family::FlatPlate: {
        double a = 0.4 + 0.6 * strat;
        return make_box(size, size * a, std::max(1.5, size * rng.uniform(0.02, 0.06)));
    }
    }
    throw Error(ErrorKind::InvalidArgument, "unknown family");
}

} // namespace

std::vector<GeneratedModel> generate_models(const GenSpec& spec) {
    if (spec.count < 0) throw Error(ErrorKind::InvalidArgument, "gen-corpus: count must be non-negative");
    if (spec.families.empty() && spec.count > 0) throw Error(ErrorKind::InvalidArgument, "gen-corpus: no families");

    static const char* kDesigners[] = {"anvil_works", "layerlines", "pla_smith", "maker_mo", "printpanda", "ocelot3d"};
    static const char* kLicenses[] = {"CC-BY-4.0", "CC-BY-SA-4.0", "CC0-1.0", "CC-BY-NC-4.0"};

    const int family_count = static_cast<int>(spec.families.size());
    std::vector<GeneratedModel> out;
    for (int i = 0; i < spec.count; ++i) {
        const int fam_idx = i % family_count;
        const Family fam = spec.families[fam_idx];
        const int instance = i / family_count;
        const int instances = (spec.count - fam_idx + family_count - 1) / family_count;

        Rng rng(splitmix64(spec.seed ^ splitmix64(static_cast<std::uint64_t>(i))));
        const double strat = (instance + rng.uniform(0.1, 0.9)) / std::max(1, instances);

        GeneratedModel model;
        char id[32];
        std::snprintf(id, sizeof(id), "m%04d", i);
        model.id = id;
        model.family = fam;
        model.mesh = make_family_mesh(fam, strat, rng);

        const auto& t = texts_for(fam);
        model.name = t.names[instance % t.names.size()];
        if (instance >= static_cast<int>(t.names.size())) model.name += " " + std::to_string(instance / t.names.size() + 1);
        std::size_t variant = (instance + fam_idx) % t.descriptions.size();
        model.description = t.descriptions[variant];
        model.tags = t.tags[variant % t.tags.size()];
        model.category = t.categories[instance % t.categories.size()];
        model.designer = kDesigners[rng.index(std::size(kDesigners))];
        model.license = kLicenses[rng.index(std::size(kLicenses))];
        out.push_back(std::move(model));
    }
    return out;
}

void write_corpus(const GenSpec& spec) {
    auto models = generate_models(spec);
    std::error_code ec;
    std::filesystem::create_directories(spec.out_dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + spec.out_dir.string() + ": " + ec.message());
    for (const auto& m : models) {
        auto dir = spec.out_dir / m.id;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
        write_file(dir / "mesh.stl", write_stl_binary(m.mesh));
        nlohmann::ordered_json meta;
        meta["name"] = m.name;
        meta["description"] = m.description;
        meta["tags"] = m.tags;
        meta["category"] = m.category;
        meta["designer"] = m.designer;
        meta["license"] = m.license;
        meta["family"] = family_name(m.family);
        write_text_file(dir / "meta.json", meta.dump(2) + "\n");
    }
}

} // namespace shapefind
