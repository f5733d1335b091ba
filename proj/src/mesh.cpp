#include "shapefind/mesh.h"

#include "shapefind/binary_io.h"
#include "shapefind/error.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

namespace shapefind {

std::uint32_t MeshBuilder::add_vertex(const Vec3& p) {
    std::array<std::int64_t, 3> key;
    for (int i = 0; i < 3; ++i) key[i] = static_cast<std::int64_t>(std::floor(p[i] / tol_));

    for (std::int64_t dx = -1; dx <= 1; ++dx)
        for (std::int64_t dy = -1; dy <= 1; ++dy)
            for (std::int64_t dz = -1; dz <= 1; ++dz) {
                auto it = cells_.find({key[0] + dx, key[1] + dy, key[2] + dz});
                if (it == cells_.end()) continue;
                for (auto idx : it->second) {
                    if ((mesh_.vertices[idx] - p).cwiseAbs().maxCoeff() <= tol_) return idx;
                }
            }

    auto idx = static_cast<std::uint32_t>(mesh_.vertices.size());
    mesh_.vertices.push_back(p);
    cells_[key].push_back(idx);
    return idx;
}

void MeshBuilder::add_triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
    auto ia = add_vertex(a);
    auto ib = add_vertex(b);
    auto ic = add_vertex(c);
    mesh_.triangles.push_back({ia, ib, ic});
}

namespace {

bool all_finite(const Vec3& v) { return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z()); }

std::string_view as_text(std::span<const std::uint8_t> bytes) {
    return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

bool starts_with_solid(std::string_view text) {
    auto pos = text.find_first_not_of(" \t\r\n");
    return pos != std::string_view::npos && text.substr(pos, 5) == "solid";
}

class Tokenizer {
public:
    explicit Tokenizer(std::string_view text) : text_(text) {}

    std::string_view next() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
        auto start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        return text_.substr(start, pos_ - start);
    }
    std::size_t line() const { return line_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

double parse_double(std::string_view tok, std::size_t line, const char* what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
        throw Error(ErrorKind::Parse, std::string(what) + ": invalid number '" + std::string(tok) +
                                          "' at line " + std::to_string(line));
    }
    return v;
}

TriangleMesh parse_stl_ascii(std::string_view text) {
    Tokenizer tok(text);
    MeshBuilder builder;
    if (tok.next() != "solid") throw Error(ErrorKind::Parse, "ASCII STL: missing 'solid'");

    PointCloud loop;
    bool in_loop = false;
    for (auto t = tok.next(); !t.empty(); t = tok.next()) {
        if (t == "vertex") {
            if (!in_loop) throw Error(ErrorKind::Parse, "ASCII STL: vertex outside loop at line " + std::to_string(tok.line()));
            Vec3 p;
            for (int i = 0; i < 3; ++i) p[i] = parse_double(tok.next(), tok.line(), "ASCII STL");
            loop.push_back(p);
        } else if (t == "outer") {
            if (tok.next() != "loop") throw Error(ErrorKind::Parse, "ASCII STL: expected 'loop' at line " + std::to_string(tok.line()));
            in_loop = true;
            loop.clear();
        } else if (t == "endloop") {
            if (!in_loop || loop.size() < 3)
                throw Error(ErrorKind::Parse, "ASCII STL: facet with fewer than 3 vertices at line " + std::to_string(tok.line()));
            for (std::size_t i = 1; i + 1 < loop.size(); ++i) builder.add_triangle(loop[0], loop[i], loop[i + 1]);
            in_loop = false;
        } else if (t == "normal") {
            for (int i = 0; i < 3; ++i) parse_double(tok.next(), tok.line(), "ASCII STL");
        } else if (t == "facet" || t == "endfacet" || t == "endsolid" || t == "solid") {
            // structural keywords
        } else {
            // solid names may contain arbitrary words; anything unexpected
            // inside a loop is an error
            if (in_loop) throw Error(ErrorKind::Parse, "ASCII STL: unexpected token '" + std::string(t) + "' at line " + std::to_string(tok.line()));
        }
    }
    if (in_loop) throw Error(ErrorKind::Parse, "ASCII STL: unterminated loop");
    return builder.take();
}

TriangleMesh parse_stl_binary(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes, "binary STL");
    in.bytes(80);
    auto count = in.u32();
    MeshBuilder builder;
    for (std::uint32_t t = 0; t < count; ++t) {
        std::size_t start = in.offset();
        if (in.remaining() < 50) {
            throw Error(ErrorKind::Parse, "binary STL: truncated triangle " + std::to_string(t) + " of " +
                                              std::to_string(count) + " at byte offset " + std::to_string(start));
        }
        float raw[12];
        auto block = in.bytes(48);
        std::memcpy(raw, block.data(), 48);
        in.u16(); // attribute byte count
        Vec3 corners[3];
        for (int k = 0; k < 3; ++k) {
            corners[k] = Vec3(raw[3 + 3 * k], raw[4 + 3 * k], raw[5 + 3 * k]);
            if (!all_finite(corners[k]))
                throw Error(ErrorKind::Parse, "binary STL: non-finite coordinate at byte offset " + std::to_string(start));
        }
        builder.add_triangle(corners[0], corners[1], corners[2]);
    }
    return builder.take();
}

TriangleMesh parse_stl(std::span<const std::uint8_t> bytes) {
    auto text = as_text(bytes);
    bool binary_size_ok = false;
    if (bytes.size() >= 84) {
        std::uint32_t count;
        std::memcpy(&count, bytes.data() + 80, 4);
        binary_size_ok = bytes.size() >= 84 + 50ull * count;
    }
    if (starts_with_solid(text)) {
        try {
            return parse_stl_ascii(text);
        } catch (const Error&) {
            if (!binary_size_ok) throw;
        }
    }
    if (bytes.size() < 84) {
        throw Error(ErrorKind::Parse, "binary STL: file is " + std::to_string(bytes.size()) +
                                          " bytes, shorter than the 84-byte header");
    }
    return parse_stl_binary(bytes);
}

long resolve_obj_index(std::string_view tok, std::size_t vertex_count, std::size_t line) {
    auto slash = tok.find('/');
    auto head = tok.substr(0, slash);
    long idx = 0;
    auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), idx);
    if (ec != std::errc() || ptr != head.data() + head.size() || idx == 0)
        throw Error(ErrorKind::Parse, "OBJ: bad face index '" + std::string(tok) + "' at line " + std::to_string(line));
    long resolved = idx > 0 ? idx - 1 : static_cast<long>(vertex_count) + idx;
    if (resolved < 0 || resolved >= static_cast<long>(vertex_count))
        throw Error(ErrorKind::Parse, "OBJ: face index " + std::to_string(idx) + " out of range at line " + std::to_string(line));
    return resolved;
}

TriangleMesh parse_obj(std::string_view text) {
    PointCloud raw;
    std::vector<std::array<long, 3>> tris;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        Tokenizer tok(line);
        auto head = tok.next();
        if (head == "v") {
            Vec3 p;
            for (int i = 0; i < 3; ++i) p[i] = parse_double(tok.next(), line_no, "OBJ");
            raw.push_back(p);
        } else if (head == "f") {
            std::vector<long> poly;
            for (auto t = tok.next(); !t.empty(); t = tok.next()) poly.push_back(resolve_obj_index(t, raw.size(), line_no));
            if (poly.size() < 3) throw Error(ErrorKind::Parse, "OBJ: face with fewer than 3 vertices at line " + std::to_string(line_no));
            for (std::size_t i = 1; i + 1 < poly.size(); ++i) tris.push_back({poly[0], poly[i], poly[i + 1]});
        }
    }
    MeshBuilder builder;
    std::vector<std::uint32_t> remap(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) remap[i] = builder.add_vertex(raw[i]);
    for (const auto& t : tris) builder.add_triangle(remap[t[0]], remap[t[1]], remap[t[2]]);
    return builder.take();
}

bool looks_like_obj(std::string_view text) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto start = text.find_first_not_of(" \t", pos);
        if (start == std::string_view::npos) break;
        if (text.substr(start, 2) == "v ") return true;
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return false;
}

} // namespace

MeshFormat format_from_path(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".stl") return MeshFormat::Stl;
    if (ext == ".obj") return MeshFormat::Obj;
    return MeshFormat::Auto;
}

TriangleMesh parse_mesh(std::span<const std::uint8_t> bytes, MeshFormat hint) {
    if (bytes.empty()) throw Error(ErrorKind::Parse, "empty mesh file");
    if (hint == MeshFormat::Auto) {
        auto text = as_text(bytes);
        bool stl_sized = false;
        if (bytes.size() >= 84) {
            std::uint32_t count;
            std::memcpy(&count, bytes.data() + 80, 4);
            stl_sized = bytes.size() == 84 + 50ull * count;
        }
        hint = (!stl_sized && !starts_with_solid(text) && looks_like_obj(text)) ? MeshFormat::Obj : MeshFormat::Stl;
    }
    TriangleMesh mesh = hint == MeshFormat::Obj ? parse_obj(as_text(bytes)) : parse_stl(bytes);
    if (mesh.triangles.empty()) throw Error(ErrorKind::Parse, "mesh contains no triangles");
    return mesh;
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return parse_mesh(bytes, format_from_path(path));
}

std::vector<std::uint8_t> write_stl_binary(const TriangleMesh& mesh) {
    ByteWriter out;
    std::string header(80, '\0');
    std::memcpy(header.data(), "binary STL", 10);
    out.bytes(header);
    out.u32(static_cast<std::uint32_t>(mesh.triangles.size()));
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        Vec3 a = mesh.corner(t, 0), b = mesh.corner(t, 1), c = mesh.corner(t, 2);
        Vec3 n = (b - a).cross(c - a);
        double len = n.norm();
        if (len > 0) n /= len;
        float vals[12] = {float(n.x()), float(n.y()), float(n.z()),
                          float(a.x()), float(a.y()), float(a.z()),
                          float(b.x()), float(b.y()), float(b.z()),
                          float(c.x()), float(c.y()), float(c.z())};
        out.bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(vals), sizeof(vals)));
        out.u16(0);
    }
    return out.take();
}

std::string write_stl_ascii(const TriangleMesh& mesh, const std::string& name) {
    std::ostringstream os;
    os.precision(9);
    os << "solid " << name << "\n";
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        Vec3 a = mesh.corner(t, 0), b = mesh.corner(t, 1), c = mesh.corner(t, 2);
        Vec3 n = (b - a).cross(c - a);
        if (n.norm() > 0) n.normalize();
        os << "  facet normal " << n.x() << ' ' << n.y() << ' ' << n.z() << "\n    outer loop\n";
        for (const auto& p : {a, b, c}) os << "      vertex " << p.x() << ' ' << p.y() << ' ' << p.z() << "\n";
        os << "    endloop\n  endfacet\n";
    }
    os << "endsolid " << name << "\n";
    return os.str();
}

std::string write_obj(const TriangleMesh& mesh) {
    std::ostringstream os;
    os.precision(17);
    for (const auto& v : mesh.vertices) os << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << "\n";
    for (const auto& t : mesh.triangles) os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << "\n";
    return os.str();
}

bool is_watertight(const TriangleMesh& mesh) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            auto a = t[k], b = t[(k + 1) % 3];
            if (a == b) return false;
            ++edges[{std::min(a, b), std::max(a, b)}];
        }
    }
    if (edges.empty()) return false;
    return std::all_of(edges.begin(), edges.end(), [](const auto& e) { return e.second == 2; });
}

MeshValidation validate_mesh(const TriangleMesh& mesh) {
    MeshValidation v;
    if (mesh.triangles.empty()) {
        v.reason = "no triangles";
        return v;
    }
    for (const auto& t : mesh.triangles)
        for (auto idx : t)
            if (idx >= mesh.vertices.size()) {
                v.reason = "triangle references missing vertex";
                return v;
            }
    for (const auto& p : mesh.vertices)
        if (!all_finite(p)) {
            v.reason = "non-finite vertex coordinate";
            return v;
        }
    if (!(surface_area(mesh) > 0.0)) {
        v.reason = "zero surface area";
        return v;
    }
    v.watertight = is_watertight(mesh);
    v.usable = true;
    return v;
}

Aabb mesh_bounds(const TriangleMesh& mesh) {
    Aabb box;
    for (const auto& t : mesh.triangles)
        for (auto idx : t) box.extend(mesh.vertices[idx]);
    return box;
}

double surface_area(const TriangleMesh& mesh) {
    double area = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
        area += 0.5 * (mesh.corner(t, 1) - mesh.corner(t, 0)).cross(mesh.corner(t, 2) - mesh.corner(t, 0)).norm();
    return area;
}

} // namespace shapefind
