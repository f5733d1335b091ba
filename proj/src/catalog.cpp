#include "shapefind/catalog.h"

#include "shapefind/binary_io.h"
#include "shapefind/error.h"
#include "shapefind/features.h"
#include "shapefind/hashing.h"
#include "shapefind/image.h"
#include "shapefind/mesh.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <iostream>
#include <mutex>
#include <thread>

namespace shapefind {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------- categories

CategoryMap CategoryMap::from_json_file(const fs::path& path) {
    CategoryMap m;
    m.identity_default = false;
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::Config, path.string() + ": expected an object of source -> canonical");
    for (auto& [k, v] : j.items()) {
        if (!v.is_string()) throw Error(ErrorKind::Config, path.string() + ": value for \"" + k + "\" is not a string");
        m.table[k] = v.get<std::string>();
    }
    return m;
}

std::string map_category(const std::string& source, const CategoryMap& mapping) {
    if (source.empty()) return kUncategorized;
    auto it = mapping.table.find(source);
    if (it != mapping.table.end()) return it->second.empty() ? kUncategorized : it->second;
    return mapping.identity_default ? source : kUncategorized;
}

// ---------------------------------------------------------------- json

namespace {

template <typename T>
std::optional<T> opt(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}

ordered_json vec_json(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::Parse, "expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

} // namespace

ordered_json record_to_json(const ArtifactRecord& r) {
    ordered_json j;
    j["id"] = r.id;
    j["name"] = r.name;
    j["description"] = r.description;
    j["tags"] = r.tags;
    j["category"] = r.category;
    ordered_json a = ordered_json::object();
    if (r.attribution.origin_url) a["origin_url"] = *r.attribution.origin_url;
    if (r.attribution.designer) a["designer"] = *r.attribution.designer;
    if (r.attribution.license) a["license"] = *r.attribution.license;
    j["attribution"] = a;
    j["mesh_file"] = r.mesh_file;
    j["thumbnail_file"] = r.thumbnail_file ? ordered_json(*r.thumbnail_file) : ordered_json(nullptr);
    j["mesh_stats"] = {{"extents_mm", r.mesh_stats.extents_mm},
                       {"triangle_count", r.mesh_stats.triangle_count},
                       {"watertight", r.mesh_stats.watertight}};
    if (r.spatial) {
        const auto& s = *r.spatial;
        ordered_json axes = ordered_json::array();
        for (int i = 0; i < 3; ++i) axes.push_back(vec_json(s.principal_axes.row(i).transpose()));
        j["spatial"] = {{"oabb_extents_mm", s.oabb_extents_mm},
                        {"ratios", {s.r1, s.r2}},
                        {"voxel_ref", s.voxel_ref},
                        {"principal_frame", axes},
                        {"centroid_mm", vec_json(s.centroid)},
                        {"scale", s.scale},
                        {"flat", s.flat},
                        {"solid", s.solid}};
    } else {
        j["spatial"] = nullptr;
    }
    return j;
}

ArtifactRecord record_from_json(const json& j) {
    ArtifactRecord r;
    try {
        r.id = j.at("id").get<std::string>();
        r.name = j.at("name").get<std::string>();
        r.description = j.at("description").get<std::string>();
        r.tags = j.at("tags").get<std::vector<std::string>>();
        r.category = j.at("category").get<std::string>();
        const auto& a = j.at("attribution");
        r.attribution.origin_url = opt<std::string>(a, "origin_url");
        r.attribution.designer = opt<std::string>(a, "designer");
        r.attribution.license = opt<std::string>(a, "license");
        r.mesh_file = j.at("mesh_file").get<std::string>();
        r.thumbnail_file = opt<std::string>(j, "thumbnail_file");
        const auto& ms = j.at("mesh_stats");
        r.mesh_stats.extents_mm = ms.at("extents_mm").get<std::array<double, 3>>();
        r.mesh_stats.triangle_count = ms.at("triangle_count").get<std::uint64_t>();
        r.mesh_stats.watertight = ms.at("watertight").get<bool>();
        const auto& sp = j.at("spatial");
        if (!sp.is_null()) {
            SpatialFeatures s;
            s.oabb_extents_mm = sp.at("oabb_extents_mm").get<std::array<double, 3>>();
            auto ratios = sp.at("ratios").get<std::array<double, 2>>();
            s.r1 = ratios[0];
            s.r2 = ratios[1];
            s.voxel_ref = sp.at("voxel_ref").get<std::string>();
            const auto& axes = sp.at("principal_frame");
            if (!axes.is_array() || axes.size() != 3) throw Error(ErrorKind::Parse, "principal_frame needs 3 axes");
            for (int i = 0; i < 3; ++i) s.principal_axes.row(i) = vec_from(axes[i]).transpose();
            s.centroid = vec_from(sp.at("centroid_mm"));
            s.scale = sp.at("scale").get<double>();
            s.flat = sp.at("flat").get<bool>();
            s.solid = sp.at("solid").get<bool>();
            r.spatial = s;
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, "catalog record: " + std::string(e.what()));
    }
    return r;
}

std::string catalog_to_json(const std::vector<ArtifactRecord>& catalog) {
    ordered_json j;
    j["format_version"] = kBundleFormatVersion;
    j["records"] = ordered_json::array();
    for (const auto& r : catalog) j["records"].push_back(record_to_json(r));
    return j.dump(1) + "\n";
}

std::vector<ArtifactRecord> catalog_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, "catalog.json: " + std::string(e.what()));
    }
    if (!j.is_object() || !j.contains("records")) throw Error(ErrorKind::Parse, "catalog.json: missing records");
    auto version = j.value("format_version", -1);
    if (version != kBundleFormatVersion)
        throw Error(ErrorKind::Incompatible, "catalog.json: format version " + std::to_string(version) +
                                                 ", expected " + std::to_string(kBundleFormatVersion));
    std::vector<ArtifactRecord> out;
    for (const auto& r : j.at("records")) out.push_back(record_from_json(r));
    return out;
}

std::string build_info_to_json(const BuildInfo& b) {
    ordered_json j;
    j["format_version"] = b.format_version;
    j["created_at"] = b.created_at;
    j["corpus_hash"] = b.corpus_hash;
    j["weights"] = {{"name", b.weights.name},
                    {"tags", b.weights.tags},
                    {"description", b.weights.description},
                    {"category", b.weights.category}};
    j["voxel_fill"] = b.voxel_fill;
    j["target_cells"] = b.target_cells;
    return j.dump(2) + "\n";
}

BuildInfo build_info_from_json(const std::string& text) {
    BuildInfo b;
    try {
        auto j = json::parse(text);
        b.format_version = j.at("format_version").get<int>();
        if (b.format_version != kBundleFormatVersion)
            throw Error(ErrorKind::Incompatible, "index format version " + std::to_string(b.format_version) +
                                                     " is not supported (expected " +
                                                     std::to_string(kBundleFormatVersion) + ")");
        b.created_at = j.at("created_at").get<std::string>();
        b.corpus_hash = j.at("corpus_hash").get<std::string>();
        const auto& w = j.at("weights");
        b.weights = {w.at("name").get<double>(), w.at("tags").get<double>(), w.at("description").get<double>(),
                     w.at("category").get<double>()};
        b.voxel_fill = j.at("voxel_fill").get<std::string>();
        b.target_cells = j.at("target_cells").get<int>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, "build.json: " + std::string(e.what()));
    }
    return b;
}

std::vector<TextDocument> text_documents(const std::vector<ArtifactRecord>& catalog) {
    std::vector<TextDocument> docs;
    docs.reserve(catalog.size());
    for (const auto& r : catalog) docs.push_back({r.id, r.name, r.tags, r.description, r.category});
    return docs;
}

const ArtifactRecord* IndexBundle::find(std::string_view id) const {
    auto it = std::lower_bound(catalog.begin(), catalog.end(), id,
                               [](const ArtifactRecord& r, std::string_view v) { return r.id < v; });
    return it != catalog.end() && it->id == id ? &*it : nullptr;
}

const VoxelGrid* IndexBundle::voxel(std::string_view id) const {
    auto it = voxels.find(id);
    return it == voxels.end() ? nullptr : &it->second;
}

std::string IngestReport::summary() const {
    std::string s = std::to_string(ingested) + " ingested, " + std::to_string(spatial) + " spatial, " +
                    std::to_string(text_only) + " text-only";
    if (skipped) s += ", " + std::to_string(skipped) + " skipped";
    return s;
}

// ---------------------------------------------------------------- features

ModelFeatures compute_model_features(const TriangleMesh& mesh, bool watertight, const IngestConfig& config) {
    auto oabb = compute_oabb(mesh);
    auto e = oabb.extents;
    if (!(e[0] > 0.0)) throw Error(ErrorKind::Degenerate, "mesh has zero extent");
    ModelFeatures out;
    auto& s = out.spatial;
    // Flat or linear inputs keep one cell of thickness.
    const double min_extent = e[0] / config.target_cells;
    for (int i = 1; i < 3; ++i)
        if (e[i] <= e[0] * 1e-9) {
            e[i] = min_extent;
            s.flat = true;
        }
    std::sort(e.begin(), e.end(), std::greater<>());
    s.oabb_extents_mm = e;
    std::tie(s.r1, s.r2) = compute_ratios(e);
    s.principal_axes = oabb.frame.axes;
    s.centroid = oabb.frame.centroid;
    s.scale = normalize_extents(e).scale_factor;

    auto normalized = transformed(mesh, [&](const Vec3& p) { return s.to_normalized(p); });
    VoxelFill fill = config.fill;
    if (fill == VoxelFill::Auto) fill = watertight ? VoxelFill::Solid : VoxelFill::Shell;
    s.solid = fill == VoxelFill::Solid;
    out.grid = voxelize(normalized, config.target_cells, fill);
    if (out.grid.empty()) throw Error(ErrorKind::Degenerate, "voxelization produced no occupied cells");
    return out;
}

// ---------------------------------------------------------------- ingest

namespace {

struct ModelInput {
    std::string id;
    fs::path dir;
};

struct ModelOutput {
    std::optional<ArtifactRecord> record;
    std::optional<VoxelGrid> grid;
    std::vector<std::uint8_t> mesh_bytes;
    std::string mesh_ext;
    std::vector<std::uint8_t> thumb_bytes;
    std::vector<IngestIssue> issues;
    std::string hash_input;  // per-model digest for the corpus hash
};

std::optional<fs::path> find_mesh_file(const fs::path& dir) {
    for (const char* name : {"mesh.stl", "mesh.obj"})
        if (fs::is_regular_file(dir / name)) return dir / name;
    std::vector<fs::path> candidates;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".stl" || ext == ".obj") candidates.push_back(entry.path());
    }
    std::sort(candidates.begin(), candidates.end());
    if (candidates.empty()) return std::nullopt;
    return candidates.front();
}

std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fill_name(VoxelFill f) {
    switch (f) {
    case VoxelFill::Auto: return "auto";
    case VoxelFill::Shell: return "shell";
    case VoxelFill::Solid: return "solid";
    }
    return "auto";
}

ModelOutput process_model(const ModelInput& in, const IngestConfig& config) {
    ModelOutput out;
    Sha256 hash;
    hash.update(in.id);

    json meta;
    try {
        auto text = read_text_file(in.dir / "meta.json");
        hash.update(text);
        meta = json::parse(text);
        if (!meta.is_object()) throw Error(ErrorKind::Parse, "meta.json is not an object");
    } catch (const std::exception& e) {
        out.issues.push_back({in.id, true, std::string("malformed metadata: ") + e.what()});
        out.hash_input = hash.hex_digest();
        return out;
    }

    ArtifactRecord r;
    r.id = in.id;
    try {
        r.name = meta.at("name").get<std::string>();
        r.description = meta.value("description", std::string());
        r.tags = meta.value("tags", std::vector<std::string>());
        r.category = map_category(meta.value("category", std::string()), config.categories);
        r.attribution.origin_url = opt<std::string>(meta, "origin_url");
        r.attribution.designer = opt<std::string>(meta, "designer");
        r.attribution.license = opt<std::string>(meta, "license");
    } catch (const json::exception& e) {
        out.issues.push_back({in.id, true, std::string("malformed metadata: ") + e.what()});
        out.hash_input = hash.hex_digest();
        return out;
    }

    if (fs::is_regular_file(in.dir / "thumb.png")) {
        out.thumb_bytes = read_file(in.dir / "thumb.png");
        hash.update(out.thumb_bytes);
        try {
            if (decode_image(out.thumb_bytes).format != ImageFormat::Png) throw Error(ErrorKind::Parse, "not a PNG");
            r.thumbnail_file = "thumbs/" + in.id + ".png";
        } catch (const Error& e) {
            out.issues.push_back({in.id, false, std::string("thumb.png ignored (") + e.what() + ")"});
            out.thumb_bytes.clear();
        }
    }

    auto mesh_path = find_mesh_file(in.dir);
    if (!mesh_path) {
        out.issues.push_back({in.id, false, "no mesh file; record is text-only"});
    } else {
        out.mesh_bytes = read_file(*mesh_path);
        hash.update(out.mesh_bytes);
        out.mesh_ext = format_from_path(*mesh_path) == MeshFormat::Obj ? ".obj" : ".stl";
        r.mesh_file = "meshes/" + in.id + out.mesh_ext;
        try {
            auto mesh = parse_mesh(out.mesh_bytes, format_from_path(*mesh_path));
            auto validation = validate_mesh(mesh);
            r.mesh_stats.triangle_count = mesh.triangle_count();
            r.mesh_stats.watertight = validation.watertight;
            if (validation.usable) r.mesh_stats.extents_mm = to_array(mesh_bounds(mesh).extents());
            if (!validation.usable) {
                out.issues.push_back({in.id, false, "mesh unusable (" + validation.reason + "); record is text-only"});
            } else if (!validation.watertight && config.open_meshes == OpenMeshPolicy::TextOnly) {
                out.issues.push_back({in.id, false, "mesh is not a closed volume; record is text-only"});
            } else {
                auto features = compute_model_features(mesh, validation.watertight, config);
                features.spatial.voxel_ref = "voxels/" + in.id + ".vox";
                r.spatial = features.spatial;
                out.grid = std::move(features.grid);
                if (features.spatial.flat) out.issues.push_back({in.id, false, "flat mesh; thickness clamped to one cell"});
            }
        } catch (const Error& e) {
            out.issues.push_back({in.id, false, std::string("unreadable mesh (") + e.what() + "); record is text-only"});
            r.spatial.reset();
            out.grid.reset();
        }
    }
    out.record = std::move(r);
    out.hash_input = hash.hex_digest();
    return out;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

} // namespace

IngestResult ingest_corpus(const fs::path& corpus_dir, const fs::path& out_dir, const IngestConfig& config) {
    if (!fs::is_directory(corpus_dir)) throw Error(ErrorKind::NotFound, "corpus directory not found: " + corpus_dir.string());
    if (!config.weights.valid())
        throw Error(ErrorKind::Config, "field weights must satisfy name > tags > description > category > 0");

    std::vector<ModelInput> inputs;
    for (const auto& entry : fs::directory_iterator(corpus_dir))
        if (entry.is_directory()) inputs.push_back({entry.path().filename().string(), entry.path()});
    std::sort(inputs.begin(), inputs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    ensure_dir(out_dir);
    ensure_dir(out_dir / "voxels");
    ensure_dir(out_dir / "meshes");
    ensure_dir(out_dir / "thumbs");

    std::vector<ModelOutput> outputs(inputs.size());
    unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, inputs.size())));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < inputs.size();) {
            try {
                outputs[i] = process_model(inputs[i], config);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    IngestResult result;
    auto& bundle = result.bundle;
    auto& report = result.report;
    report.total = inputs.size();
    Sha256 corpus_hash;
    for (auto& o : outputs) {
        corpus_hash.update(o.hash_input);
        report.issues.insert(report.issues.end(), o.issues.begin(), o.issues.end());
        if (!o.record) {
            ++report.skipped;
            continue;
        }
        auto& r = *o.record;
        if (!r.mesh_file.empty()) write_file(out_dir / r.mesh_file, o.mesh_bytes);
        if (r.thumbnail_file) write_file(out_dir / *r.thumbnail_file, o.thumb_bytes);
        if (o.grid) bundle.voxels.emplace(r.id, std::move(*o.grid));
        ++report.ingested;
        ++(r.spatial ? report.spatial : report.text_only);
        bundle.catalog.push_back(std::move(r));
    }

    bundle.build_info.format_version = kBundleFormatVersion;
    bundle.build_info.created_at = config.created_at.value_or(utc_now());
    bundle.build_info.corpus_hash = corpus_hash.hex_digest();
    bundle.build_info.weights = config.weights;
    bundle.build_info.voxel_fill = fill_name(config.fill);
    bundle.build_info.target_cells = config.target_cells;

    bundle.text = TextIndex(text_documents(bundle.catalog), config.weights);
    std::vector<RatioEntry> ratios;
    for (const auto& r : bundle.catalog)
        if (r.spatial) ratios.push_back({r.id, r.spatial->r1, r.spatial->r2});
    bundle.ratios = RatioIndex(std::move(ratios));

    save_bundle(bundle, out_dir);
    bundle.root = out_dir;
    return result;
}

// ---------------------------------------------------------------- persistence

void save_bundle(const IndexBundle& bundle, const fs::path& index_dir) {
    ensure_dir(index_dir);
    ensure_dir(index_dir / bundle.voxel_dir);
    for (const auto& r : bundle.catalog) {
        if (!r.spatial) continue;
        const auto* grid = bundle.voxel(r.id);
        if (!grid) throw Error(ErrorKind::InvalidArgument, "save_bundle: no voxel grid for " + r.id);
        write_vox(index_dir / r.spatial->voxel_ref, *grid);
    }
    write_file(index_dir / bundle.text_index_ref, bundle.text.encode());
    write_file(index_dir / bundle.ratio_index_ref, bundle.ratios.encode());
    write_text_file(index_dir / "catalog.json", catalog_to_json(bundle.catalog));
    write_text_file(index_dir / "build.json", build_info_to_json(bundle.build_info));
}

IndexBundle load_bundle(const fs::path& index_dir) {
    auto require = [&](const fs::path& rel) {
        auto p = index_dir / rel;
        if (!fs::is_regular_file(p)) throw Error(ErrorKind::NotFound, "index file missing: " + p.string());
        return p;
    };
    IndexBundle b;
    b.root = index_dir;
    b.build_info = build_info_from_json(read_text_file(require("build.json")));
    b.catalog = catalog_from_json(read_text_file(require("catalog.json")));
    for (std::size_t i = 1; i < b.catalog.size(); ++i)
        if (!(b.catalog[i - 1].id < b.catalog[i].id))
            throw Error(ErrorKind::Parse, "catalog.json: ids not unique and sorted at " + b.catalog[i].id);
    b.text = TextIndex::decode(read_file(require(b.text_index_ref)));
    b.ratios = RatioIndex::decode(read_file(require(b.ratio_index_ref)));
    for (const auto& r : b.catalog) {
        if (!r.mesh_file.empty()) require(r.mesh_file);
        if (r.thumbnail_file) require(*r.thumbnail_file);
        if (r.spatial) b.voxels.emplace(r.id, read_vox(require(r.spatial->voxel_ref)));
    }
    return b;
}

} // namespace shapefind
