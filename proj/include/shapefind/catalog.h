#pragma once

#include "shapefind/geometry.h"
#include "shapefind/ratio_index.h"
#include "shapefind/text_index.h"
#include "shapefind/voxel_grid.h"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace shapefind {

struct Attribution {
    std::optional<std::string> origin_url;
    std::optional<std::string> designer;
    std::optional<std::string> license;
    friend bool operator==(const Attribution&, const Attribution&) = default;
};

struct MeshStats {
    std::array<double, 3> extents_mm{};  // axis-aligned, as stored in the file
    std::uint64_t triangle_count = 0;
    bool watertight = false;
    friend bool operator==(const MeshStats&, const MeshStats&) = default;
};

struct SpatialFeatures {
    std::array<double, 3> oabb_extents_mm{};  // sorted descending
    double r1 = 0.0;
    double r2 = 0.0;
    std::string voxel_ref;                    // relative to the index directory
    Mat3 principal_axes = Mat3::Identity();   // rows
    Vec3 centroid = Vec3::Zero();             // mm
    /// mm -> normalized units; normalized = scale * axes * (p - centroid).
    double scale = 1.0;
    bool flat = false;          // smallest extent was zero and clamped to one pitch
    bool solid = false;         // grid was interior-filled

    Vec3 to_normalized(const Vec3& p_mm) const { return scale * (principal_axes * (p_mm - centroid)); }
    Vec3 to_mm(const Vec3& q) const { return centroid + principal_axes.transpose() * (q / scale); }

    friend bool operator==(const SpatialFeatures&, const SpatialFeatures&) = default;
};

struct ArtifactRecord {
    std::string id;
    std::string name;
    std::string description;
    std::vector<std::string> tags;
    std::string category;
    Attribution attribution;
    std::string mesh_file;                      // relative to the index directory; empty if absent
    std::optional<std::string> thumbnail_file;  // relative to the index directory
    MeshStats mesh_stats;
    std::optional<SpatialFeatures> spatial;

    friend bool operator==(const ArtifactRecord&, const ArtifactRecord&) = default;
};

/// Source category -> canonical category. Without an explicit table the
/// mapping is the identity; with one, unlisted categories fall into
/// "uncategorized". The empty category always maps to "uncategorized".
struct CategoryMap {
    std::map<std::string, std::string> table;
    bool identity_default = true;

    static CategoryMap from_json_file(const std::filesystem::path& path);
};

inline constexpr const char* kUncategorized = "uncategorized";

std::string map_category(const std::string& source, const CategoryMap& mapping);

enum class OpenMeshPolicy {
    Shell,     // non-watertight meshes get surface-shell features
    TextOnly,  // non-watertight meshes stay text-only
};

struct IngestConfig {
    FieldWeights weights;
    CategoryMap categories;
    VoxelFill fill = VoxelFill::Shell;  // Auto: solid for watertight meshes
    OpenMeshPolicy open_meshes = OpenMeshPolicy::Shell;
    int target_cells = kDefaultTargetCells;
    /// Fixed timestamp for reproducible builds; current UTC time otherwise.
    std::optional<std::string> created_at;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct BuildInfo {
    int format_version = 0;
    std::string created_at;
    std::string corpus_hash;
    FieldWeights weights;
    std::string voxel_fill;
    int target_cells = kDefaultTargetCells;
    friend bool operator==(const BuildInfo&, const BuildInfo&) = default;
};

inline constexpr int kBundleFormatVersion = 1;

struct IngestIssue {
    std::string id;
    bool fatal_for_model = false;  // model skipped entirely
    std::string message;
};

struct IngestReport {
    std::size_t total = 0;       // model directories seen
    std::size_t ingested = 0;    // records written
    std::size_t spatial = 0;
    std::size_t text_only = 0;
    std::size_t skipped = 0;
    std::vector<IngestIssue> issues;

    std::string summary() const;
};

/// Everything a query needs, loaded once and then shared read-only.
struct IndexBundle {
    std::vector<ArtifactRecord> catalog;  // sorted by id
    std::string text_index_ref = "text.idx";
    std::string ratio_index_ref = "ratios.idx";
    std::string voxel_dir = "voxels";
    BuildInfo build_info;

    TextIndex text;
    RatioIndex ratios;
    std::map<std::string, VoxelGrid, std::less<>> voxels;
    std::filesystem::path root;  // directory the bundle was loaded from or saved to

    const ArtifactRecord* find(std::string_view id) const;
    const VoxelGrid* voxel(std::string_view id) const;
};

struct IngestResult {
    IndexBundle bundle;
    IngestReport report;
};

/// Reads `corpus_dir/<id>/{mesh.stl|mesh.obj, meta.json[, thumb.png]}` and
/// writes a complete index to `out_dir`.
IngestResult ingest_corpus(const std::filesystem::path& corpus_dir, const std::filesystem::path& out_dir,
                           const IngestConfig& config = {});

/// Spatial features and grid for one mesh, as computed during ingestion.
struct ModelFeatures {
    SpatialFeatures spatial;
    VoxelGrid grid;
};
ModelFeatures compute_model_features(const TriangleMesh& mesh, bool watertight, const IngestConfig& config);

/// Writes catalog.json, text.idx, ratios.idx, voxels/ and build.json. Mesh
/// and thumbnail files referenced by records must already be in place.
void save_bundle(const IndexBundle& bundle, const std::filesystem::path& index_dir);
IndexBundle load_bundle(const std::filesystem::path& index_dir);

std::string catalog_to_json(const std::vector<ArtifactRecord>& catalog);
std::vector<ArtifactRecord> catalog_from_json(const std::string& text);
std::string build_info_to_json(const BuildInfo& info);
BuildInfo build_info_from_json(const std::string& text);

std::vector<TextDocument> text_documents(const std::vector<ArtifactRecord>& catalog);

} // namespace shapefind

#include "json.hpp"

namespace shapefind {

/// Public JSON form of a record (also served by the REST API).
nlohmann::ordered_json record_to_json(const ArtifactRecord& record);
ArtifactRecord record_from_json(const nlohmann::json& j);

} // namespace shapefind
