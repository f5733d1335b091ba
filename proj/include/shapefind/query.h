#pragma once

#include "shapefind/catalog.h"
#include "shapefind/shape_match.h"

#include "json.hpp"

#include <array>
#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace shapefind {

using Polyline = std::vector<Vec3, Eigen::aligned_allocator<Vec3>>;

struct BaseRef {
    std::string id;
    RigidTransform transform;  // mm space
    double scale = 1.0;        // applied before the transform
};

inline constexpr int kDefaultLimit = 24;
inline constexpr int kMaxLimit = 200;

struct SketchQuery {
    std::vector<Polyline> strokes;  // mm
    double stroke_radius_mm = 2.0;
    std::vector<BaseRef> bases;
    std::optional<std::string> term;
    int limit = kDefaultLimit;
    int offset = 0;

    /// Throws InvalidArgument when the query breaks its invariants.
    void validate() const;
};

/// Sketch wire format (JSON, millimetres).
SketchQuery sketch_from_json(const nlohmann::json& j);
nlohmann::ordered_json sketch_to_json(const SketchQuery& q);

struct QueryConfig {
    double tau = 0.2;
    double widen_factor = 1.5;
    int max_widenings = 3;
    std::size_t k_min = 30;
    std::size_t max_candidates = 500;
    bool require_term = false;
    AlignOptions align;
    int target_cells = kDefaultTargetCells;
    unsigned threads = 0;  // 0: hardware concurrency
    /// Ranking stops with a Timeout error once this passes.
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

/// Query tokens that restrict nothing in the sketch pre-filter.
const std::vector<std::string>& generic_terms();

/// Union of rasterized strokes and placed base models.
struct ComposedQuery {
    PointCloud points_mm;
    std::array<double, 3> extents_mm{};  // axis-aligned
};
ComposedQuery compose_query(const SketchQuery& q, const IndexBundle& bundle);

/// The sketch as matched against models: normalized voxel grid in its own
/// principal frame, plus the proportions used by the ratio pre-filter.
struct PreparedSketch {
    VoxelGrid grid;
    PointCloud centers;
    PrincipalFrame frame;
    std::array<double, 3> oabb_extents_mm{};  // sorted descending
    std::array<double, 3> extents_mm{};       // axis-aligned
    double r1 = 0.0;
    double r2 = 0.0;
    bool flat = false;
};
PreparedSketch prepare_sketch(const SketchQuery& q, const IndexBundle& bundle, int target_cells = kDefaultTargetCells);

struct CandidateTrace {
    std::size_t text_matches = 0;    // |T|
    bool term_applied = false;
    std::vector<double> radii;       // every τ tried, in order
    std::vector<std::size_t> sizes;  // |T ∩ R| for each τ
};

/// T ∩ R, sorted by id. Widening stops at the first radius that yields at
/// least k_min candidates or after max_widenings.
std::vector<std::string> select_candidates(const IndexBundle& bundle, const std::optional<std::string>& term, double r1,
                                           double r2, const QueryConfig& config = {}, CandidateTrace* trace = nullptr);

struct SketchResult {
    std::string id;
    int rank = 0;
    MatchScore score;
    double suggested_scale = 0.0;
    double rms = 0.0;
    RigidTransform transform;  // normalized sketch frame -> normalized model frame
};

struct SketchSearch {
    std::vector<SketchResult> results;  // the requested page
    std::size_t total = 0;              // scored candidates
    std::array<double, 3> sketch_extents_mm{};
    CandidateTrace trace;
};

SketchSearch search_sketch(const SketchQuery& q, const IndexBundle& bundle, const QueryConfig& config = {});

/// Scores every spatially searchable model against a prepared sketch with
/// no pre-filtering, best first.
std::vector<SketchResult> rank_all(const PreparedSketch& sketch, const IndexBundle& bundle,
                                   const std::vector<std::string>& ids, const QueryConfig& config = {});

struct TextResult {
    std::string id;
    int rank = 0;
    double text_score = 0.0;
};

/// Throws InvalidArgument("empty query") when the term has no indexable token.
std::vector<TextResult> search_text(const IndexBundle& bundle, const std::string& term, int limit = kDefaultLimit,
                                    int offset = 0);

} // namespace shapefind
