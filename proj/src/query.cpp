#include "shapefind/query.h"

#include "shapefind/error.h"
#include "shapefind/features.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <set>
#include <thread>

namespace shapefind {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------- wire format

void SketchQuery::validate() const {
    if (strokes.empty() && bases.empty()) throw Error(ErrorKind::InvalidArgument, "sketch has no strokes and no bases");
    for (std::size_t i = 0; i < strokes.size(); ++i) {
        if (strokes[i].size() < 2)
            throw Error(ErrorKind::InvalidArgument, "stroke " + std::to_string(i) + " has fewer than 2 points");
        for (const auto& p : strokes[i])
            if (!p.allFinite()) throw Error(ErrorKind::InvalidArgument, "stroke " + std::to_string(i) + " has a non-finite point");
    }
    if (!(stroke_radius_mm > 0.0) || !std::isfinite(stroke_radius_mm))
        throw Error(ErrorKind::InvalidArgument, "stroke_radius_mm must be positive");
    for (const auto& b : bases) {
        if (!(b.scale > 0.0) || !std::isfinite(b.scale))
            throw Error(ErrorKind::InvalidArgument, "base " + b.id + ": scale must be positive");
        if (!b.transform.is_proper(1e-6))
            throw Error(ErrorKind::InvalidArgument, "base " + b.id + ": rotation is not a proper rotation");
    }
    if (limit < 1 || limit > kMaxLimit)
        throw Error(ErrorKind::InvalidArgument, "limit must be in 1.." + std::to_string(kMaxLimit));
    if (offset < 0) throw Error(ErrorKind::InvalidArgument, "offset must be non-negative");
}

namespace {

Vec3 point_from(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3)
        throw Error(ErrorKind::Parse, where + ": expected [x, y, z]");
    Vec3 p;
    for (int i = 0; i < 3; ++i) {
        if (!j[i].is_number()) throw Error(ErrorKind::Parse, where + ": coordinates must be numbers");
        p[i] = j[i].get<double>();
    }
    return p;
}

int int_field(const json& j, const char* key, int fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    if (!j[key].is_number_integer()) throw Error(ErrorKind::Parse, std::string(key) + " must be an integer");
    return j[key].get<int>();
}

} // namespace

SketchQuery sketch_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorKind::Parse, "sketch: expected a JSON object");
    SketchQuery q;
    if (j.contains("strokes")) {
        const auto& strokes = j["strokes"];
        if (!strokes.is_array()) throw Error(ErrorKind::Parse, "strokes: expected an array of polylines");
        for (std::size_t i = 0; i < strokes.size(); ++i) {
            if (!strokes[i].is_array()) throw Error(ErrorKind::Parse, "strokes[" + std::to_string(i) + "]: expected an array");
            Polyline line;
            for (std::size_t k = 0; k < strokes[i].size(); ++k)
                line.push_back(point_from(strokes[i][k], "strokes[" + std::to_string(i) + "][" + std::to_string(k) + "]"));
            q.strokes.push_back(std::move(line));
        }
    }
    if (j.contains("stroke_radius_mm")) {
        if (!j["stroke_radius_mm"].is_number()) throw Error(ErrorKind::Parse, "stroke_radius_mm must be a number");
        q.stroke_radius_mm = j["stroke_radius_mm"].get<double>();
    }
    if (j.contains("bases")) {
        const auto& bases = j["bases"];
        if (!bases.is_array()) throw Error(ErrorKind::Parse, "bases: expected an array");
        for (std::size_t i = 0; i < bases.size(); ++i) {
            const auto& b = bases[i];
            std::string where = "bases[" + std::to_string(i) + "]";
            if (!b.is_object() || !b.contains("id") || !b["id"].is_string())
                throw Error(ErrorKind::Parse, where + ": expected an object with a string id");
            BaseRef ref;
            ref.id = b["id"].get<std::string>();
            if (b.contains("transform")) {
                const auto& t = b["transform"];
                if (t.contains("rotation")) {
                    const auto& r = t["rotation"];
                    if (!r.is_array() || r.size() != 9) throw Error(ErrorKind::Parse, where + ".rotation: expected 9 numbers");
                    for (int k = 0; k < 9; ++k) {
                        if (!r[k].is_number()) throw Error(ErrorKind::Parse, where + ".rotation: expected numbers");
                        ref.transform.rotation(k / 3, k % 3) = r[k].get<double>();
                    }
                }
                if (t.contains("translation")) ref.transform.translation = point_from(t["translation"], where + ".translation");
            }
            if (b.contains("scale")) {
                if (!b["scale"].is_number()) throw Error(ErrorKind::Parse, where + ".scale must be a number");
                ref.scale = b["scale"].get<double>();
            }
            q.bases.push_back(std::move(ref));
        }
    }
    if (j.contains("term") && !j["term"].is_null()) {
        if (!j["term"].is_string()) throw Error(ErrorKind::Parse, "term must be a string");
        q.term = j["term"].get<std::string>();
    }
    q.limit = int_field(j, "limit", kDefaultLimit);
    q.offset = int_field(j, "offset", 0);
    q.validate();
    return q;
}

ordered_json sketch_to_json(const SketchQuery& q) {
    ordered_json j;
    j["strokes"] = ordered_json::array();
    for (const auto& line : q.strokes) {
        ordered_json l = ordered_json::array();
        for (const auto& p : line) l.push_back({p.x(), p.y(), p.z()});
        j["strokes"].push_back(l);
    }
    j["stroke_radius_mm"] = q.stroke_radius_mm;
    j["bases"] = ordered_json::array();
    for (const auto& b : q.bases) {
        ordered_json rot = ordered_json::array();
        for (int k = 0; k < 9; ++k) rot.push_back(b.transform.rotation(k / 3, k % 3));
        const auto& t = b.transform.translation;
        j["bases"].push_back({{"id", b.id},
                              {"transform", {{"rotation", rot}, {"translation", {t.x(), t.y(), t.z()}}}},
                              {"scale", b.scale}});
    }
    if (q.term) j["term"] = *q.term;
    j["limit"] = q.limit;
    j["offset"] = q.offset;
    return j;
}

const std::vector<std::string>& generic_terms() {
    static const std::vector<std::string> terms = {"object", "thing", "model", "print"};
    return terms;
}

// ---------------------------------------------------------------- composition

namespace {

// Normalized coordinates are snapped to a 2^-16 lattice so that uniformly
// scaled copies of a sketch, whose normalized coordinates differ only by
// rounding noise, rasterize to identical points.
double snap(double x) { return std::nearbyint(x * 65536.0) / 65536.0; }
Vec3 snap(const Vec3& v) { return {snap(v.x()), snap(v.y()), snap(v.z())}; }

constexpr double kTubeSpacing = 1.0;  // normalized units; one fifth of a pitch

struct NormalizedSketch {
    PointCloud points;  // normalized: largest axis-aligned extent ~100
    Vec3 min_mm;
    double k = 1.0;     // mm -> normalized
    Aabb raw_bounds;
};

PointCloud base_points_mm(const BaseRef& base, const IndexBundle& bundle) {
    const auto* record = bundle.find(base.id);
    if (!record) throw Error(ErrorKind::NotFound, "unknown base model: " + base.id);
    const auto* grid = bundle.voxel(base.id);
    if (!record->spatial || !grid) throw Error(ErrorKind::InvalidArgument, "base model has no spatial features: " + base.id);
    PointCloud out;
    for (const auto& c : grid->occupied_centers()) out.push_back(base.transform.apply(base.scale * record->spatial->to_mm(c)));
    return out;
}

void add_tube_samples(PointCloud& out, const Vec3& c, double r) {
    out.push_back(c);
    if (r <= 0) return;
    for (int axis = 0; axis < 3; ++axis)
        for (double s : {-1.0, 1.0}) {
            Vec3 p = c;
            p[axis] += s * r;
            out.push_back(p);
        }
    const double d = r / std::sqrt(3.0);
    for (int m = 0; m < 8; ++m) out.push_back(c + Vec3(m & 1 ? d : -d, m & 2 ? d : -d, m & 4 ? d : -d));
}

NormalizedSketch normalize_sketch(const SketchQuery& q, const IndexBundle& bundle) {
    q.validate();
    NormalizedSketch ns;
    std::vector<PointCloud> bases;
    for (const auto& b : q.bases) bases.push_back(base_points_mm(b, bundle));

    const Vec3 pad = Vec3::Constant(q.stroke_radius_mm);
    for (const auto& line : q.strokes)
        for (const auto& p : line) {
            ns.raw_bounds.extend(p - pad);
            ns.raw_bounds.extend(p + pad);
        }
    for (const auto& cloud : bases)
        for (const auto& p : cloud) ns.raw_bounds.extend(p);
    const double max_ext = ns.raw_bounds.extents().maxCoeff();
    if (ns.raw_bounds.empty() || !(max_ext > 0.0)) throw Error(ErrorKind::Degenerate, "composed sketch is empty");

    ns.min_mm = ns.raw_bounds.min;
    ns.k = kNormalizedExtent / max_ext;
    const double r = snap(q.stroke_radius_mm * ns.k);
    for (const auto& line : q.strokes) {
        Vec3 prev = snap(Vec3((line[0] - ns.min_mm) * ns.k));
        add_tube_samples(ns.points, prev, r);
        for (std::size_t i = 1; i < line.size(); ++i) {
            Vec3 cur = snap(Vec3((line[i] - ns.min_mm) * ns.k));
            const double len = (cur - prev).norm();
            const int steps = std::max(1, static_cast<int>(std::ceil(len / kTubeSpacing)));
            for (int s = 1; s <= steps; ++s) add_tube_samples(ns.points, prev + (cur - prev) * (double(s) / steps), r);
            prev = cur;
        }
    }
    for (const auto& cloud : bases)
        for (const auto& p : cloud) ns.points.push_back(snap(Vec3((p - ns.min_mm) * ns.k)));
    return ns;
}

} // namespace

ComposedQuery compose_query(const SketchQuery& q, const IndexBundle& bundle) {
    auto ns = normalize_sketch(q, bundle);
    ComposedQuery out;
    out.points_mm.reserve(ns.points.size());
    for (const auto& p : ns.points) out.points_mm.push_back(ns.min_mm + p / ns.k);
    out.extents_mm = to_array(ns.raw_bounds.extents());
    return out;
}

PreparedSketch prepare_sketch(const SketchQuery& q, const IndexBundle& bundle, int target_cells) {
    auto ns = normalize_sketch(q, bundle);
    PreparedSketch out;
    out.extents_mm = to_array(ns.raw_bounds.extents());

    auto frame = principal_axes(ns.points);
    Aabb box;
    PointCloud local;
    local.reserve(ns.points.size());
    for (const auto& p : ns.points) {
        local.push_back(frame.to_frame(p));
        box.extend(local.back());
    }
    Vec3 ext = box.extents();
    const double e_max = ext.maxCoeff();
    if (!(e_max > 0.0)) throw Error(ErrorKind::Degenerate, "composed sketch has no extent");
    const double s = kNormalizedExtent / e_max;
    for (auto& p : local) p = (p - box.min) * s;
    out.grid = voxelize_points(local, target_cells);

    std::array<double, 3> e = {ext[0] / ns.k, ext[1] / ns.k, ext[2] / ns.k};
    std::sort(e.begin(), e.end(), std::greater<>());
    for (int i = 1; i < 3; ++i)
        if (e[i] <= e[0] * 1e-9) {
            e[i] = e[0] / target_cells;
            out.flat = true;
        }
    std::sort(e.begin(), e.end(), std::greater<>());
    out.oabb_extents_mm = e;
    std::tie(out.r1, out.r2) = compute_ratios(e);

    out.centers = out.grid.occupied_centers();
    out.frame = principal_axes(out.centers);
    return out;
}

// ---------------------------------------------------------------- candidates

std::vector<std::string> select_candidates(const IndexBundle& bundle, const std::optional<std::string>& term, double r1,
                                           double r2, const QueryConfig& config, CandidateTrace* trace) {
    CandidateTrace local;
    CandidateTrace& tr = trace ? *trace : local;
    tr = {};

    std::vector<std::string> tokens;
    if (term) {
        for (auto& t : normalize_text(*term))
            if (std::find(generic_terms().begin(), generic_terms().end(), t) == generic_terms().end())
                tokens.push_back(std::move(t));
    }
    if (config.require_term && tokens.empty())
        throw Error(ErrorKind::InvalidArgument, "a specific search term is required for sketch queries");

    std::vector<std::string> text_set;
    if (!tokens.empty()) {
        tr.term_applied = true;
        // Tokens are already stemmed, so they are looked up directly rather
        // than re-normalized (stemming is not idempotent).
        std::set<std::string> distinct(tokens.begin(), tokens.end());
        std::map<std::string, double> scores;
        for (const auto& t : distinct) {
            auto it = bundle.text.terms().find(t);
            if (it == bundle.text.terms().end()) continue;
            for (const auto& p : it->second) scores[bundle.text.ids()[p.doc]] += bundle.text.weights().of(p.field) * p.tf;
        }
        std::vector<std::pair<std::string, double>> ranked;
        for (auto& [id, s] : scores) {
            const auto* r = bundle.find(id);
            if (r && r->spatial) ranked.emplace_back(id, s);
        }
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        if (ranked.size() > config.max_candidates) ranked.resize(config.max_candidates);
        for (auto& [id, s] : ranked) text_set.push_back(id);
    } else {
        for (const auto& r : bundle.catalog)
            if (r.spatial && text_set.size() < config.max_candidates) text_set.push_back(r.id);
    }
    std::sort(text_set.begin(), text_set.end());
    tr.text_matches = text_set.size();

    std::vector<std::string> result;
    double radius = config.tau;
    for (int widening = 0;; ++widening) {
        auto ratio_set = bundle.ratios.within(r1, r2, radius);
        result.clear();
        std::set_intersection(text_set.begin(), text_set.end(), ratio_set.begin(), ratio_set.end(),
                              std::back_inserter(result));
        tr.radii.push_back(radius);
        tr.sizes.push_back(result.size());
        if (result.size() >= config.k_min || widening >= config.max_widenings || text_set.empty()) break;
        radius *= config.widen_factor;
    }
    return result;
}

// ---------------------------------------------------------------- ranking

namespace {

bool better(const SketchResult& a, const SketchResult& b) {
    if (a.score.avg != b.score.avg) return a.score.avg > b.score.avg;
    if (a.score.sketch_norm != b.score.sketch_norm) return a.score.sketch_norm > b.score.sketch_norm;
    return a.id < b.id;
}

template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex m;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(m);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace

std::vector<SketchResult> rank_all(const PreparedSketch& sketch, const IndexBundle& bundle,
                                   const std::vector<std::string>& ids, const QueryConfig& config) {
    std::vector<SketchResult> results(ids.size());
    parallel_for(ids.size(), config.threads, [&](std::size_t i) {
        if (config.deadline && std::chrono::steady_clock::now() > *config.deadline)
            throw Error(ErrorKind::Timeout, "sketch query exceeded its time budget");
        const auto* record = bundle.find(ids[i]);
        const auto* grid = bundle.voxel(ids[i]);
        if (!record || !record->spatial || !grid)
            throw Error(ErrorKind::InvalidArgument, "candidate without spatial features: " + ids[i]);
        AlignTarget target(*grid, config.align.neighbor_cell_pitches);
        auto aligned = multi_start_align(sketch.centers, sketch.frame, target, config.align);
        auto& r = results[i];
        r.id = ids[i];
        r.score = score(sketch.grid, *grid, aligned.transform);
        r.rms = aligned.rms;
        r.transform = aligned.transform;
        r.suggested_scale = sketch.oabb_extents_mm[0] / record->spatial->oabb_extents_mm[0];
    });
    std::sort(results.begin(), results.end(), better);
    for (std::size_t i = 0; i < results.size(); ++i) results[i].rank = static_cast<int>(i + 1);
    return results;
}

SketchSearch search_sketch(const SketchQuery& q, const IndexBundle& bundle, const QueryConfig& config) {
    auto sketch = prepare_sketch(q, bundle, config.target_cells);
    SketchSearch out;
    out.sketch_extents_mm = sketch.extents_mm;
    auto candidates = select_candidates(bundle, q.term, sketch.r1, sketch.r2, config, &out.trace);
    auto ranked = rank_all(sketch, bundle, candidates, config);
    out.total = ranked.size();
    auto begin = std::min<std::size_t>(static_cast<std::size_t>(q.offset), ranked.size());
    auto end = std::min<std::size_t>(begin + static_cast<std::size_t>(q.limit), ranked.size());
    out.results.assign(std::make_move_iterator(ranked.begin() + static_cast<std::ptrdiff_t>(begin)),
                       std::make_move_iterator(ranked.begin() + static_cast<std::ptrdiff_t>(end)));
    return out;
}

std::vector<TextResult> search_text(const IndexBundle& bundle, const std::string& term, int limit, int offset) {
    if (normalize_text(term).empty()) throw Error(ErrorKind::InvalidArgument, "empty query: no searchable words in \"" + term + "\"");
    if (limit < 1 || limit > kMaxLimit) throw Error(ErrorKind::InvalidArgument, "limit must be in 1.." + std::to_string(kMaxLimit));
    if (offset < 0) throw Error(ErrorKind::InvalidArgument, "offset must be non-negative");
    auto hits = bundle.text.query(term, static_cast<std::size_t>(limit), static_cast<std::size_t>(offset));
    std::vector<TextResult> out;
    for (std::size_t i = 0; i < hits.size(); ++i)
        out.push_back({hits[i].id, offset + static_cast<int>(i) + 1, hits[i].score});
    return out;
}

} // namespace shapefind
