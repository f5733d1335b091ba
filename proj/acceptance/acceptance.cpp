// Acceptance run: one PASS/FAIL line per criterion. Exits 0 once every
// criterion has been evaluated; --strict exits 1 when any of them fails.

#include "shapefind/binary_io.h"
#include "shapefind/catalog.h"
#include "shapefind/corpus_gen.h"
#include "shapefind/features.h"
#include "shapefind/query.h"
#include "shapefind/shape_match.h"
#include "shapefind/text_index.h"
#include "shapefind/voxel_grid.h"

#include "sketches.h"
#include "support.h"

#include <Eigen/Geometry>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>

using namespace shapefind;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    failures += !ok;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Every search that carries a term is checked against the text-match set.
struct IntersectionAudit {
    std::size_t queries = 0;
    std::size_t results = 0;
    std::size_t outside = 0;

    SketchSearch run(const SketchQuery& q, const IndexBundle& bundle, const QueryConfig& config = {}) {
        auto out = search_sketch(q, bundle, config);
        if (q.term) {
            std::set<std::string> allowed;
            for (const auto& h : bundle.text.match(*q.term)) allowed.insert(h.id);
            ++queries;
            for (const auto& r : out.results) {
                ++results;
                outside += !allowed.count(r.id);
            }
        }
        return out;
    }
};

std::vector<std::string> top_ids(const std::vector<SketchResult>& results, std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < std::min(n, results.size()); ++i) ids.push_back(results[i].id);
    return ids;
}

int rank_of(const std::vector<SketchResult>& results, const std::string& id) {
    for (const auto& r : results)
        if (r.id == id) return r.rank;
    return -1;
}

std::vector<std::string> spatial_ids(const IndexBundle& bundle) {
    std::vector<std::string> ids;
    for (const auto& r : bundle.catalog)
        if (r.spatial) ids.push_back(r.id);
    return ids;
}

Polyline circle(const Vec3& center, double radius, const Vec3& u, const Vec3& v, int segments = 64) {
    Polyline line;
    for (int i = 0; i <= segments; ++i) {
        double t = 2.0 * M_PI * i / segments;
        line.push_back(center + radius * (std::cos(t) * u + std::sin(t) * v));
    }
    return line;
}

// ---------------------------------------------------------------------------

struct SelfRetrievalCase {
    GeneratedModel model;
    SketchQuery sketch;
    SketchSearch search;
};

std::vector<SelfRetrievalCase> self_retrieval(const std::vector<GeneratedModel>& models, const IndexBundle& bundle,
                                              IntersectionAudit& audit) {
    std::vector<SelfRetrievalCase> cases;
    int top1 = 0, top3 = 0, agree = 0;
    const auto all = spatial_ids(bundle);
    for (int s = 0; s < 30; ++s) {
        int i = s * 50 / 30;
        SelfRetrievalCase c{models[i], testing::surface_sketch(models[i].mesh, 1000 + i), {}};
        c.search = audit.run(c.sketch, bundle);
        int rank = rank_of(c.search.results, c.model.id);
        top1 += rank == 1;
        top3 += rank >= 1 && rank <= 3;
        auto exhaustive = rank_all(prepare_sketch(c.sketch, bundle), bundle, all);
        agree += top_ids(exhaustive, 3) == top_ids(c.search.results, 3);
        cases.push_back(std::move(c));
    }
    const int n = static_cast<int>(cases.size());
    report("self-retrieval", top1 * 10 >= n * 9 && top3 == n, fmt("top-1 %d/%d, top-3 %d/%d", top1, n, top3, n));
    report("self-retrieval oracle agreement", agree * 100 >= n * 95,
           fmt("pipeline top-3 equals exhaustive top-3 in %d/%d", agree, n));
    return cases;
}

void scale_invariance(const std::vector<SelfRetrievalCase>& cases, const IndexBundle& bundle) {
    int checked = 0, identical = 0;
    double worst = 0.0;
    for (int s = 0; s < 10; ++s) {
        const auto& base = cases[s].search;
        for (double k : {0.1, 3.7, 100.0}) {
            auto out = search_sketch(testing::scaled(cases[s].sketch, k), bundle);
            ++checked;
            bool same = out.results.size() == base.results.size() && out.total == base.total;
            for (std::size_t r = 0; same && r < out.results.size(); ++r) {
                same = out.results[r].id == base.results[r].id && out.results[r].score == base.results[r].score;
                double expected = k * base.results[r].suggested_scale;
                worst = std::max(worst, std::abs(out.results[r].suggested_scale - expected) / expected);
            }
            identical += same;
        }
    }
    report("scale invariance", identical == checked && worst <= 1e-9,
           fmt("%d/%d rankings bitwise identical, max suggested_scale relative error %.3g", identical, checked, worst));
}

void rotation_robustness(const std::vector<SelfRetrievalCase>& cases, const IndexBundle& bundle) {
    int kept = 0, total = 0, self = 0;
    for (const auto& c : cases) {
        if (c.search.results.empty()) continue;
        for (int axis = 0; axis < 3; ++axis) {
            Mat3 r = Eigen::AngleAxisd(M_PI / 2, Vec3::Unit(axis)).toRotationMatrix();
            auto i = std::stoi(c.model.id.substr(1));
            auto out = search_sketch(testing::surface_sketch(c.model.mesh, 1000 + i, r), bundle);
            ++total;
            kept += !out.results.empty() && out.results[0].id == c.search.results[0].id;
            self += !out.results.empty() && out.results[0].id == c.model.id;
        }
    }
    report("rotation robustness", kept * 10 >= total * 9,
           fmt("top-1 preserved %d/%d (source model top-1 %d/%d)", kept, total, self, total));
}

VoxelGrid block(VoxelGrid::Dims dims, int x0, int y0, int z0, int n) {
    VoxelGrid g(dims, 5.0, Vec3::Zero());
    for (int z = z0; z < z0 + n; ++z)
        for (int y = y0; y < y0 + n; ++y)
            for (int x = x0; x < x0 + n; ++x) g.set(x, y, z);
    return g;
}

std::uint64_t enumerate_overlap(const VoxelGrid& s, const VoxelGrid& m, const RigidTransform& t) {
    std::set<std::array<int, 3>> hit;
    for (int z = 0; z < s.dims()[2]; ++z)
        for (int y = 0; y < s.dims()[1]; ++y)
            for (int x = 0; x < s.dims()[0]; ++x) {
                if (!s.occupied(x, y, z)) continue;
                auto c = m.cell_of(t.apply(s.center(x, y, z)));
                if (m.in_bounds(c[0], c[1], c[2]) && m.occupied(c[0], c[1], c[2])) hit.insert(c);
            }
    return hit.size();
}

void overlap_identities() {
    std::mt19937_64 rng(3);
    VoxelGrid g({20, 14, 9}, 5.0, Vec3::Zero());
    std::bernoulli_distribution coin(0.3);
    for (int z = 0; z < 9; ++z)
        for (int y = 0; y < 14; ++y)
            for (int x = 0; x < 20; ++x)
                if (coin(rng)) g.set(x, y, z);
    auto equal = score(g, g, RigidTransform::identity());
    auto disjoint = score(g, g, {Mat3::Identity(), Vec3(1000, 0, 0)});
    auto model = block({20, 20, 20}, 0, 0, 0, 20);
    auto sketch = block({20, 20, 20}, 5, 5, 5, 10);
    auto nested = score(sketch, model, RigidTransform::identity());
    auto oracle = enumerate_overlap(sketch, model, RigidTransform::identity());
    bool ok = equal.sketch_norm == 1.0 && equal.model_norm == 1.0 && equal.avg == 1.0 &&
              disjoint == MatchScore{0, 0.0, 0.0, 0.0} && oracle == 1000 && nested.overlap_voxels == 1000 &&
              nested.sketch_norm == 1.0 && nested.model_norm == 0.125 && nested.avg == 0.5625;
    report("overlap identities", ok,
           fmt("equal (%g,%g,%g), disjoint (%g,%g,%g), nested %llu/%g/%g/%g (oracle %llu)", equal.sketch_norm,
               equal.model_norm, equal.avg, disjoint.sketch_norm, disjoint.model_norm, disjoint.avg,
               static_cast<unsigned long long>(nested.overlap_voxels), nested.sketch_norm, nested.model_norm, nested.avg,
               static_cast<unsigned long long>(oracle)));
}

PointCloud random_cloud(std::mt19937_64& rng, int n, const Vec3& scale) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    PointCloud pts;
    for (int i = 0; i < n; ++i) pts.emplace_back(scale.x() * u(rng), scale.y() * u(rng), scale.z() * u(rng));
    return pts;
}

void icp_properties() {
    std::mt19937_64 rng(1000);
    std::uniform_int_distribution<int> size(5, 80);
    std::uniform_real_distribution<double> shift(-20, 20);
    int valid = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        auto src = random_cloud(rng, size(rng), Vec3(100, 60, 30));
        auto dst = random_cloud(rng, size(rng), Vec3(80, 80, 40));
        RigidTransform init{testing::random_rotation(rng), Vec3(shift(rng), shift(rng), shift(rng))};
        auto r = icp_align(src, dst, init);
        bool ok = r.transform.is_proper(1e-9) && r.iterations <= 50 && r.rms == r.rms_history.back();
        for (std::size_t i = 1; i < r.rms_history.size(); ++i) ok &= r.rms_history[i] <= r.rms_history[i - 1];
        valid += ok;
    }
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        auto src = random_cloud(rng, 60, Vec3(100, 60, 30));
        Vec3 t(shift(rng), shift(rng), shift(rng));
        PointCloud dst;
        for (const auto& p : src) dst.push_back(p + t);
        Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
        for (std::size_t i = 0; i < src.size(); ++i) cs += src[i], cd += dst[i];
        RigidTransform init{Mat3::Identity(), (cd - cs) / static_cast<double>(src.size())};
        auto r = icp_align(src, dst, init);
        worst = std::max({worst, (r.transform.translation - t).norm(), (r.transform.rotation - Mat3::Identity()).norm()});
    }
    report("ICP monotonicity and validity", valid == 1000 && worst <= 1e-9,
           fmt("%d/1000 pairs monotone and proper, centroid translation error %.3g", valid, worst));
}

void text_weighting() {
    std::vector<TextDocument> docs = {
        {"a", "", {}, "", "Widget"},
        {"b", "", {}, "a small widget", "Other"},
        {"c", "", {"widget"}, "", "Other"},
        {"d", "Widget", {}, "", "Other"},
    };
    TextIndex index(docs);
    std::vector<std::string> order;
    for (const auto& h : index.match("widget")) order.push_back(h.id);
    std::string got;
    for (const auto& id : order) got += id;
    report("text weighting order", order == std::vector<std::string>{"d", "c", "b", "a"},
           "name, tags, description, category -> " + got);
}

void performance(const IndexBundle& small, const std::vector<GeneratedModel>& models) {
    // single comparison: 20-cell grids, four sign-flip starts, no permutations
    QueryConfig config;
    config.align.permute_ambiguous = false;
    std::vector<double> single;
    const auto ids = spatial_ids(small);
    for (int s = 0; s < 15; ++s) {
        auto prep = prepare_sketch(testing::surface_sketch(models[s * 3].mesh, 3000 + s), small);
        const auto& id = ids[(s * 7) % ids.size()];
        auto t0 = std::chrono::steady_clock::now();
        AlignTarget target(*small.voxel(id));
        auto align = multi_start_align(prep.centers, prep.frame, target, config.align);
        volatile auto sc = score(prep.grid, *small.voxel(id), align.transform).avg;
        (void)sc;
        single.push_back(seconds_since(t0));
    }
    double single_median = median(single);
    report("performance: single comparison", single_median <= 0.1,
           fmt("median %.1f ms over %zu comparisons", single_median * 1e3, single.size()));

    testing::TempDir dir("acceptance-500");
    GenSpec spec;
    spec.count = 500;
    spec.seed = 7;
    spec.out_dir = dir / "corpus";
    write_corpus(spec);
    IngestConfig ingest;
    ingest.created_at = "2026-01-01T00:00:00Z";
    auto t_ingest = std::chrono::steady_clock::now();
    auto big = ingest_corpus(spec.out_dir, dir / "index", ingest);
    double ingest_s = seconds_since(t_ingest);
    auto big_models = generate_models(spec);
    std::vector<double> times;
    std::size_t scored = 0;
    for (int s = 0; s < 9; ++s) {
        int i = s * 500 / 9 + 3;
        auto q = testing::surface_sketch(big_models[i].mesh, 4000 + i);
        auto t0 = std::chrono::steady_clock::now();
        auto out = search_sketch(q, big.bundle);
        times.push_back(seconds_since(t0));
        scored += out.total;
    }
    double worst = *std::max_element(times.begin(), times.end());
    report("performance: 500-model query", median(times) <= 5.0 && worst <= 60.0,
           fmt("median %.2f s, worst %.2f s over %zu queries (mean %.0f candidates scored; ingest %.0f s)",
               median(times), worst, times.size(), double(scored) / times.size(), ingest_s));
}

std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& root) {
    std::map<std::string, std::vector<std::uint8_t>> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
    return files;
}

void persistence(const fs::path& corpus, const fs::path& index_a, const IndexBundle& bundle) {
    testing::TempDir dir("acceptance-persist");
    IngestConfig config;
    config.created_at = "2026-01-01T00:00:00Z";
    ingest_corpus(corpus, dir / "again", config);
    auto a = snapshot(index_a), b = snapshot(dir / "again");
    bool deterministic = a == b;

    std::size_t vox_ok = 0, vox_total = 0;
    for (const auto& [rel, bytes] : a) {
        if (fs::path(rel).extension() != ".vox") continue;
        ++vox_total;
        vox_ok += encode_vox(decode_vox(bytes)) == bytes;
    }
    auto text_bytes = read_file(index_a / bundle.text_index_ref);
    bool text_ok = TextIndex::decode(text_bytes).encode() == text_bytes;
    auto catalog_text = read_text_file(index_a / "catalog.json");
    bool catalog_ok = catalog_to_json(catalog_from_json(catalog_text)) == catalog_text;
    save_bundle(load_bundle(index_a), dir / "resaved");
    auto c = snapshot(dir / "resaved");
    bool resave_ok = true;
    for (const auto& [rel, bytes] : c) resave_ok &= a.count(rel) && a.at(rel) == bytes;
    report("persistence", deterministic && vox_ok == vox_total && text_ok && catalog_ok && resave_ok,
           fmt("two ingests byte-identical: %s; .vox %zu/%zu, text.idx %s, catalog %s, load+save %s",
               deterministic ? "yes" : "no", vox_ok, vox_total, text_ok ? "ok" : "differs", catalog_ok ? "ok" : "differs",
               resave_ok ? "ok" : "differs"));
}

void scenarios(const std::vector<GeneratedModel>& models, const IndexBundle& bundle, IntersectionAudit& audit) {
    // a double ring drawn as two touching loops of 20 mm radius, 5 mm strokes
    SketchQuery ring;
    ring.stroke_radius_mm = 5.0;
    ring.term = "ring";
    for (double side : {-1.0, 1.0})
        ring.strokes.push_back(circle(Vec3(side * 25.0, 0, 0), 20.0, Vec3::UnitX(), Vec3::UnitY()));
    auto out = audit.run(ring, bundle);
    int best = -1;
    std::string best_id = "-";
    for (const auto& r : out.results) {
        auto it = std::find_if(models.begin(), models.end(), [&](const auto& m) { return m.id == r.id; });
        if (it != models.end() && it->family == Family::DoubleTorus) {
            best = r.rank;
            best_id = r.id;
            break;
        }
    }
    report("scenario: double ring", best >= 1 && best <= 3,
           fmt("best double ring %s at rank %d of %zu", best_id.c_str(), best, out.results.size()));

    // a traced pot: profile lines around the body plus rim, belly and foot circles
    const double height = 70.0, belly = 26.0;
    auto radius_at = [&](double z) {
        double t = z / height;
        return belly * (0.7 + 0.3 * std::sin(M_PI * std::min(1.0, t / 0.7)) - 0.25 * std::max(0.0, t - 0.7) / 0.3);
    };
    SketchQuery pot;
    pot.stroke_radius_mm = 1.5;
    for (int a = 0; a < 8; ++a) {
        double phi = 2.0 * M_PI * a / 8;
        Polyline line;
        for (int k = 0; k <= 28; ++k) {
            double z = height * k / 28;
            line.push_back(Vec3(radius_at(z) * std::cos(phi), radius_at(z) * std::sin(phi), z));
        }
        pot.strokes.push_back(line);
    }
    for (double z : {0.0, 0.35 * height, 0.7 * height, height})
        pot.strokes.push_back(circle(Vec3(0, 0, z), radius_at(z), Vec3::UnitX(), Vec3::UnitY()));
    auto prep = prepare_sketch(pot, bundle);

    std::vector<std::string> vessels;
    std::set<std::string> matched, mismatched;
    for (const auto& m : models) {
        if (m.family != Family::VaseProfile && m.family != Family::Bowl) continue;
        const auto& s = *bundle.find(m.id)->spatial;
        double d = std::hypot(s.r1 - prep.r1, s.r2 - prep.r2);
        vessels.push_back(m.id);
        if (d <= 0.2) matched.insert(m.id);
        if (d > 0.4) mismatched.insert(m.id);
    }
    auto ranked = rank_all(prep, bundle, vessels);
    int pairs = 0, ordered = 0;
    for (const auto& mi : matched)
        for (const auto& mm : mismatched) {
            ++pairs;
            ordered += rank_of(ranked, mi) < rank_of(ranked, mm);
        }
    pot.term = "pot";
    auto piped = audit.run(pot, bundle);
    pot.term = "vase";
    auto piped_vase = audit.run(pot, bundle);
    bool pipeline_ok = true;
    int pipeline_pairs = 0;
    for (const auto* res : {&piped.results, &piped_vase.results})
        for (const auto& a : *res)
            for (const auto& b : *res)
                if (matched.count(a.id) && mismatched.count(b.id)) {
                    ++pipeline_pairs;
                    pipeline_ok &= a.rank < b.rank;
                }
    report("scenario: traced pot", pairs > 0 && ordered == pairs && pipeline_ok,
           fmt("exhaustive ranking: %d/%d matched-before-mismatched vessel pairs (%zu matched, %zu mismatched); "
               "term searches: %d pairs %s",
               ordered, pairs, matched.size(), mismatched.size(), pipeline_pairs, pipeline_ok ? "ordered" : "misordered"));
}

} // namespace

int main(int argc, char** argv) {
    const bool strict = argc > 1 && std::string_view(argv[1]) == "--strict";
    auto started = std::chrono::steady_clock::now();
    try {
        testing::TempDir dir("acceptance");
        GenSpec spec;
        spec.count = 50;
        spec.seed = 7;
        spec.out_dir = dir / "corpus";
        write_corpus(spec);
        auto models = generate_models(spec);
        IngestConfig config;
        config.created_at = "2026-01-01T00:00:00Z";
        auto ingested = ingest_corpus(spec.out_dir, dir / "index", config);
        const auto& bundle = ingested.bundle;
        IntersectionAudit audit;

        auto cases = self_retrieval(models, bundle, audit);
        scale_invariance(cases, bundle);
        rotation_robustness(cases, bundle);
        overlap_identities();
        icp_properties();

        // the self-retrieval sketches again, restricted by each model's first tag
        for (const auto& c : cases) {
            auto q = c.sketch;
            q.term = c.model.tags.front();
            audit.run(q, bundle);
        }
        scenarios(models, bundle, audit);
        report("intersection semantics", audit.outside == 0 && audit.queries > 0,
               fmt("%zu results outside the text-match set across %zu term queries (%zu results)", audit.outside,
                   audit.queries, audit.results));

        text_weighting();
        persistence(spec.out_dir, dir / "index", bundle);
        performance(bundle, models);
    } catch (const std::exception& e) {
        report("acceptance run", false, std::string("aborted: ") + e.what());
        return 2;
    }
    std::printf("%s (%d failing, %.0f s)\n", failures ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED", failures,
                seconds_since(started));
    return strict && failures ? 1 : 0;
}
