#include "shapefind/binary_io.h"
#include "shapefind/catalog.h"
#include "shapefind/corpus_gen.h"
#include "shapefind/error.h"
#include "shapefind/labels.h"
#include "shapefind/query.h"
#include "shapefind/service.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <csignal>
#include <cstdio>
#include <iostream>
#include <pthread.h>
#include <thread>

using namespace shapefind;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

int exit_code_for(const Error& e) {
    switch (e.kind()) {
    case ErrorKind::Config: return kExitUsage;
    case ErrorKind::Parse:
    case ErrorKind::Degenerate:
    case ErrorKind::InvalidArgument:
    case ErrorKind::NotFound:
    case ErrorKind::Incompatible: return kExitData;
    default: return kExitRuntime;
    }
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

struct IngestArgs {
    std::string corpus, out, categories, fill = "shell", open_meshes = "shell", created_at;
    unsigned threads = 0;
};

int cmd_ingest(const IngestArgs& a) {
    IngestConfig config;
    if (!a.categories.empty()) config.categories = CategoryMap::from_json_file(a.categories);
    config.fill = a.fill == "auto" ? VoxelFill::Auto : a.fill == "solid" ? VoxelFill::Solid : VoxelFill::Shell;
    config.open_meshes = a.open_meshes == "text-only" ? OpenMeshPolicy::TextOnly : OpenMeshPolicy::Shell;
    if (!a.created_at.empty()) config.created_at = a.created_at;
    config.threads = a.threads;
    auto result = ingest_corpus(a.corpus, a.out, config);
    for (const auto& issue : result.report.issues)
        std::cerr << (issue.fatal_for_model ? "skipped " : "warning ") << issue.id << ": " << issue.message << "\n";
    std::cout << result.report.summary() << "\n";
    return 0;
}

struct SearchArgs {
    std::string index, term, sketch;
    int limit = kDefaultLimit;
    int offset = 0;
    bool json = false;
    bool require_term = false;
    unsigned threads = 0;
};

int cmd_search_text(const SearchArgs& a) {
    auto bundle = load_bundle(a.index);
    auto results = search_text(bundle, a.term, a.limit, a.offset);
    if (a.json) {
        auto j = text_search_json(results, bundle, a.limit, a.offset);
        j["total"] = bundle.text.match(a.term).size();
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    std::printf("%-5s %-10s %-40s %10s\n", "rank", "id", "name", "score");
    for (const auto& r : results)
        std::printf("%-5d %-10s %-40s %10.3f\n", r.rank, r.id.c_str(), bundle.find(r.id)->name.c_str(), r.text_score);
    return 0;
}

int cmd_search_sketch(const SearchArgs& a) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(a.sketch));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, a.sketch + ": " + e.what());
    }
    auto q = sketch_from_json(doc);
    if (!a.term.empty()) q.term = a.term;
    if (a.limit != kDefaultLimit) q.limit = a.limit;
    if (a.offset != 0) q.offset = a.offset;
    q.validate();
    auto bundle = load_bundle(a.index);
    QueryConfig config;
    config.require_term = a.require_term;
    config.threads = a.threads;
    auto s = search_sketch(q, bundle, config);
    if (a.json) {
        std::cout << sketch_search_json(s, bundle, q.limit, q.offset).dump(2) << "\n";
        return 0;
    }
    std::printf("%-5s %-10s %-32s %8s %11s %10s %15s\n", "rank", "id", "name", "avg", "sketch_norm", "model_norm",
                "suggested_scale");
    for (const auto& r : s.results)
        std::printf("%-5d %-10s %-32s %8.4f %11.4f %10.4f %15.4f\n", r.rank, r.id.c_str(),
                    bundle.find(r.id)->name.c_str(), r.score.avg, r.score.sketch_norm, r.score.model_norm,
                    r.suggested_scale);
    std::printf("%zu scored\n", s.total);
    return 0;
}

struct GenArgs {
    std::string out, families;
    int n = 10;
    std::uint64_t seed = 7;
};

int cmd_gen_corpus(const GenArgs& a) {
    GenSpec spec;
    spec.out_dir = a.out;
    spec.count = a.n;
    spec.seed = a.seed;
    if (!a.families.empty()) {
        spec.families.clear();
        for (const auto& name : split_list(a.families)) {
            auto f = family_from_name(name);
            if (!f) throw Error(ErrorKind::Config, "unknown family: " + name);
            spec.families.push_back(*f);
        }
    }
    write_corpus(spec);
    std::cout << "wrote " << a.n << " models to " << a.out << "\n";
    return 0;
}

struct ServeArgs {
    std::string index, host = "0.0.0.0", labels_provider = "stub", labels_endpoint, labels_fixtures = "fixtures/labels.json",
                       cors_origin;
    int port = 8080;
    unsigned max_concurrency = 0;
    double timeout_s = 120;
};

int cmd_serve(const ServeArgs& a) {
    ServiceConfig config;
    config.host = a.host;
    config.port = a.port;
    if (!a.cors_origin.empty()) config.cors_origin = a.cors_origin;
    config.max_concurrency = a.max_concurrency;
    config.request_timeout = std::chrono::milliseconds(static_cast<long long>(a.timeout_s * 1000));
    config.labels = make_label_provider(a.labels_provider, a.labels_endpoint, a.labels_fixtures);
    auto bundle = std::make_shared<const IndexBundle>(load_bundle(a.index));

    // Termination signals are taken synchronously by a dedicated thread so
    // the server can be stopped outside of signal context.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    Service service(bundle, config);
    int port = service.bind();
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        service.stop();
    });
    std::cerr << "serving " << bundle->catalog.size() << " models on " << a.host << ":" << port << "\n";
    int rc = 0;
    try {
        service.listen();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        rc = kExitRuntime;
    }
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return rc;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sketch-based 3D model retrieval"};
    app.require_subcommand(1);
    std::function<int()> run;

    IngestArgs ingest;
    auto* ing = app.add_subcommand("ingest", "Build an index from a corpus directory");
    ing->add_option("corpus", ingest.corpus, "Corpus directory")->required();
    ing->add_option("--out", ingest.out, "Index directory")->required();
    ing->add_option("--categories", ingest.categories, "JSON map of source -> canonical category");
    ing->add_option("--fill", ingest.fill, "Voxel fill")->check(CLI::IsMember({"shell", "solid", "auto"}));
    ing->add_option("--open-meshes", ingest.open_meshes, "Treatment of non-watertight meshes")
        ->check(CLI::IsMember({"shell", "text-only"}));
    ing->add_option("--created-at", ingest.created_at, "Fixed build timestamp");
    ing->add_option("--threads", ingest.threads, "Worker threads (0: all cores)");
    ing->callback([&] { run = [&] { return cmd_ingest(ingest); }; });

    ServeArgs serve;
    auto* srv = app.add_subcommand("serve", "Serve the REST API");
    srv->add_option("--index", serve.index, "Index directory")->required();
    srv->add_option("--host", serve.host, "Listen address");
    srv->add_option("--port", serve.port, "Listen port")->check(CLI::Range(0, 65535));
    srv->add_option("--labels-provider", serve.labels_provider, "Label provider")
        ->check(CLI::IsMember({"stub", "http"}));
    srv->add_option("--labels-endpoint", serve.labels_endpoint, "Remote label provider URL");
    srv->add_option("--labels-fixtures", serve.labels_fixtures, "Stub label table");
    srv->add_option("--cors-origin", serve.cors_origin, "Allowed browser origin");
    srv->add_option("--max-concurrency", serve.max_concurrency, "Concurrent heavy requests (0: logical cores)");
    srv->add_option("--timeout", serve.timeout_s, "Per-request time budget in seconds")->check(CLI::PositiveNumber);
    srv->callback([&] { run = [&] { return cmd_serve(serve); }; });

    SearchArgs text;
    auto* st = app.add_subcommand("search-text", "Ranked text search");
    st->add_option("--index", text.index, "Index directory")->required();
    st->add_option("term", text.term, "Query")->required();
    st->add_option("--limit", text.limit, "Page size");
    st->add_option("--offset", text.offset, "Results to skip");
    st->add_flag("--json", text.json, "Emit the API result schema");
    st->callback([&] { run = [&] { return cmd_search_text(text); }; });

    SearchArgs sketch;
    auto* ss = app.add_subcommand("search-sketch", "Rank models against a sketch file");
    ss->add_option("--index", sketch.index, "Index directory")->required();
    ss->add_option("--sketch", sketch.sketch, "Sketch JSON")->required();
    ss->add_option("--term", sketch.term, "Text pre-filter");
    ss->add_option("--limit", sketch.limit, "Page size");
    ss->add_option("--offset", sketch.offset, "Results to skip");
    ss->add_option("--threads", sketch.threads, "Worker threads (0: all cores)");
    ss->add_flag("--require-term", sketch.require_term, "Reject queries without a restricting term");
    ss->add_flag("--json", sketch.json, "Emit the API result schema");
    ss->callback([&] { run = [&] { return cmd_search_sketch(sketch); }; });

    GenArgs gen;
    auto* gc = app.add_subcommand("gen-corpus", "Write a seeded procedural corpus");
    gc->add_option("--out", gen.out, "Output directory")->required();
    gc->add_option("--n", gen.n, "Model count")->check(CLI::NonNegativeNumber);
    gc->add_option("--seed", gen.seed, "Seed");
    gc->add_option("--families", gen.families, "Comma-separated family names");
    gc->callback([&] { run = [&] { return cmd_gen_corpus(gen); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }
    try {
        return run();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
