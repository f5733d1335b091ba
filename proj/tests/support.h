#pragma once

#include "shapefind/corpus_gen.h"
#include "shapefind/mesh.h"

#include "json.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>

namespace testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("shapefind-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

/// Writes `<dir>/<id>/{mesh.stl, meta.json}`.
inline void write_model(const fs::path& corpus, const std::string& id, const shapefind::TriangleMesh& mesh,
                        const nlohmann::json& meta) {
    auto bytes = shapefind::write_stl_binary(mesh);
    fs::create_directories(corpus / id);
    std::ofstream(corpus / id / "mesh.stl", std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    write_text(corpus / id / "meta.json", meta.dump(2));
}

inline nlohmann::json meta(const std::string& name, const std::string& category = "misc",
                           std::vector<std::string> tags = {}, const std::string& description = "") {
    return {{"name", name}, {"description", description}, {"tags", tags}, {"category", category}};
}

inline shapefind::Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    return q.normalized().toRotationMatrix();
}

} // namespace testing
