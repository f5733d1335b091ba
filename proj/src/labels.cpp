#include "shapefind/labels.h"

#include "shapefind/binary_io.h"
#include "shapefind/error.h"
#include "shapefind/hashing.h"
#include "shapefind/image.h"

#include "httplib.h"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace shapefind {

using nlohmann::json;

std::vector<LabelGuess> finalize_labels(std::vector<LabelGuess> guesses) {
    std::erase_if(guesses, [](const LabelGuess& g) {
        return g.term.empty() || !std::isfinite(g.confidence) || g.confidence < 0.0 || g.confidence > 1.0;
    });
    std::stable_sort(guesses.begin(), guesses.end(),
                     [](const LabelGuess& a, const LabelGuess& b) { return a.confidence > b.confidence; });
    if (guesses.size() > kMaxLabels) guesses.resize(kMaxLabels);
    return guesses;
}

std::vector<LabelGuess> parse_label_response(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Provider, std::string("label provider returned invalid JSON: ") + e.what());
    }
    if (!j.is_array()) throw Error(ErrorKind::Provider, "label provider response is not a JSON array");
    std::vector<LabelGuess> out;
    for (const auto& item : j) {
        if (!item.is_object() || !item.contains("label") || !item["label"].is_string() || !item.contains("score") ||
            !item["score"].is_number())
            throw Error(ErrorKind::Provider, "label provider entry must be {\"label\": text, \"score\": number}");
        out.push_back({item["label"].get<std::string>(), item["score"].get<double>()});
    }
    return finalize_labels(std::move(out));
}

StubLabelProvider StubLabelProvider::from_file(const std::filesystem::path& fixtures) {
    json j;
    try {
        j = json::parse(read_text_file(fixtures));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, fixtures.string() + ": " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::Config, fixtures.string() + ": expected an object keyed by SHA-256");
    std::map<std::string, std::vector<LabelGuess>> table;
    for (auto& [hash, list] : j.items()) {
        try {
            table[hash] = parse_label_response(list.dump());
        } catch (const Error& e) {
            throw Error(ErrorKind::Config, fixtures.string() + ": entry " + hash + ": " + e.what());
        }
    }
    return StubLabelProvider(std::move(table));
}

std::vector<LabelGuess> StubLabelProvider::extract(std::span<const std::uint8_t> image) const {
    decode_image(image);
    auto it = table_.find(sha256_hex(image));
    if (it == table_.end()) return {{"object", 0.5}};
    return it->second;
}

HttpLabelProvider::HttpLabelProvider(std::string endpoint, std::string api_key, std::chrono::milliseconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
    auto scheme = endpoint.find("://");
    if (scheme == std::string::npos || endpoint.compare(0, scheme, "http") != 0)
        throw Error(ErrorKind::Config, "labels endpoint must be an http:// URL: " + endpoint);
    auto slash = endpoint.find('/', scheme + 3);
    origin_ = endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : endpoint.substr(slash);
    if (origin_.size() <= scheme + 3) throw Error(ErrorKind::Config, "labels endpoint has no host: " + endpoint);
}

std::vector<LabelGuess> HttpLabelProvider::extract(std::span<const std::uint8_t> image) const {
    auto info = decode_image(image);
    httplib::Client client(origin_);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    auto res = client.Post(path_, headers, reinterpret_cast<const char*>(image.data()), image.size(), mime_type(info.format));
    if (!res) throw Error(ErrorKind::Provider, "label provider unreachable: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw Error(ErrorKind::Provider, "label provider returned HTTP " + std::to_string(res->status));
    return parse_label_response(res->body);
}

std::unique_ptr<LabelProvider> make_label_provider(const std::string& kind, const std::string& endpoint,
                                                   const std::filesystem::path& fixtures) {
    if (kind == "stub") {
        if (fixtures.empty() || !std::filesystem::exists(fixtures)) return std::make_unique<StubLabelProvider>();
        return std::make_unique<StubLabelProvider>(StubLabelProvider::from_file(fixtures));
    }
    if (kind == "http") {
        if (endpoint.empty()) throw Error(ErrorKind::Config, "http label provider needs --labels-endpoint");
        const char* key = std::getenv(kLabelsKeyEnv);
        if (!key || !*key) throw Error(ErrorKind::Config, std::string("http label provider needs ") + kLabelsKeyEnv);
        return std::make_unique<HttpLabelProvider>(endpoint, key);
    }
    throw Error(ErrorKind::Config, "unknown label provider: " + kind);
}

} // namespace shapefind
