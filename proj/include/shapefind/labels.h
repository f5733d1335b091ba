#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace shapefind {

struct LabelGuess {
    std::string term;
    double confidence = 0.0;
    friend bool operator==(const LabelGuess&, const LabelGuess&) = default;
};

inline constexpr std::size_t kMaxLabels = 10;

/// Sorts by confidence (descending, stable), drops invalid entries and keeps
/// at most kMaxLabels.
std::vector<LabelGuess> finalize_labels(std::vector<LabelGuess> guesses);

class LabelProvider {
public:
    virtual ~LabelProvider() = default;
    /// Throws Parse for undecodable images and Provider for upstream failures.
    virtual std::vector<LabelGuess> extract(std::span<const std::uint8_t> image) const = 0;
    virtual std::string name() const = 0;
};

/// Deterministic labels from a fixture table keyed by the SHA-256 of the
/// image bytes; unknown images get a single generic guess.
class StubLabelProvider : public LabelProvider {
public:
    StubLabelProvider() = default;
    explicit StubLabelProvider(std::map<std::string, std::vector<LabelGuess>> table) : table_(std::move(table)) {}
    static StubLabelProvider from_file(const std::filesystem::path& fixtures);

    std::vector<LabelGuess> extract(std::span<const std::uint8_t> image) const override;
    std::string name() const override { return "stub"; }

private:
    std::map<std::string, std::vector<LabelGuess>> table_;
};

/// Posts the raw image to an HTTP endpoint that answers with a JSON array of
/// {"label": text, "score": number}.
class HttpLabelProvider : public LabelProvider {
public:
    HttpLabelProvider(std::string endpoint, std::string api_key,
                      std::chrono::milliseconds timeout = std::chrono::seconds(10));

    std::vector<LabelGuess> extract(std::span<const std::uint8_t> image) const override;
    std::string name() const override { return "http"; }

private:
    std::string origin_;  // scheme://host[:port]
    std::string path_;
    std::string api_key_;
    std::chrono::milliseconds timeout_;
};

inline constexpr const char* kLabelsKeyEnv = "SHAPEFIND_LABELS_KEY";

/// "stub" or "http". The http provider needs an endpoint and the API key in
/// SHAPEFIND_LABELS_KEY; missing either is a Config error.
std::unique_ptr<LabelProvider> make_label_provider(const std::string& kind, const std::string& endpoint,
                                                   const std::filesystem::path& fixtures);

std::vector<LabelGuess> parse_label_response(const std::string& body);

} // namespace shapefind
