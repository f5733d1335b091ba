#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace shapefind {

struct RatioEntry {
    std::string id;
    double r1;
    double r2;
    friend bool operator==(const RatioEntry&, const RatioEntry&) = default;
};

inline constexpr std::uint16_t kRatioIndexVersion = 1;

/// Bucketed 2D index over (r1, r2) in (0, 1]^2 for radius queries.
class RatioIndex {
public:
    static constexpr int kBuckets = 16;

    RatioIndex() = default;
    explicit RatioIndex(std::vector<RatioEntry> entries);

    /// Ids whose Euclidean distance to (r1, r2) is at most `radius`, sorted.
    std::vector<std::string> within(double r1, double r2, double radius) const;

    const std::vector<RatioEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    std::vector<std::uint8_t> encode() const;
    static RatioIndex decode(std::span<const std::uint8_t> bytes);

    friend bool operator==(const RatioIndex& a, const RatioIndex& b) { return a.entries_ == b.entries_; }

private:
    void build_buckets();
    static int bucket_of(double r);

    std::vector<RatioEntry> entries_;  // sorted by id
    std::vector<std::vector<std::uint32_t>> buckets_;
};

} // namespace shapefind
