#include "shapefind/ratio_index.h"

#include "shapefind/binary_io.h"
#include "shapefind/error.h"

#include <algorithm>
#include <cmath>

namespace shapefind {

RatioIndex::RatioIndex(std::vector<RatioEntry> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (i > 0 && entries_[i - 1].id == e.id) throw Error(ErrorKind::InvalidArgument, "duplicate ratio entry " + e.id);
        if (!(e.r1 > 0 && e.r1 <= 1 && e.r2 > 0 && e.r2 <= 1))
            throw Error(ErrorKind::InvalidArgument, "ratios of " + e.id + " outside (0, 1]");
    }
    build_buckets();
}

int RatioIndex::bucket_of(double r) { return std::clamp(static_cast<int>(std::floor(r * kBuckets)), 0, kBuckets - 1); }

void RatioIndex::build_buckets() {
    buckets_.assign(kBuckets * kBuckets, {});
    for (std::size_t i = 0; i < entries_.size(); ++i)
        buckets_[bucket_of(entries_[i].r1) * kBuckets + bucket_of(entries_[i].r2)].push_back(static_cast<std::uint32_t>(i));
}

std::vector<std::string> RatioIndex::within(double r1, double r2, double radius) const {
    std::vector<std::uint32_t> hits;
    if (radius >= 0 && !entries_.empty()) {
        int x0 = bucket_of(r1 - radius), x1 = bucket_of(r1 + radius);
        int y0 = bucket_of(r2 - radius), y1 = bucket_of(r2 + radius);
        const double rr = radius * radius;
        for (int x = x0; x <= x1; ++x)
            for (int y = y0; y <= y1; ++y)
                for (auto i : buckets_[x * kBuckets + y]) {
                    double d1 = entries_[i].r1 - r1, d2 = entries_[i].r2 - r2;
                    if (d1 * d1 + d2 * d2 <= rr) hits.push_back(i);
                }
    }
    std::sort(hits.begin(), hits.end());
    std::vector<std::string> out;
    out.reserve(hits.size());
    for (auto i : hits) out.push_back(entries_[i].id);
    return out;
}

std::vector<std::uint8_t> RatioIndex::encode() const {
    ByteWriter w;
    w.bytes(std::string_view("SFRT"));
    w.u16(kRatioIndexVersion);
    w.u32(static_cast<std::uint32_t>(entries_.size()));
    for (const auto& e : entries_) {
        w.str(e.id);
        w.f64(e.r1);
        w.f64(e.r2);
    }
    return w.take();
}

RatioIndex RatioIndex::decode(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "ratios.idx");
    if (r.bytes(4) != "SFRT") throw Error(ErrorKind::Parse, "ratios.idx: bad magic");
    auto version = r.u16();
    if (version != kRatioIndexVersion)
        throw Error(ErrorKind::Incompatible, "ratios.idx: format version " + std::to_string(version) + ", expected " +
                                                 std::to_string(kRatioIndexVersion));
    auto n = r.u32();
    std::vector<RatioEntry> entries;
    for (std::uint32_t i = 0; i < n; ++i) {
        RatioEntry e;
        e.id = r.str();
        e.r1 = r.f64();
        e.r2 = r.f64();
        entries.push_back(std::move(e));
    }
    if (!r.at_end()) throw Error(ErrorKind::Parse, "ratios.idx: trailing bytes at offset " + std::to_string(r.offset()));
    return RatioIndex(std::move(entries));
}

} // namespace shapefind
