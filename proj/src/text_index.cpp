#include "shapefind/text_index.h"

#include "shapefind/binary_io.h"
#include "shapefind/error.h"
#include "shapefind/porter_stemmer.h"

#include <algorithm>
#include <array>
#include <set>
#include <unordered_map>

namespace shapefind {

namespace {

// English stopwords as used by common NLP toolkits, restricted to entries
// that can survive tokenization (no apostrophes).
constexpr std::string_view kStopwords[] = {
    "a",        "about",     "above",   "after",    "again",   "against", "ain",     "all",      "am",
    "an",       "and",       "any",     "are",      "aren",    "as",      "at",      "be",       "because",
    "been",     "before",    "being",   "below",    "between", "both",    "but",     "by",       "can",
    "couldn",   "d",         "did",     "didn",     "do",      "does",    "doesn",   "doing",    "don",
    "down",     "during",    "each",    "few",      "for",     "from",    "further", "hadn",     "has",
    "hasn",     "have",      "haven",   "having",   "he",      "her",     "here",    "hers",     "herself",
    "him",      "himself",   "his",     "how",      "i",       "if",      "in",      "into",     "is",
    "isn",      "it",        "its",     "itself",   "just",    "ll",      "m",       "ma",       "me",
    "mightn",   "more",      "most",    "mustn",    "my",      "myself",  "needn",   "no",       "nor",
    "not",      "now",       "o",       "of",       "off",     "on",      "once",    "only",     "or",
    "other",    "our",       "ours",    "ourselves", "out",    "over",    "own",     "re",       "s",
    "same",     "shan",      "she",     "should",   "shouldn", "so",      "some",    "such",     "t",
    "than",     "that",      "the",     "their",    "theirs",  "them",    "themselves", "then",  "there",
    "these",    "they",      "this",    "those",    "through", "to",      "too",     "under",    "until",
    "up",       "ve",        "very",    "was",      "wasn",    "we",      "were",    "weren",    "what",
    "when",     "where",     "which",   "while",    "who",     "whom",    "why",     "will",     "with",
    "won",      "wouldn",    "y",       "you",      "your",    "yours",   "yourself", "yourselves",
};

bool word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

bool ascii_alpha(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

} // namespace

bool is_stopword(std::string_view token) {
    return std::find(std::begin(kStopwords), std::end(kStopwords), token) != std::end(kStopwords);
}

std::vector<std::string> normalize_text(std::string_view raw) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        if (!is_stopword(cur)) {
            std::string t = ascii_alpha(cur) ? porter_stem(cur) : cur;
            if (!t.empty()) out.push_back(std::move(t));
        }
        cur.clear();
    };
    for (unsigned char c : raw) {
        if (word_byte(c)) {
            cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

double FieldWeights::of(Field f) const {
    switch (f) {
    case Field::Name: return name;
    case Field::Tags: return tags;
    case Field::Description: return description;
    case Field::Category: return category;
    }
    return 0.0;
}

bool FieldWeights::valid() const { return name > tags && tags > description && description > category && category > 0; }

TextIndex::TextIndex(const std::vector<TextDocument>& docs, FieldWeights weights) : weights_(weights) {
    if (!weights_.valid())
        throw Error(ErrorKind::InvalidArgument, "field weights must satisfy name > tags > description > category > 0");
    std::vector<std::size_t> order(docs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return docs[a].id < docs[b].id; });

    for (auto i : order) {
        const auto& d = docs[i];
        if (!ids_.empty() && ids_.back() == d.id) throw Error(ErrorKind::InvalidArgument, "duplicate document id: " + d.id);
        auto doc = static_cast<std::uint32_t>(ids_.size());
        ids_.push_back(d.id);

        std::string tags;
        for (const auto& t : d.tags) tags += t + "\n";
        const std::pair<Field, std::string_view> fields[] = {
            {Field::Name, d.name}, {Field::Tags, tags}, {Field::Description, d.description}, {Field::Category, d.category}};
        for (auto [field, text] : fields) {
            std::map<std::string, std::uint32_t> tf;
            for (auto& tok : normalize_text(text)) ++tf[tok];
            for (auto& [tok, n] : tf) terms_[tok].push_back({doc, field, n});
        }
    }
}

std::vector<TextHit> TextIndex::match(std::string_view raw_query) const {
    auto tokens = normalize_text(raw_query);
    std::set<std::string> distinct(tokens.begin(), tokens.end());
    std::unordered_map<std::uint32_t, double> scores;
    for (const auto& tok : distinct) {
        auto it = terms_.find(tok);
        if (it == terms_.end()) continue;
        for (const auto& p : it->second) scores[p.doc] += weights_.of(p.field) * p.tf;
    }
    std::vector<std::pair<std::uint32_t, double>> ranked(scores.begin(), scores.end());
    // Doc numbers follow id order, so ascending doc is ascending id.
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<TextHit> out;
    out.reserve(ranked.size());
    for (auto& [doc, s] : ranked) out.push_back({ids_[doc], s});
    return out;
}

std::vector<TextHit> TextIndex::query(std::string_view raw_query, std::size_t limit, std::size_t offset) const {
    auto all = match(raw_query);
    if (offset >= all.size()) return {};
    auto end = offset + std::min(limit, all.size() - offset);
    return {all.begin() + static_cast<std::ptrdiff_t>(offset), all.begin() + static_cast<std::ptrdiff_t>(end)};
}

std::vector<std::uint8_t> TextIndex::encode() const {
    ByteWriter w;
    w.bytes(std::string_view("SFTX"));
    w.u16(kTextIndexVersion);
    for (double x : {weights_.name, weights_.tags, weights_.description, weights_.category}) w.f64(x);
    w.u32(static_cast<std::uint32_t>(ids_.size()));
    for (const auto& id : ids_) w.str(id);
    w.u32(static_cast<std::uint32_t>(terms_.size()));
    for (const auto& [term, postings] : terms_) {
        w.str(term);
        w.u32(static_cast<std::uint32_t>(postings.size()));
        for (const auto& p : postings) {
            w.u32(p.doc);
            w.u8(static_cast<std::uint8_t>(p.field));
            w.u32(p.tf);
        }
    }
    return w.take();
}

TextIndex TextIndex::decode(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "text.idx");
    if (r.bytes(4) != "SFTX") throw Error(ErrorKind::Parse, "text.idx: bad magic");
    auto version = r.u16();
    if (version != kTextIndexVersion)
        throw Error(ErrorKind::Incompatible, "text.idx: format version " + std::to_string(version) + ", expected " +
                                                 std::to_string(kTextIndexVersion));
    TextIndex idx;
    idx.weights_.name = r.f64();
    idx.weights_.tags = r.f64();
    idx.weights_.description = r.f64();
    idx.weights_.category = r.f64();
    auto docs = r.u32();
    for (std::uint32_t i = 0; i < docs; ++i) idx.ids_.push_back(r.str());
    auto terms = r.u32();
    std::string prev;
    for (std::uint32_t i = 0; i < terms; ++i) {
        auto term = r.str();
        if (i > 0 && term <= prev) throw Error(ErrorKind::Parse, "text.idx: term dictionary not sorted at " + term);
        auto n = r.u32();
        std::vector<Posting> postings;
        postings.reserve(n);
        for (std::uint32_t k = 0; k < n; ++k) {
            Posting p;
            p.doc = r.u32();
            auto f = r.u8();
            p.tf = r.u32();
            if (p.doc >= docs || f > 3 || p.tf == 0)
                throw Error(ErrorKind::Parse, "text.idx: invalid posting for term " + term);
            p.field = static_cast<Field>(f);
            postings.push_back(p);
        }
        prev = term;
        idx.terms_.emplace(std::move(term), std::move(postings));
    }
    if (!r.at_end()) throw Error(ErrorKind::Parse, "text.idx: trailing bytes at offset " + std::to_string(r.offset()));
    return idx;
}

} // namespace shapefind
