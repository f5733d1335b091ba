#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace shapefind {

/// Lowercase, split on anything that is not an ASCII letter or digit (bytes
/// >= 0x80 are kept so UTF-8 words survive intact), drop English stopwords,
/// Porter-stem purely alphabetic tokens.
std::vector<std::string> normalize_text(std::string_view raw);

bool is_stopword(std::string_view lowercase_token);

enum class Field : std::uint8_t { Name = 0, Tags = 1, Description = 2, Category = 3 };

struct FieldWeights {
    double name = 10.0;
    double tags = 5.0;
    double description = 2.0;
    double category = 1.0;

    double of(Field f) const;
    /// name > tags > description > category > 0
    bool valid() const;
    friend bool operator==(const FieldWeights&, const FieldWeights&) = default;
};

struct TextDocument {
    std::string id;
    std::string name;
    std::vector<std::string> tags;
    std::string description;
    std::string category;
};

struct Posting {
    std::uint32_t doc;
    Field field;
    std::uint32_t tf;
    friend bool operator==(const Posting&, const Posting&) = default;
};

struct TextHit {
    std::string id;
    double score;
    friend bool operator==(const TextHit&, const TextHit&) = default;
};

inline constexpr std::uint16_t kTextIndexVersion = 1;

/// Inverted index over the four weighted fields. A document's score for a
/// query is the sum, over the distinct normalized query tokens, of
/// weight(field) * tf(token, field) across its fields.
class TextIndex {
public:
    TextIndex() = default;
    TextIndex(const std::vector<TextDocument>& docs, FieldWeights weights = {});

    /// Every matching document, best first; ties by ascending id.
    std::vector<TextHit> match(std::string_view raw_query) const;
    std::vector<TextHit> query(std::string_view raw_query, std::size_t limit, std::size_t offset = 0) const;

    const FieldWeights& weights() const { return weights_; }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::map<std::string, std::vector<Posting>, std::less<>>& terms() const { return terms_; }

    std::vector<std::uint8_t> encode() const;
    static TextIndex decode(std::span<const std::uint8_t> bytes);

    friend bool operator==(const TextIndex&, const TextIndex&) = default;

private:
    FieldWeights weights_;
    std::vector<std::string> ids_;
    std::map<std::string, std::vector<Posting>, std::less<>> terms_;
};

} // namespace shapefind
