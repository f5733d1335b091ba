#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace shapefind {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view data);

/// Incremental SHA-256 for hashing a corpus file by file.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::span<const std::uint8_t> data);
    void update(std::string_view data);
    std::string hex_digest();

private:
    void* ctx_;
};

} // namespace shapefind
