#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace xforge {

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a file's contents; throws std::runtime_error if unreadable.
std::string sha256_file(const std::filesystem::path& path);

/// First 8 bytes of SHA-256 as an integer. Stable across platforms.
std::uint64_t hash64(std::string_view data);

/// Incremental SHA-256 for digesting several files or records in sequence.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::string_view data);
    std::string hex_digest();

private:
    void* ctx_;
};

}  // namespace xforge
