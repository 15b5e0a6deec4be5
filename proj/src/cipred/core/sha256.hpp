#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

namespace cipred {

// Streaming SHA-256, self-contained (FIPS 180-4).
class Sha256 {
public:
    Sha256() { reset(); }

    void reset();
    void update(const void* data, std::size_t len);
    // Finalizes and returns the lowercase hex digest.
    std::string hex_digest();

    static std::string of_bytes(const void* data, std::size_t len) {
        Sha256 h;
        h.update(data, len);
        return h.hex_digest();
    }
    static std::string of_file(const std::string& path);

private:
    void process_block(const std::uint8_t* block);

    std::uint32_t h_[8];
    std::uint8_t buf_[64];
    std::size_t buf_len_;
    std::uint64_t total_len_;
};

}  // namespace cipred
