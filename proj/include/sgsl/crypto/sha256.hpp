#pragma once

#include <array>
#include <cstdint>
#include <cstddef>

#include "sgsl/common.hpp"

namespace sgsl::crypto {

using Digest = std::array<uint8_t, 32>;

class Sha256 {
public:
    Sha256() { reset(); }
    void reset();
    void update(const uint8_t* data, size_t len);
    void update(const Bytes& b) { update(b.data(), b.size()); }
    Digest finish();

private:
    void compress(const uint8_t* block);
    uint32_t state_[8];
    uint8_t buf_[64];
    size_t buf_len_;
    uint64_t total_;
};

Digest sha256(const uint8_t* data, size_t len);
Digest sha256(const Bytes& b);

Digest hmac_sha256(const uint8_t* key, size_t key_len, const uint8_t* msg, size_t msg_len);
Digest hmac_sha256(const Bytes& key, const Bytes& msg);

} // namespace sgsl::crypto
