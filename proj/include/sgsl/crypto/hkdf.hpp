#pragma once

#include <string>

#include "sgsl/common.hpp"
#include "sgsl/crypto/sha256.hpp"

namespace sgsl::crypto {

// HKDF-SHA256 extract-then-expand. length must be <= 255 * 32.
Bytes hkdf(const Bytes& ikm, const Bytes& salt, const std::string& context, size_t length);

struct SessionKeys {
    std::array<uint8_t, 32> k_enc{};
    std::array<uint8_t, 32> k_mask{};

    void zeroize();
    bool zeroized() const;
};

// k_enc / k_mask from the shared secret, bound to the session id via the
// salt and separated by the "enc"/"mask" context labels
SessionKeys derive_session_keys(const Bytes& shared_secret, const Bytes& session_id);

} // namespace sgsl::crypto
