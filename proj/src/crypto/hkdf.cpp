#include "sgsl/crypto/hkdf.hpp"

#include <cstring>

namespace sgsl::crypto {

Bytes hkdf(const Bytes& ikm, const Bytes& salt, const std::string& context, size_t length) {
    if (length > 255 * 32) throw ContractError("hkdf: requested length too large");
    Digest prk = hmac_sha256(salt.data(), salt.size(), ikm.data(), ikm.size());

    Bytes out;
    out.reserve(length);
    Bytes t;
    uint8_t counter = 1;
    while (out.size() < length) {
        Bytes block = t;
        block.insert(block.end(), context.begin(), context.end());
        block.push_back(counter++);
        Digest d = hmac_sha256(prk.data(), prk.size(), block.data(), block.size());
        t.assign(d.begin(), d.end());
        size_t take = std::min(t.size(), length - out.size());
        out.insert(out.end(), t.begin(), t.begin() + static_cast<std::ptrdiff_t>(take));
    }
    return out;
}

void SessionKeys::zeroize() {
    // volatile writes so the clears are not optimized away
    volatile uint8_t* e = k_enc.data();
    volatile uint8_t* m = k_mask.data();
    for (size_t i = 0; i < 32; i++) {
        e[i] = 0;
        m[i] = 0;
    }
}

bool SessionKeys::zeroized() const {
    for (uint8_t b : k_enc)
        if (b) return false;
    for (uint8_t b : k_mask)
        if (b) return false;
    return true;
}

SessionKeys derive_session_keys(const Bytes& shared_secret, const Bytes& session_id) {
    SessionKeys keys;
    Bytes enc = hkdf(shared_secret, session_id, "enc", 32);
    Bytes mask = hkdf(shared_secret, session_id, "mask", 32);
    std::memcpy(keys.k_enc.data(), enc.data(), 32);
    std::memcpy(keys.k_mask.data(), mask.data(), 32);
    return keys;
}

} // namespace sgsl::crypto
