#pragma once

#include <cstdint>
#include <cstddef>

namespace sgsl::crypto {

// AES-128 block encryption (FIPS 197); CTR mode needs no decryption path.
class Aes128 {
public:
    explicit Aes128(const uint8_t key[16]);
    void encrypt_block(const uint8_t in[16], uint8_t out[16]) const;

private:
    uint32_t round_keys_[44];
};

// CTR keystream xor in place: counter block = nonce (12 bytes) || big-endian
// 32-bit block counter starting at initial_block
void aes128_ctr_xor(const uint8_t key[16], const uint8_t nonce[12], uint32_t initial_block,
                    uint8_t* data, size_t len);

} // namespace sgsl::crypto
