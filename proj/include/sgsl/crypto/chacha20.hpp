#pragma once

#include <array>
#include <cstdint>
#include <cstddef>

namespace sgsl::crypto {

// ChaCha20 keystream (RFC 8439 layout: 32-byte key, 12-byte nonce,
// 32-bit block counter). Only the keystream is exposed; callers xor or
// add it themselves.
void chacha20_keystream(const uint8_t key[32], const uint8_t nonce[12], uint32_t initial_block,
                        uint8_t* out, size_t len);

// convenience: fill a word buffer (little-endian keystream words)
void chacha20_words(const uint8_t key[32], const uint8_t nonce[12], uint32_t initial_block,
                    uint32_t* out, size_t count);

} // namespace sgsl::crypto
