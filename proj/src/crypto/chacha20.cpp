#include "sgsl/crypto/chacha20.hpp"

#include <cstring>

namespace sgsl::crypto {

namespace {

inline uint32_t rotl(uint32_t x, int n) { return (x << n) | (x >> (32 - n)); }

inline void quarter(uint32_t& a, uint32_t& b, uint32_t& c, uint32_t& d) {
    a += b;
    d ^= a;
    d = rotl(d, 16);
    c += d;
    b ^= c;
    b = rotl(b, 12);
    a += b;
    d ^= a;
    d = rotl(d, 8);
    c += d;
    b ^= c;
    b = rotl(b, 7);
}

inline uint32_t load32le(const uint8_t* p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

void block(const uint32_t in[16], uint32_t out[16]) {
    uint32_t x[16];
    std::memcpy(x, in, sizeof(x));
    for (int round = 0; round < 10; round++) {
        quarter(x[0], x[4], x[8], x[12]);
        quarter(x[1], x[5], x[9], x[13]);
        quarter(x[2], x[6], x[10], x[14]);
        quarter(x[3], x[7], x[11], x[15]);
        quarter(x[0], x[5], x[10], x[15]);
        quarter(x[1], x[6], x[11], x[12]);
        quarter(x[2], x[7], x[8], x[13]);
        quarter(x[3], x[4], x[9], x[14]);
    }
    for (int i = 0; i < 16; i++) out[i] = x[i] + in[i];
}

} // namespace

void chacha20_keystream(const uint8_t key[32], const uint8_t nonce[12], uint32_t initial_block,
                        uint8_t* out, size_t len) {
    uint32_t state[16];
    state[0] = 0x61707865;
    state[1] = 0x3320646e;
    state[2] = 0x79622d32;
    state[3] = 0x6b206574;
    for (int i = 0; i < 8; i++) state[4 + i] = load32le(key + 4 * i);
    state[12] = initial_block;
    state[13] = load32le(nonce);
    state[14] = load32le(nonce + 4);
    state[15] = load32le(nonce + 8);

    uint32_t ks[16];
    while (len > 0) {
        block(state, ks);
        state[12]++;
        uint8_t bytes[64];
        for (int i = 0; i < 16; i++) {
            bytes[4 * i] = static_cast<uint8_t>(ks[i]);
            bytes[4 * i + 1] = static_cast<uint8_t>(ks[i] >> 8);
            bytes[4 * i + 2] = static_cast<uint8_t>(ks[i] >> 16);
            bytes[4 * i + 3] = static_cast<uint8_t>(ks[i] >> 24);
        }
        size_t take = std::min(len, size_t{64});
        std::memcpy(out, bytes, take);
        out += take;
        len -= take;
    }
}

void chacha20_words(const uint8_t key[32], const uint8_t nonce[12], uint32_t initial_block,
                    uint32_t* out, size_t count) {
    // keystream words are the little-endian interpretation of the byte stream
    chacha20_keystream(key, nonce, initial_block, reinterpret_cast<uint8_t*>(out), count * 4);
#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ == __ORDER_BIG_ENDIAN__
    for (size_t i = 0; i < count; i++) {
        uint8_t* p = reinterpret_cast<uint8_t*>(&out[i]);
        out[i] = uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
                 (uint32_t(p[3]) << 24);
    }
#endif
}

} // namespace sgsl::crypto
