#include "sgsl/crypto/aes.hpp"

#include <algorithm>
#include <cstring>

namespace sgsl::crypto {

namespace {

constexpr uint8_t SBOX[256] = {
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16};

inline uint8_t xtime(uint8_t x) { return static_cast<uint8_t>((x << 1) ^ ((x >> 7) * 0x1b)); }

// encryption T-tables built once from the S-box
struct Tables {
    uint32_t t0[256], t1[256], t2[256], t3[256];
    Tables() {
        for (int i = 0; i < 256; i++) {
            uint8_t s = SBOX[i];
            uint8_t s2 = xtime(s);
            uint8_t s3 = static_cast<uint8_t>(s2 ^ s);
            uint32_t w = (uint32_t(s2) << 24) | (uint32_t(s) << 16) | (uint32_t(s) << 8) | s3;
            t0[i] = w;
            t1[i] = (w >> 8) | (w << 24);
            t2[i] = (w >> 16) | (w << 16);
            t3[i] = (w >> 24) | (w << 8);
        }
    }
};

const Tables& tables() {
    static const Tables t;
    return t;
}

inline uint32_t load_be(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | p[3];
}

inline void store_be(uint8_t* p, uint32_t v) {
    p[0] = static_cast<uint8_t>(v >> 24);
    p[1] = static_cast<uint8_t>(v >> 16);
    p[2] = static_cast<uint8_t>(v >> 8);
    p[3] = static_cast<uint8_t>(v);
}

} // namespace

Aes128::Aes128(const uint8_t key[16]) {
    static constexpr uint8_t RCON[10] = {0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1b, 0x36};
    for (int i = 0; i < 4; i++) round_keys_[i] = load_be(key + 4 * i);
    for (int i = 4; i < 44; i++) {
        uint32_t t = round_keys_[i - 1];
        if (i % 4 == 0) {
            t = (t << 8) | (t >> 24); // RotWord
            t = (uint32_t(SBOX[(t >> 24) & 0xff]) << 24) | (uint32_t(SBOX[(t >> 16) & 0xff]) << 16) |
                (uint32_t(SBOX[(t >> 8) & 0xff]) << 8) | SBOX[t & 0xff];
            t ^= uint32_t(RCON[i / 4 - 1]) << 24;
        }
        round_keys_[i] = round_keys_[i - 4] ^ t;
    }
}

void Aes128::encrypt_block(const uint8_t in[16], uint8_t out[16]) const {
    const Tables& T = tables();
    uint32_t s0 = load_be(in) ^ round_keys_[0];
    uint32_t s1 = load_be(in + 4) ^ round_keys_[1];
    uint32_t s2 = load_be(in + 8) ^ round_keys_[2];
    uint32_t s3 = load_be(in + 12) ^ round_keys_[3];

    for (int round = 1; round < 10; round++) {
        uint32_t u0 = T.t0[(s0 >> 24) & 0xff] ^ T.t1[(s1 >> 16) & 0xff] ^ T.t2[(s2 >> 8) & 0xff] ^
                      T.t3[s3 & 0xff] ^ round_keys_[4 * round];
        uint32_t u1 = T.t0[(s1 >> 24) & 0xff] ^ T.t1[(s2 >> 16) & 0xff] ^ T.t2[(s3 >> 8) & 0xff] ^
                      T.t3[s0 & 0xff] ^ round_keys_[4 * round + 1];
        uint32_t u2 = T.t0[(s2 >> 24) & 0xff] ^ T.t1[(s3 >> 16) & 0xff] ^ T.t2[(s0 >> 8) & 0xff] ^
                      T.t3[s1 & 0xff] ^ round_keys_[4 * round + 2];
        uint32_t u3 = T.t0[(s3 >> 24) & 0xff] ^ T.t1[(s0 >> 16) & 0xff] ^ T.t2[(s1 >> 8) & 0xff] ^
                      T.t3[s2 & 0xff] ^ round_keys_[4 * round + 3];
        s0 = u0;
        s1 = u1;
        s2 = u2;
        s3 = u3;
    }

    // final round: SubBytes + ShiftRows + AddRoundKey, no MixColumns
    uint32_t f0 = (uint32_t(SBOX[(s0 >> 24) & 0xff]) << 24) | (uint32_t(SBOX[(s1 >> 16) & 0xff]) << 16) |
                  (uint32_t(SBOX[(s2 >> 8) & 0xff]) << 8) | SBOX[s3 & 0xff];
    uint32_t f1 = (uint32_t(SBOX[(s1 >> 24) & 0xff]) << 24) | (uint32_t(SBOX[(s2 >> 16) & 0xff]) << 16) |
                  (uint32_t(SBOX[(s3 >> 8) & 0xff]) << 8) | SBOX[s0 & 0xff];
    uint32_t f2 = (uint32_t(SBOX[(s2 >> 24) & 0xff]) << 24) | (uint32_t(SBOX[(s3 >> 16) & 0xff]) << 16) |
                  (uint32_t(SBOX[(s0 >> 8) & 0xff]) << 8) | SBOX[s1 & 0xff];
    uint32_t f3 = (uint32_t(SBOX[(s3 >> 24) & 0xff]) << 24) | (uint32_t(SBOX[(s0 >> 16) & 0xff]) << 16) |
                  (uint32_t(SBOX[(s1 >> 8) & 0xff]) << 8) | SBOX[s2 & 0xff];
    store_be(out, f0 ^ round_keys_[40]);
    store_be(out + 4, f1 ^ round_keys_[41]);
    store_be(out + 8, f2 ^ round_keys_[42]);
    store_be(out + 12, f3 ^ round_keys_[43]);
}

void aes128_ctr_xor(const uint8_t key[16], const uint8_t nonce[12], uint32_t initial_block,
                    uint8_t* data, size_t len) {
    Aes128 aes(key);
    uint8_t counter_block[16];
    std::memcpy(counter_block, nonce, 12);
    uint32_t block = initial_block;
    uint8_t ks[16];
    size_t off = 0;
    while (off < len) {
        store_be(counter_block + 12, block++);
        aes.encrypt_block(counter_block, ks);
        size_t take = std::min(len - off, size_t{16});
        for (size_t i = 0; i < take; i++) data[off + i] ^= ks[i];
        off += take;
    }
}

} // namespace sgsl::crypto
