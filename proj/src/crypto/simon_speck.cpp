#include "sgsl/crypto/simon_speck.hpp"

#include <algorithm>
#include <cstring>

namespace sgsl::crypto {

namespace {

inline uint32_t rotl(uint32_t x, int n) { return (x << n) | (x >> (32 - n)); }
inline uint32_t rotr(uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

// z3 constant sequence for the Simon64/128 key schedule
constexpr char kZ3[] = "11011011101011000110010111100000010010001010011100110100001111";

} // namespace

Simon64_128::Simon64_128(const uint32_t key[4]) {
    rk[0] = key[0];
    rk[1] = key[1];
    rk[2] = key[2];
    rk[3] = key[3];
    for (int i = 0; i < kRounds - 4; i++) {
        uint32_t tmp = rotr(rk[i + 3], 3) ^ rk[i + 1];
        tmp ^= rotr(tmp, 1);
        rk[i + 4] = ~rk[i] ^ tmp ^ uint32_t(kZ3[i % 62] - '0') ^ 3u;
    }
}

void Simon64_128::encrypt(uint32_t& x, uint32_t& y) const {
    for (int i = 0; i < kRounds; i++) {
        uint32_t tmp = x;
        x = y ^ (rotl(x, 1) & rotl(x, 8)) ^ rotl(x, 2) ^ rk[i];
        y = tmp;
    }
}

void Simon64_128::decrypt(uint32_t& x, uint32_t& y) const {
    for (int i = kRounds - 1; i >= 0; i--) {
        uint32_t tmp = y;
        y = x ^ (rotl(y, 1) & rotl(y, 8)) ^ rotl(y, 2) ^ rk[i];
        x = tmp;
    }
}

Speck64_128::Speck64_128(const uint32_t key[4]) {
    uint32_t k = key[0];
    uint32_t l[3] = {key[1], key[2], key[3]};
    for (int i = 0; i < kRounds; i++) {
        rk[i] = k;
        uint32_t next_l = (k + rotr(l[i % 3], 8)) ^ static_cast<uint32_t>(i);
        k = rotl(k, 3) ^ next_l;
        l[i % 3] = next_l;
    }
}

void Speck64_128::encrypt(uint32_t& x, uint32_t& y) const {
    for (int i = 0; i < kRounds; i++) {
        x = (rotr(x, 8) + y) ^ rk[i];
        y = rotl(y, 3) ^ x;
    }
}

void Speck64_128::decrypt(uint32_t& x, uint32_t& y) const {
    for (int i = kRounds - 1; i >= 0; i--) {
        y = rotr(y ^ x, 3);
        x = rotl((x ^ rk[i]) - y, 8);
    }
}

namespace {

template <typename Cipher>
void ctr_xor(const Cipher& c, uint64_t nonce, uint8_t* data, size_t len) {
    uint64_t block = 0;
    size_t off = 0;
    while (off < len) {
        uint64_t ctr = nonce ^ block++;
        uint32_t x = static_cast<uint32_t>(ctr >> 32);
        uint32_t y = static_cast<uint32_t>(ctr);
        c.encrypt(x, y);
        uint8_t ks[8];
        std::memcpy(ks, &x, 4);
        std::memcpy(ks + 4, &y, 4);
        size_t take = std::min(len - off, size_t{8});
        for (size_t i = 0; i < take; i++) data[off + i] ^= ks[i];
        off += take;
    }
}

} // namespace

void simon64_ctr_xor(const uint32_t key[4], uint64_t nonce, uint8_t* data, size_t len) {
    ctr_xor(Simon64_128(key), nonce, data, len);
}

void speck64_ctr_xor(const uint32_t key[4], uint64_t nonce, uint8_t* data, size_t len) {
    ctr_xor(Speck64_128(key), nonce, data, len);
}

} // namespace sgsl::crypto
