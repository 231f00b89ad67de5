#pragma once

#include <cstdint>
#include <cstddef>

namespace sgsl::crypto {

// Simon64/128 and Speck64/128 from the designers' specification; benchmark
// baselines, validated against the published test vectors.

struct Simon64_128 {
    explicit Simon64_128(const uint32_t key[4]); // key words k[0]..k[3], k[0] least significant
    void encrypt(uint32_t& x, uint32_t& y) const;
    void decrypt(uint32_t& x, uint32_t& y) const;

    static constexpr int kRounds = 44;
    uint32_t rk[kRounds];
};

struct Speck64_128 {
    explicit Speck64_128(const uint32_t key[4]);
    void encrypt(uint32_t& x, uint32_t& y) const;
    void decrypt(uint32_t& x, uint32_t& y) const;

    static constexpr int kRounds = 27;
    uint32_t rk[kRounds];
};

// CTR-style keystream xor for the benchmark: 64-bit counter split into the
// (x, y) block words
void simon64_ctr_xor(const uint32_t key[4], uint64_t nonce, uint8_t* data, size_t len);
void speck64_ctr_xor(const uint32_t key[4], uint64_t nonce, uint8_t* data, size_t len);

} // namespace sgsl::crypto
