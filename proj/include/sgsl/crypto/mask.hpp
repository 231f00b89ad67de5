#pragma once

#include <array>
#include <optional>

#include "sgsl/common.hpp"
#include "sgsl/crypto/hkdf.hpp"
#include "sgsl/tensor.hpp"

namespace sgsl::crypto {

enum class Direction : uint8_t {
    client_to_server = 0,
    server_to_client = 1,
};

// fixed-point image of a tensor: round(v * 2^frac_bits) as two's-complement
// 32-bit words, stored as uint32 so masking wraps mod 2^32
struct IntBlob {
    Shape shape;
    uint8_t frac_bits = 16;
    uint32_t saturated = 0; // clamped element count
    std::vector<uint32_t> words;
};

// values outside the representable range saturate and are counted
IntBlob quantize(const Tensor& t, uint8_t frac_bits);
Tensor dequantize(const IntBlob& blob);

Bytes serialize_blob(const IntBlob& blob);
std::optional<IntBlob> parse_blob(const uint8_t* data, size_t len);

// Keyed word-stream generator. The stream for one message is
// ChaCha20(subkey, block), subkey = SHA256(k_mask || session_id || counter ||
// direction): distinct (counter, direction) pairs can never reuse words.
struct MaskStream {
    std::array<uint8_t, 32> key{};
    std::array<uint8_t, 16> session_id{};
    bool test_zero = false; // test hook: all-zero stream

    std::vector<uint32_t> words(uint64_t counter, Direction dir, size_t count) const;
};

// word-wise addition mod 2^32 with the stream; demask subtracts the same
void mask_in_place(IntBlob& blob, const MaskStream& stream, uint64_t counter, Direction dir);
void demask_in_place(IntBlob& blob, const MaskStream& stream, uint64_t counter, Direction dir);

// target encryption: AES-128-CTR keyed by the first half of k_enc; nonce is
// session_id[0..3] || counter so (session, message) pairs never collide
Bytes encrypt_target(const std::array<uint8_t, 32>& k_enc, const std::array<uint8_t, 16>& session_id,
                     uint64_t counter, const Bytes& plaintext);
Bytes decrypt_target(const std::array<uint8_t, 32>& k_enc, const std::array<uint8_t, 16>& session_id,
                     uint64_t counter, const Bytes& ciphertext);

// tensor <-> bytes for the encrypted target payload
Bytes serialize_tensors(const std::vector<Tensor>& ts);
std::optional<std::vector<Tensor>> parse_tensors(const uint8_t* data, size_t len);

} // namespace sgsl::crypto
