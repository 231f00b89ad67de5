#include "sgsl/crypto/mask.hpp"

#include <cmath>
#include <cstring>

#include "sgsl/crypto/aes.hpp"
#include "sgsl/crypto/chacha20.hpp"

namespace sgsl::crypto {

IntBlob quantize(const Tensor& t, uint8_t frac_bits) {
    if (frac_bits >= 31) throw ContractError("frac_bits must be < 31");
    IntBlob blob;
    blob.shape = t.shape();
    blob.frac_bits = frac_bits;
    blob.words.resize(static_cast<size_t>(t.numel()));
    const double scale = std::ldexp(1.0, frac_bits);
    size_t i = 0;
    for (float v : t.values()) {
        double scaled = std::round(static_cast<double>(v) * scale);
        int32_t q;
        if (scaled >= 2147483647.0) {
            q = INT32_MAX;
            blob.saturated++;
        } else if (scaled <= -2147483648.0) {
            q = INT32_MIN;
            blob.saturated++;
        } else {
            q = static_cast<int32_t>(scaled);
        }
        blob.words[i++] = static_cast<uint32_t>(q);
    }
    return blob;
}

Tensor dequantize(const IntBlob& blob) {
    std::vector<float> values(blob.words.size());
    const double inv = std::ldexp(1.0, -blob.frac_bits);
    for (size_t i = 0; i < blob.words.size(); i++) {
        int32_t q = static_cast<int32_t>(blob.words[i]);
        values[i] = static_cast<float>(q * inv);
    }
    return Tensor::from(blob.shape, std::move(values));
}

Bytes serialize_blob(const IntBlob& blob) {
    Bytes out;
    out.push_back(blob.frac_bits);
    put_u32le(out, blob.saturated);
    out.push_back(static_cast<uint8_t>(blob.shape.size()));
    for (int d : blob.shape) put_u32le(out, static_cast<uint32_t>(d));
    for (uint32_t w : blob.words) put_u32le(out, w);
    return out;
}

std::optional<IntBlob> parse_blob(const uint8_t* data, size_t len) {
    size_t off = 0;
    auto have = [&](size_t k) { return off + k <= len; };
    if (!have(6)) return std::nullopt;
    IntBlob blob;
    blob.frac_bits = data[off++];
    if (blob.frac_bits >= 31) return std::nullopt;
    blob.saturated = get_u32le(data + off);
    off += 4;
    uint8_t rank = data[off++];
    if (rank > 8) return std::nullopt;
    if (!have(4u * rank)) return std::nullopt;
    int64_t count = 1;
    blob.shape.resize(rank);
    for (int i = 0; i < rank; i++) {
        uint32_t d = get_u32le(data + off);
        off += 4;
        if (d > (1u << 24)) return std::nullopt;
        blob.shape[static_cast<size_t>(i)] = static_cast<int>(d);
        count *= d;
    }
    if (count < 0 || count > (1LL << 26)) return std::nullopt;
    if (!have(4u * static_cast<size_t>(count)) || off + 4u * static_cast<size_t>(count) != len)
        return std::nullopt;
    blob.words.resize(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; i++) {
        blob.words[static_cast<size_t>(i)] = get_u32le(data + off);
        off += 4;
    }
    return blob;
}

std::vector<uint32_t> MaskStream::words(uint64_t counter, Direction dir, size_t count) const {
    std::vector<uint32_t> out(count);
    if (test_zero || count == 0) return out;

    Bytes material;
    material.insert(material.end(), key.begin(), key.end());
    material.insert(material.end(), session_id.begin(), session_id.end());
    put_u64le(material, counter);
    material.push_back(static_cast<uint8_t>(dir));
    Digest subkey = sha256(material);

    uint8_t nonce[12] = {0};
    chacha20_words(subkey.data(), nonce, 0, out.data(), count);
    return out;
}

void mask_in_place(IntBlob& blob, const MaskStream& stream, uint64_t counter, Direction dir) {
    auto ks = stream.words(counter, dir, blob.words.size());
    for (size_t i = 0; i < blob.words.size(); i++) blob.words[i] += ks[i];
}

void demask_in_place(IntBlob& blob, const MaskStream& stream, uint64_t counter, Direction dir) {
    auto ks = stream.words(counter, dir, blob.words.size());
    for (size_t i = 0; i < blob.words.size(); i++) blob.words[i] -= ks[i];
}

namespace {

Bytes ctr_crypt(const std::array<uint8_t, 32>& k_enc, const std::array<uint8_t, 16>& session_id,
                uint64_t counter, const Bytes& in) {
    Bytes out = in;
    uint8_t nonce[12];
    std::memcpy(nonce, session_id.data(), 4);
    for (int i = 0; i < 8; i++) nonce[4 + i] = static_cast<uint8_t>(counter >> (8 * i));
    aes128_ctr_xor(k_enc.data(), nonce, 0, out.data(), out.size());
    return out;
}

} // namespace

Bytes encrypt_target(const std::array<uint8_t, 32>& k_enc, const std::array<uint8_t, 16>& session_id,
                     uint64_t counter, const Bytes& plaintext) {
    return ctr_crypt(k_enc, session_id, counter, plaintext);
}

Bytes decrypt_target(const std::array<uint8_t, 32>& k_enc, const std::array<uint8_t, 16>& session_id,
                     uint64_t counter, const Bytes& ciphertext) {
    return ctr_crypt(k_enc, session_id, counter, ciphertext);
}

Bytes serialize_tensors(const std::vector<Tensor>& ts) {
    Bytes out;
    put_u32le(out, static_cast<uint32_t>(ts.size()));
    for (const Tensor& t : ts) {
        out.push_back(static_cast<uint8_t>(t.rank()));
        for (int i = 0; i < t.rank(); i++) put_u32le(out, static_cast<uint32_t>(t.dim(i)));
        for (float v : t.values()) {
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_u32le(out, bits);
        }
    }
    return out;
}

std::optional<std::vector<Tensor>> parse_tensors(const uint8_t* data, size_t len) {
    size_t off = 0;
    auto have = [&](size_t k) { return off + k <= len; };
    if (!have(4)) return std::nullopt;
    uint32_t n = get_u32le(data);
    off = 4;
    if (n > 16) return std::nullopt;
    std::vector<Tensor> out;
    for (uint32_t t = 0; t < n; t++) {
        if (!have(1)) return std::nullopt;
        uint8_t rank = data[off++];
        if (rank > 8 || !have(4u * rank)) return std::nullopt;
        Shape shape(rank);
        int64_t count = 1;
        for (int i = 0; i < rank; i++) {
            uint32_t d = get_u32le(data + off);
            off += 4;
            if (d > (1u << 24)) return std::nullopt;
            shape[static_cast<size_t>(i)] = static_cast<int>(d);
            count *= d;
        }
        if (count > (1LL << 26) || !have(4u * static_cast<size_t>(count))) return std::nullopt;
        std::vector<float> values(static_cast<size_t>(count));
        for (int64_t i = 0; i < count; i++) {
            uint32_t bits = get_u32le(data + off);
            off += 4;
            float v;
            std::memcpy(&v, &bits, 4);
            values[static_cast<size_t>(i)] = v;
        }
        out.push_back(Tensor::from(std::move(shape), std::move(values)));
    }
    if (off != len) return std::nullopt;
    return out;
}

} // namespace sgsl::crypto
