#include "sgsl/crypto/schnorr.hpp"

namespace sgsl::crypto {

namespace {

mpz_class challenge(const Curve& curve, const Bytes& r_enc, const Bytes& pk_enc,
                    const Digest& digest) {
    Sha256 h;
    h.update(r_enc.data(), r_enc.size());
    h.update(pk_enc.data(), pk_enc.size());
    h.update(digest.data(), digest.size());
    Digest e = h.finish();
    return curve.scalar_from_bytes(Bytes(e.begin(), e.end()));
}

} // namespace

Bytes schnorr_sign(const Curve& curve, const KeyPair& key, const Digest& digest) {
    const mpz_class& n = curve.params().n;

    Bytes sk_bytes = curve.encode_scalar(key.sk);
    mpz_class k = 0;
    for (uint8_t ctr = 0;; ctr++) {
        Sha256 h;
        h.update(sk_bytes.data(), sk_bytes.size());
        h.update(digest.data(), digest.size());
        if (ctr > 0) h.update(&ctr, 1);
        Digest kd = h.finish();
        mpz_class cand;
        mpz_import(cand.get_mpz_t(), kd.size(), 1, 1, 1, 0, kd.data());
        cand %= n;
        if (cand != 0) {
            k = cand;
            break;
        }
    }

    Point r = curve.mul_base(k);
    Bytes r_enc = curve.encode_point(r);
    Bytes pk_enc = curve.encode_point(key.pk);
    mpz_class e = challenge(curve, r_enc, pk_enc, digest);
    mpz_class s = (k + e * key.sk) % n;

    Bytes sig = r_enc;
    Bytes s_enc = curve.encode_scalar(s);
    sig.insert(sig.end(), s_enc.begin(), s_enc.end());
    return sig;
}

bool schnorr_verify(const Curve& curve, const Point& pk, const Digest& digest, const Bytes& sig) {
    const auto& prm = curve.params();
    size_t point_len = static_cast<size_t>(prm.byte_len) + 1;
    size_t scalar_len = static_cast<size_t>(prm.byte_len);
    if (sig.size() != point_len + scalar_len) return false;
    if (pk.inf || !curve.on_curve(pk)) return false;

    Bytes r_enc(sig.begin(), sig.begin() + static_cast<std::ptrdiff_t>(point_len));
    auto r = curve.decode_point(r_enc);
    if (!r || r->inf) return false;
    Bytes s_enc(sig.begin() + static_cast<std::ptrdiff_t>(point_len), sig.end());
    mpz_class s = curve.decode_scalar(s_enc);
    if (s >= prm.n) return false;

    mpz_class e = challenge(curve, r_enc, curve.encode_point(pk), digest);
    // s*G == R + e*pk
    Point lhs = curve.mul_base(s);
    Point rhs = curve.add(*r, curve.mul(e, pk));
    return lhs == rhs;
}

} // namespace sgsl::crypto
