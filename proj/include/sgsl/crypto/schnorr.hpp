#pragma once

#include "sgsl/crypto/ec.hpp"
#include "sgsl/crypto/sha256.hpp"

namespace sgsl::crypto {

// Deterministic Schnorr over the curve group. Signature layout:
// encode_point(R) || encode_scalar(s), with s = k + e*sk mod n,
// e = H(enc(R) || enc(pk) || digest), k = H(sk || digest) (re-derived with a
// counter on the vanishingly unlikely k = 0).
Bytes schnorr_sign(const Curve& curve, const KeyPair& key, const Digest& digest);

// malformed encodings return false, never throw
bool schnorr_verify(const Curve& curve, const Point& pk, const Digest& digest, const Bytes& sig);

} // namespace sgsl::crypto
