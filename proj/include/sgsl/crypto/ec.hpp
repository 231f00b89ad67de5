#pragma once

#include <gmpxx.h>

#include <optional>
#include <vector>

#include "sgsl/common.hpp"

namespace sgsl::crypto {

struct Point {
    mpz_class x, y;
    bool inf = false;

    bool operator==(const Point& o) const {
        if (inf || o.inf) return inf == o.inf;
        return x == o.x && y == o.y;
    }
};

// short Weierstrass y^2 = x^3 + ax + b over F_p, prime group order n
struct CurveParams {
    mpz_class p, a, b, n;
    Point g;
    int byte_len; // field element encoding width

    static CurveParams secp256k1();
    // y^2 = x^3 + 2x + 2 mod 17, G = (5,1), order 19; textbook test group
    static CurveParams toy17();
};

class Curve {
public:
    explicit Curve(CurveParams params);

    const CurveParams& params() const { return prm_; }

    bool on_curve(const Point& q) const;
    Point add(const Point& p, const Point& q) const;
    Point dbl(const Point& p) const;
    Point mul(const mpz_class& k, const Point& p) const; // generic scalar mult
    Point mul_base(const mpz_class& k) const;            // uses fixed-base table
    Point neg(const Point& p) const;

    // compressed encoding: 0x02/0x03 prefix + big-endian x; identity is 0x00
    Bytes encode_point(const Point& p) const;
    std::optional<Point> decode_point(const Bytes& enc) const; // validates on-curve

    Bytes encode_scalar(const mpz_class& s) const;
    mpz_class decode_scalar(const Bytes& enc) const;

    mpz_class random_scalar(Rng& rng) const;           // [1, n-1], deterministic source
    mpz_class scalar_from_bytes(const Bytes& b) const; // reduce mod n, never 0

private:
    CurveParams prm_;
    std::vector<std::vector<Point>> base_table_; // [window][digit-1] -> digit*16^window*G

    struct Jac {
        mpz_class x, y, z; // z == 0 marks the identity
    };
    Jac to_jac(const Point& p) const;
    Point to_affine(const Jac& j) const;
    Jac jac_dbl(const Jac& p) const;
    Jac jac_add(const Jac& p, const Jac& q) const;
    Jac jac_add_affine(const Jac& p, const Point& q) const;
    mpz_class sqrt_mod_p(const mpz_class& v) const; // Tonelli-Shanks
};

struct KeyPair {
    mpz_class sk;
    Point pk;
};

KeyPair generate_keypair(const Curve& curve, Rng& rng);

// ECDH: scalar-multiply the peer's point; rejects off-curve and identity
// inputs before use
Point ecdh_shared(const Curve& curve, const mpz_class& sk_self, const Point& pk_peer);

// shared-secret bytes fed to the KDF: big-endian x coordinate
Bytes shared_secret_bytes(const Curve& curve, const Point& shared);

} // namespace sgsl::crypto
