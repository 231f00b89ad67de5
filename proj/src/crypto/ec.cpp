#include "sgsl/crypto/ec.hpp"

namespace sgsl::crypto {

namespace {

mpz_class mod(const mpz_class& v, const mpz_class& m) {
    mpz_class r;
    mpz_mod(r.get_mpz_t(), v.get_mpz_t(), m.get_mpz_t());
    return r;
}

mpz_class invmod(const mpz_class& v, const mpz_class& m) {
    mpz_class r;
    if (mpz_invert(r.get_mpz_t(), v.get_mpz_t(), m.get_mpz_t()) == 0)
        throw ContractError("modular inverse does not exist");
    return r;
}

mpz_class powmod(const mpz_class& base, const mpz_class& exp, const mpz_class& m) {
    mpz_class r;
    mpz_powm(r.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), m.get_mpz_t());
    return r;
}

} // namespace

CurveParams CurveParams::secp256k1() {
    CurveParams c;
    c.p = mpz_class("fffffffffffffffffffffffffffffffffffffffffffffffffffffffefffffc2f", 16);
    c.a = 0;
    c.b = 7;
    c.n = mpz_class("fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364141", 16);
    c.g.x = mpz_class("79be667ef9dcbbac55a06295ce870b07029bfcdb2dce28d959f2815b16f81798", 16);
    c.g.y = mpz_class("483ada7726a3c4655da4fbfc0e1108a8fd17b448a68554199c47d08ffb10d4b8", 16);
    c.byte_len = 32;
    return c;
}

CurveParams CurveParams::toy17() {
    CurveParams c;
    c.p = 17;
    c.a = 2;
    c.b = 2;
    c.n = 19;
    c.g.x = 5;
    c.g.y = 1;
    c.byte_len = 1;
    return c;
}

Curve::Curve(CurveParams params) : prm_(std::move(params)) {
    // non-singularity: 4a^3 + 27b^2 != 0 mod p
    mpz_class disc = mod(4 * prm_.a * prm_.a * prm_.a + 27 * prm_.b * prm_.b, prm_.p);
    if (disc == 0) throw ContractError("singular curve parameters");
    if (!on_curve(prm_.g)) throw ContractError("base point not on curve");

    // fixed-base table: table[w][d-1] = d * 16^w * G
    int windows = (mpz_sizeinbase(prm_.n.get_mpz_t(), 2) + 3) / 4;
    base_table_.resize(static_cast<size_t>(windows));
    Jac window_base = to_jac(prm_.g);
    for (int w = 0; w < windows; w++) {
        auto& row = base_table_[static_cast<size_t>(w)];
        row.reserve(15);
        Jac acc{0, 0, 0};
        for (int d = 1; d <= 15; d++) {
            acc = jac_add(acc, window_base);
            row.push_back(to_affine(acc));
        }
        // advance to 16^(w+1) * G
        Jac next = jac_add(acc, window_base);
        window_base = next;
    }

    // group order sanity: n*G must be the identity; walk to (n-1)*G and
    // add G so the check cannot be satisfied by scalar reduction alone
    Point last = mul_base(prm_.n - 1);
    if (!add(last, prm_.g).inf) throw ContractError("base point order mismatch");
}

bool Curve::on_curve(const Point& q) const {
    if (q.inf) return true;
    if (q.x < 0 || q.x >= prm_.p || q.y < 0 || q.y >= prm_.p) return false;
    mpz_class lhs = mod(q.y * q.y, prm_.p);
    mpz_class rhs = mod(q.x * q.x * q.x + prm_.a * q.x + prm_.b, prm_.p);
    return lhs == rhs;
}

Curve::Jac Curve::to_jac(const Point& p) const {
    if (p.inf) return Jac{0, 0, 0};
    return Jac{p.x, p.y, 1};
}

Point Curve::to_affine(const Jac& j) const {
    if (j.z == 0) return Point{0, 0, true};
    mpz_class zi = invmod(j.z, prm_.p);
    mpz_class zi2 = mod(zi * zi, prm_.p);
    Point out;
    out.x = mod(j.x * zi2, prm_.p);
    out.y = mod(j.y * zi2 * zi, prm_.p);
    return out;
}

Curve::Jac Curve::jac_dbl(const Jac& q) const {
    if (q.z == 0 || q.y == 0) return Jac{0, 0, 0};
    const mpz_class& p = prm_.p;
    mpz_class y2 = mod(q.y * q.y, p);
    mpz_class s = mod(4 * q.x * y2, p);
    mpz_class z2 = mod(q.z * q.z, p);
    mpz_class m = mod(3 * q.x * q.x + prm_.a * z2 * z2, p);
    mpz_class x3 = mod(m * m - 2 * s, p);
    mpz_class y3 = mod(m * (s - x3) - 8 * y2 * y2, p);
    mpz_class z3 = mod(2 * q.y * q.z, p);
    return Jac{x3, y3, z3};
}

Curve::Jac Curve::jac_add(const Jac& a, const Jac& b) const {
    if (a.z == 0) return b;
    if (b.z == 0) return a;
    const mpz_class& p = prm_.p;
    mpz_class z1z1 = mod(a.z * a.z, p);
    mpz_class z2z2 = mod(b.z * b.z, p);
    mpz_class u1 = mod(a.x * z2z2, p);
    mpz_class u2 = mod(b.x * z1z1, p);
    mpz_class s1 = mod(a.y * z2z2 * b.z, p);
    mpz_class s2 = mod(b.y * z1z1 * a.z, p);
    mpz_class h = mod(u2 - u1, p);
    mpz_class r = mod(s2 - s1, p);
    if (h == 0) {
        if (r == 0) return jac_dbl(a);
        return Jac{0, 0, 0};
    }
    mpz_class h2 = mod(h * h, p);
    mpz_class h3 = mod(h2 * h, p);
    mpz_class u1h2 = mod(u1 * h2, p);
    mpz_class x3 = mod(r * r - h3 - 2 * u1h2, p);
    mpz_class y3 = mod(r * (u1h2 - x3) - s1 * h3, p);
    mpz_class z3 = mod(a.z * b.z * h, p);
    return Jac{x3, y3, z3};
}

Curve::Jac Curve::jac_add_affine(const Jac& a, const Point& q) const {
    if (q.inf) return a;
    if (a.z == 0) return to_jac(q);
    const mpz_class& p = prm_.p;
    mpz_class z1z1 = mod(a.z * a.z, p);
    mpz_class u2 = mod(q.x * z1z1, p);
    mpz_class s2 = mod(q.y * z1z1 * a.z, p);
    mpz_class h = mod(u2 - a.x, p);
    mpz_class r = mod(s2 - a.y, p);
    if (h == 0) {
        if (r == 0) return jac_dbl(a);
        return Jac{0, 0, 0};
    }
    mpz_class h2 = mod(h * h, p);
    mpz_class h3 = mod(h2 * h, p);
    mpz_class u1h2 = mod(a.x * h2, p);
    mpz_class x3 = mod(r * r - h3 - 2 * u1h2, p);
    mpz_class y3 = mod(r * (u1h2 - x3) - a.y * h3, p);
    mpz_class z3 = mod(a.z * h, p);
    return Jac{x3, y3, z3};
}

Point Curve::add(const Point& p, const Point& q) const {
    return to_affine(jac_add(to_jac(p), to_jac(q)));
}

Point Curve::dbl(const Point& p) const { return to_affine(jac_dbl(to_jac(p))); }

Point Curve::neg(const Point& p) const {
    if (p.inf) return p;
    return Point{p.x, mod(-p.y, prm_.p), false};
}

Point Curve::mul(const mpz_class& k, const Point& q) const {
    mpz_class s = mod(k, prm_.n);
    if (s == 0 || q.inf) return Point{0, 0, true};

    // wNAF, window 5: digits are odd, |d| <= 15
    constexpr int W = 5;
    std::vector<Point> odd; // q, 3q, ..., 15q
    odd.reserve(8);
    odd.push_back(q);
    Point q2 = dbl(q);
    for (int i = 1; i < 8; i++) odd.push_back(add(odd.back(), q2));

    std::vector<int> naf;
    mpz_class t = s;
    while (t > 0) {
        if (mpz_odd_p(t.get_mpz_t())) {
            long d = mpz_class(t % (1 << W)).get_si();
            if (d >= (1 << (W - 1))) d -= (1 << W);
            naf.push_back(static_cast<int>(d));
            t -= d;
        } else {
            naf.push_back(0);
        }
        t >>= 1;
    }

    Jac acc{0, 0, 0};
    for (int i = static_cast<int>(naf.size()) - 1; i >= 0; i--) {
        acc = jac_dbl(acc);
        int d = naf[static_cast<size_t>(i)];
        if (d > 0)
            acc = jac_add_affine(acc, odd[static_cast<size_t>((d - 1) / 2)]);
        else if (d < 0)
            acc = jac_add_affine(acc, neg(odd[static_cast<size_t>((-d - 1) / 2)]));
    }
    return to_affine(acc);
}

Point Curve::mul_base(const mpz_class& k) const {
    mpz_class s = mod(k, prm_.n);
    if (s == 0) return Point{0, 0, true};
    Jac acc{0, 0, 0};
    size_t w = 0;
    while (s > 0 && w < base_table_.size()) {
        long digit = mpz_class(s % 16).get_si();
        if (digit != 0) acc = jac_add_affine(acc, base_table_[w][static_cast<size_t>(digit - 1)]);
        s >>= 4;
        w++;
    }
    return to_affine(acc);
}

Bytes Curve::encode_scalar(const mpz_class& s) const {
    if (s < 0 || mpz_sizeinbase(s.get_mpz_t(), 2) > static_cast<size_t>(8 * prm_.byte_len))
        throw ContractError("scalar out of encoding range");
    Bytes out(static_cast<size_t>(prm_.byte_len), 0);
    size_t count = 0;
    mpz_export(out.data(), &count, 1, 1, 1, 0, s.get_mpz_t());
    if (count == 0) return out; // zero scalar
    // right-align big-endian
    if (count < out.size()) {
        Bytes shifted(out.size(), 0);
        std::copy(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(count),
                  shifted.end() - static_cast<std::ptrdiff_t>(count));
        return shifted;
    }
    return out;
}

mpz_class Curve::decode_scalar(const Bytes& enc) const {
    mpz_class s;
    mpz_import(s.get_mpz_t(), enc.size(), 1, 1, 1, 0, enc.data());
    return s;
}

Bytes Curve::encode_point(const Point& p) const {
    if (p.inf) return Bytes{0x00};
    Bytes out;
    out.push_back(mpz_odd_p(p.y.get_mpz_t()) ? 0x03 : 0x02);
    Bytes x = encode_scalar(p.x);
    out.insert(out.end(), x.begin(), x.end());
    return out;
}

mpz_class Curve::sqrt_mod_p(const mpz_class& v) const {
    const mpz_class& p = prm_.p;
    if (v == 0) return 0;
    // Euler criterion
    if (powmod(v, (p - 1) / 2, p) != 1) throw ContractError("not a quadratic residue");
    if (p % 4 == 3) return powmod(v, (p + 1) / 4, p);

    // Tonelli-Shanks
    mpz_class q = p - 1;
    unsigned s = 0;
    while (mpz_even_p(q.get_mpz_t())) {
        q >>= 1;
        s++;
    }
    mpz_class z = 2;
    while (powmod(z, (p - 1) / 2, p) != p - 1) z++;
    mpz_class m = s;
    mpz_class c = powmod(z, q, p);
    mpz_class t = powmod(v, q, p);
    mpz_class r = powmod(v, (q + 1) / 2, p);
    while (t != 1) {
        mpz_class tt = t;
        unsigned i = 0;
        while (tt != 1) {
            tt = mod(tt * tt, p);
            i++;
        }
        mpz_class b = c;
        for (mpz_class j = 0; j < m - i - 1; j++) b = mod(b * b, p);
        m = i;
        c = mod(b * b, p);
        t = mod(t * c, p);
        r = mod(r * b, p);
    }
    return r;
}

std::optional<Point> Curve::decode_point(const Bytes& enc) const {
    if (enc.size() == 1 && enc[0] == 0x00) return Point{0, 0, true};
    if (enc.size() != static_cast<size_t>(prm_.byte_len) + 1) return std::nullopt;
    if (enc[0] != 0x02 && enc[0] != 0x03) return std::nullopt;
    Bytes xb(enc.begin() + 1, enc.end());
    mpz_class x = decode_scalar(xb);
    if (x >= prm_.p) return std::nullopt;
    mpz_class rhs = mod(x * x * x + prm_.a * x + prm_.b, prm_.p);
    mpz_class y;
    try {
        y = sqrt_mod_p(rhs);
    } catch (const ContractError&) {
        return std::nullopt;
    }
    bool want_odd = enc[0] == 0x03;
    if (mpz_odd_p(y.get_mpz_t()) != want_odd) y = mod(-y, prm_.p);
    Point p{x, y, false};
    if (!on_curve(p)) return std::nullopt;
    return p;
}

mpz_class Curve::random_scalar(Rng& rng) const {
    size_t bytes = (mpz_sizeinbase(prm_.n.get_mpz_t(), 2) + 7) / 8;
    while (true) {
        Bytes buf(bytes + 8);
        for (auto& b : buf) b = static_cast<uint8_t>(rng.next_u64());
        mpz_class v;
        mpz_import(v.get_mpz_t(), buf.size(), 1, 1, 1, 0, buf.data());
        v = mod(v, prm_.n);
        if (v != 0) return v;
    }
}

mpz_class Curve::scalar_from_bytes(const Bytes& b) const {
    mpz_class v;
    mpz_import(v.get_mpz_t(), b.size(), 1, 1, 1, 0, b.data());
    v = mod(v, prm_.n);
    if (v == 0) v = 1;
    return v;
}

KeyPair generate_keypair(const Curve& curve, Rng& rng) {
    KeyPair kp;
    kp.sk = curve.random_scalar(rng);
    kp.pk = curve.mul_base(kp.sk);
    return kp;
}

Point ecdh_shared(const Curve& curve, const mpz_class& sk_self, const Point& pk_peer) {
    if (pk_peer.inf) throw ContractError("ECDH peer point is the identity");
    if (!curve.on_curve(pk_peer)) throw ContractError("ECDH peer point not on curve");
    Point shared = curve.mul(sk_self, pk_peer);
    if (shared.inf) throw ContractError("ECDH produced the identity");
    return shared;
}

Bytes shared_secret_bytes(const Curve& curve, const Point& shared) {
    return curve.encode_scalar(shared.x);
}

} // namespace sgsl::crypto
