#include "sgsl/protocol.hpp"

#include <cstring>
#include <fstream>

namespace sgsl::proto {

const char* to_string(ProtoError e) {
    switch (e) {
        case ProtoError::none: return "none";
        case ProtoError::bad_magic: return "bad magic";
        case ProtoError::bad_version: return "bad version";
        case ProtoError::truncated: return "truncated frame";
        case ProtoError::bad_length: return "bad length field";
        case ProtoError::bad_signature: return "signature verification failed";
        case ProtoError::unknown_party: return "unknown party id";
        case ProtoError::wrong_phase: return "message in wrong phase";
        case ProtoError::wrong_type: return "unexpected message type";
        case ProtoError::stale_counter: return "stale or repeated counter";
        case ProtoError::wrong_session: return "session id mismatch";
        case ProtoError::bad_point: return "invalid curve point";
        case ProtoError::bad_payload: return "malformed payload";
        case ProtoError::closed: return "session closed";
        case ProtoError::aborted_by_peer: return "aborted by peer";
    }
    return "unknown";
}

Bytes encode_frame(const Frame& f) {
    Bytes out;
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(f.version);
    out.push_back(static_cast<uint8_t>(f.type));
    out.insert(out.end(), f.session_id.begin(), f.session_id.end());
    put_u64le(out, f.counter);
    put_u32le(out, static_cast<uint32_t>(f.payload.size()));
    out.insert(out.end(), f.payload.begin(), f.payload.end());
    put_u16le(out, static_cast<uint16_t>(f.signature.size()));
    out.insert(out.end(), f.signature.begin(), f.signature.end());
    return out;
}

std::optional<Frame> parse_frame(const uint8_t* data, size_t len, ProtoError& err) {
    constexpr size_t kHeader = 4 + 1 + 1 + 16 + 8 + 4;
    if (len < kHeader) {
        err = ProtoError::truncated;
        return std::nullopt;
    }
    if (std::memcmp(data, kMagic, 4) != 0) {
        err = ProtoError::bad_magic;
        return std::nullopt;
    }
    Frame f;
    f.version = data[4];
    if (f.version != kVersion) {
        err = ProtoError::bad_version;
        return std::nullopt;
    }
    uint8_t t = data[5];
    if (t < 0x01 || t > 0x05) {
        err = ProtoError::wrong_type;
        return std::nullopt;
    }
    f.type = static_cast<MsgType>(t);
    std::memcpy(f.session_id.data(), data + 6, 16);
    f.counter = get_u64le(data + 22);
    uint32_t payload_len = get_u32le(data + 30);
    size_t off = kHeader;
    if (payload_len > len - off) {
        err = ProtoError::truncated;
        return std::nullopt;
    }
    f.payload.assign(data + off, data + off + payload_len);
    off += payload_len;
    if (len - off < 2) {
        err = ProtoError::truncated;
        return std::nullopt;
    }
    uint16_t sig_len = get_u16le(data + off);
    off += 2;
    if (sig_len > len - off) {
        err = ProtoError::truncated;
        return std::nullopt;
    }
    f.signature.assign(data + off, data + off + sig_len);
    off += sig_len;
    if (off != len) {
        err = ProtoError::bad_length; // trailing bytes
        return std::nullopt;
    }
    err = ProtoError::none;
    return f;
}

crypto::Digest frame_digest(const Frame& f) {
    crypto::Sha256 h;
    h.update(reinterpret_cast<const uint8_t*>(kMagic), 4);
    uint8_t hdr[2] = {f.version, static_cast<uint8_t>(f.type)};
    h.update(hdr, 2);
    h.update(f.session_id.data(), f.session_id.size());
    Bytes tail;
    put_u64le(tail, f.counter);
    put_u32le(tail, static_cast<uint32_t>(f.payload.size()));
    h.update(tail);
    h.update(f.payload);
    return h.finish();
}

namespace {

Bytes cs1_payload(const std::string& id, const Bytes& point) {
    Bytes out;
    put_u16le(out, static_cast<uint16_t>(id.size()));
    out.insert(out.end(), id.begin(), id.end());
    put_u16le(out, static_cast<uint16_t>(point.size()));
    out.insert(out.end(), point.begin(), point.end());
    return out;
}

bool parse_cs1_payload(const Bytes& p, std::string& id, Bytes& point) {
    if (p.size() < 2) return false;
    uint16_t id_len = get_u16le(p.data());
    size_t off = 2;
    if (p.size() - off < id_len) return false;
    id.assign(reinterpret_cast<const char*>(p.data() + off), id_len);
    off += id_len;
    if (p.size() - off < 2) return false;
    uint16_t pt_len = get_u16le(p.data() + off);
    off += 2;
    if (p.size() - off != pt_len) return false;
    point.assign(p.begin() + static_cast<std::ptrdiff_t>(off), p.end());
    return true;
}

Bytes sc1_payload(const Bytes& point) {
    Bytes out;
    put_u16le(out, static_cast<uint16_t>(point.size()));
    out.insert(out.end(), point.begin(), point.end());
    return out;
}

bool parse_sc1_payload(const Bytes& p, Bytes& point) {
    if (p.size() < 2) return false;
    uint16_t pt_len = get_u16le(p.data());
    if (p.size() - 2 != pt_len) return false;
    point.assign(p.begin() + 2, p.end());
    return true;
}

Bytes cs2_payload(const Bytes& m1, const Bytes& m2) {
    Bytes out;
    put_u32le(out, static_cast<uint32_t>(m1.size()));
    out.insert(out.end(), m1.begin(), m1.end());
    put_u32le(out, static_cast<uint32_t>(m2.size()));
    out.insert(out.end(), m2.begin(), m2.end());
    return out;
}

bool parse_cs2_payload(const Bytes& p, Bytes& m1, Bytes& m2) {
    if (p.size() < 4) return false;
    uint32_t l1 = get_u32le(p.data());
    size_t off = 4;
    if (p.size() - off < l1) return false;
    m1.assign(p.begin() + static_cast<std::ptrdiff_t>(off),
              p.begin() + static_cast<std::ptrdiff_t>(off + l1));
    off += l1;
    if (p.size() - off < 4) return false;
    uint32_t l2 = get_u32le(p.data() + off);
    off += 4;
    if (p.size() - off != l2) return false;
    m2.assign(p.begin() + static_cast<std::ptrdiff_t>(off), p.end());
    return true;
}

} // namespace

// ---- client ---------------------------------------------------------------

ClientSession::ClientSession(SessionConfig cfg, std::string client_id, crypto::Point server_pk,
                             uint64_t seed)
    : cfg_(std::move(cfg)), client_id_(std::move(client_id)), server_pk_(std::move(server_pk)),
      rng_(seed) {}

Frame ClientSession::sign_frame(MsgType type, Bytes payload) {
    Frame f;
    f.type = type;
    f.session_id = session_id_;
    f.counter = send_counter_++;
    f.payload = std::move(payload);
    f.signature = crypto::schnorr_sign(*cfg_.curve, cfg_.identity, frame_digest(f));
    return f;
}

void ClientSession::fail() {
    phase_ = Phase::closed;
    keys_.zeroize();
    mask_.key.fill(0);
    eph_sk_ = 0;
}

void ClientSession::close() { fail(); }

Frame ClientSession::handshake_init() {
    if (phase_ != Phase::init) throw ContractError("handshake_init: wrong phase");
    for (auto& b : session_id_) b = static_cast<uint8_t>(rng_.next_u32());
    eph_sk_ = cfg_.curve->random_scalar(rng_);
    crypto::Point q_c = cfg_.curve->mul_base(eph_sk_);
    Frame f = sign_frame(MsgType::m_cs1, cs1_payload(client_id_, cfg_.curve->encode_point(q_c)));
    phase_ = Phase::await_peer_point;
    return f;
}

ProtoError ClientSession::handshake_finish(const Frame& m_sc1) {
    if (phase_ == Phase::closed) return ProtoError::closed;
    if (phase_ != Phase::await_peer_point) {
        fail();
        return ProtoError::wrong_phase;
    }
    if (m_sc1.type == MsgType::abort_session) {
        fail();
        return ProtoError::aborted_by_peer;
    }
    if (m_sc1.type != MsgType::m_sc1) {
        fail();
        return ProtoError::wrong_type;
    }
    if (m_sc1.session_id != session_id_) {
        fail();
        return ProtoError::wrong_session;
    }
    if (recv_any_ && m_sc1.counter <= recv_counter_seen_) {
        fail();
        return ProtoError::stale_counter;
    }
    if (!crypto::schnorr_verify(*cfg_.curve, server_pk_, frame_digest(m_sc1), m_sc1.signature)) {
        fail();
        return ProtoError::bad_signature;
    }
    Bytes point_enc;
    if (!parse_sc1_payload(m_sc1.payload, point_enc)) {
        fail();
        return ProtoError::bad_payload;
    }
    auto q_s = cfg_.curve->decode_point(point_enc);
    if (!q_s || q_s->inf) {
        fail();
        return ProtoError::bad_point;
    }
    recv_counter_seen_ = m_sc1.counter;
    recv_any_ = true;

    crypto::Point shared;
    try {
        shared = crypto::ecdh_shared(*cfg_.curve, eph_sk_, *q_s);
    } catch (const ContractError&) {
        fail();
        return ProtoError::bad_point;
    }
    Bytes sid(session_id_.begin(), session_id_.end());
    keys_ = crypto::derive_session_keys(crypto::shared_secret_bytes(*cfg_.curve, shared), sid);
    mask_.key = keys_.k_mask;
    mask_.session_id = session_id_;
    mask_.test_zero = !cfg_.mask_enabled;
    phase_ = Phase::established;
    return ProtoError::none;
}

Frame ClientSession::send_intermediate(const Tensor& t_mid, const std::vector<Tensor>& targets) {
    if (phase_ != Phase::established) throw ContractError("send_intermediate: not established");
    crypto::IntBlob blob = crypto::quantize(t_mid, cfg_.frac_bits);
    last_saturated_ = blob.saturated;
    if (blob.saturated > 0 &&
        static_cast<double>(blob.saturated) >
            cfg_.max_saturation_ratio * static_cast<double>(blob.words.size())) {
        log_warn("quantization saturated " + std::to_string(blob.saturated) + " of " +
                 std::to_string(blob.words.size()) + " words");
    }
    uint64_t ctr = send_counter_; // sign_frame assigns this counter
    crypto::mask_in_place(blob, mask_, ctr, crypto::Direction::client_to_server);

    Bytes m2 = crypto::serialize_tensors(targets);
    if (cfg_.encrypt_enabled) m2 = crypto::encrypt_target(keys_.k_enc, session_id_, ctr, m2);
    return sign_frame(MsgType::m_cs2, cs2_payload(crypto::serialize_blob(blob), m2));
}

std::optional<Tensor> ClientSession::receive_gradient(const Frame& m_sc2, ProtoError& err) {
    if (phase_ != Phase::established) {
        err = phase_ == Phase::closed ? ProtoError::closed : ProtoError::wrong_phase;
        return std::nullopt;
    }
    if (m_sc2.type == MsgType::abort_session) {
        fail();
        err = ProtoError::aborted_by_peer;
        return std::nullopt;
    }
    if (m_sc2.type != MsgType::m_sc2) {
        fail();
        err = ProtoError::wrong_type;
        return std::nullopt;
    }
    if (m_sc2.session_id != session_id_) {
        fail();
        err = ProtoError::wrong_session;
        return std::nullopt;
    }
    if (m_sc2.counter <= recv_counter_seen_) {
        fail();
        err = ProtoError::stale_counter;
        return std::nullopt;
    }
    if (!crypto::schnorr_verify(*cfg_.curve, server_pk_, frame_digest(m_sc2), m_sc2.signature)) {
        fail();
        err = ProtoError::bad_signature;
        return std::nullopt;
    }
    recv_counter_seen_ = m_sc2.counter;

    auto blob = crypto::parse_blob(m_sc2.payload.data(), m_sc2.payload.size());
    if (!blob) {
        fail();
        err = ProtoError::bad_payload;
        return std::nullopt;
    }
    crypto::demask_in_place(*blob, mask_, m_sc2.counter, crypto::Direction::server_to_client);
    err = ProtoError::none;
    return crypto::dequantize(*blob);
}

Frame ClientSession::make_abort(ProtoError reason) {
    Frame f = sign_frame(MsgType::abort_session, Bytes{static_cast<uint8_t>(reason)});
    fail();
    return f;
}

// ---- server ---------------------------------------------------------------

ServerSession::ServerSession(SessionConfig cfg, std::map<std::string, crypto::Point> registry,
                             uint64_t seed)
    : cfg_(std::move(cfg)), registry_(std::move(registry)), rng_(seed) {}

Frame ServerSession::sign_frame(MsgType type, Bytes payload) {
    Frame f;
    f.type = type;
    f.session_id = session_id_;
    f.counter = send_counter_++;
    f.payload = std::move(payload);
    f.signature = crypto::schnorr_sign(*cfg_.curve, cfg_.identity, frame_digest(f));
    return f;
}

void ServerSession::fail() {
    phase_ = Phase::closed;
    keys_.zeroize();
    mask_.key.fill(0);
    pending_.reset();
}

void ServerSession::close() { fail(); }

std::optional<Frame> ServerSession::handle_cs1(const Frame& in, ProtoError& err) {
    std::string id;
    Bytes point_enc;
    if (!parse_cs1_payload(in.payload, id, point_enc)) {
        err = ProtoError::bad_payload;
        return std::nullopt;
    }
    auto it = registry_.find(id);
    if (it == registry_.end()) {
        err = ProtoError::unknown_party;
        return std::nullopt;
    }
    if (!crypto::schnorr_verify(*cfg_.curve, it->second, frame_digest(in), in.signature)) {
        err = ProtoError::bad_signature;
        return std::nullopt;
    }
    auto q_c = cfg_.curve->decode_point(point_enc);
    if (!q_c || q_c->inf) {
        err = ProtoError::bad_point;
        return std::nullopt;
    }

    client_id_ = id;
    client_pk_ = it->second;
    session_id_ = in.session_id;
    recv_counter_seen_ = in.counter;
    recv_any_ = true;

    mpz_class eph = cfg_.curve->random_scalar(rng_);
    crypto::Point q_s = cfg_.curve->mul_base(eph);
    crypto::Point shared;
    try {
        shared = crypto::ecdh_shared(*cfg_.curve, eph, *q_c);
    } catch (const ContractError&) {
        err = ProtoError::bad_point;
        return std::nullopt;
    }
    Bytes sid(session_id_.begin(), session_id_.end());
    keys_ = crypto::derive_session_keys(crypto::shared_secret_bytes(*cfg_.curve, shared), sid);
    mask_.key = keys_.k_mask;
    mask_.session_id = session_id_;
    mask_.test_zero = !cfg_.mask_enabled;
    phase_ = Phase::established;
    err = ProtoError::none;
    return sign_frame(MsgType::m_sc1, sc1_payload(cfg_.curve->encode_point(q_s)));
}

ProtoError ServerSession::handle_cs2(const Frame& in) {
    if (in.session_id != session_id_) return ProtoError::wrong_session;
    if (in.counter <= recv_counter_seen_) return ProtoError::stale_counter;
    if (!crypto::schnorr_verify(*cfg_.curve, client_pk_, frame_digest(in), in.signature))
        return ProtoError::bad_signature;
    Bytes m1, m2;
    if (!parse_cs2_payload(in.payload, m1, m2)) return ProtoError::bad_payload;
    auto blob = crypto::parse_blob(m1.data(), m1.size());
    if (!blob) return ProtoError::bad_payload;
    recv_counter_seen_ = in.counter;

    crypto::demask_in_place(*blob, mask_, in.counter, crypto::Direction::client_to_server);
    Bytes target_bytes = m2;
    if (cfg_.encrypt_enabled)
        target_bytes = crypto::decrypt_target(keys_.k_enc, session_id_, in.counter, m2);
    auto targets = crypto::parse_tensors(target_bytes.data(), target_bytes.size());
    if (!targets) return ProtoError::bad_payload;

    Intermediate inter;
    inter.t_mid = crypto::dequantize(*blob);
    inter.targets = std::move(*targets);
    inter.saturated = blob->saturated;
    pending_ = std::move(inter);
    return ProtoError::none;
}

std::optional<Frame> ServerSession::handle(const Frame& in, ProtoError& err) {
    err = ProtoError::none;
    if (phase_ == Phase::closed) {
        err = ProtoError::closed;
        return std::nullopt;
    }
    if (in.type == MsgType::abort_session) {
        fail();
        err = ProtoError::aborted_by_peer;
        return std::nullopt;
    }

    switch (in.type) {
        case MsgType::m_cs1: {
            if (phase_ != Phase::init) {
                err = ProtoError::wrong_phase;
                break;
            }
            auto reply = handle_cs1(in, err);
            if (err == ProtoError::none) return reply;
            break;
        }
        case MsgType::m_cs2: {
            if (phase_ != Phase::established) {
                err = ProtoError::wrong_phase;
                break;
            }
            err = handle_cs2(in);
            if (err == ProtoError::none) return std::nullopt;
            break;
        }
        default:
            err = ProtoError::wrong_type;
            break;
    }

    // every verification failure tears the session down and answers ABORT
    Frame abort = sign_frame(MsgType::abort_session, Bytes{static_cast<uint8_t>(err)});
    fail();
    return abort;
}

std::optional<Intermediate> ServerSession::take_intermediate() {
    auto out = std::move(pending_);
    pending_.reset();
    return out;
}

Frame ServerSession::send_gradient(const Tensor& t_back) {
    if (phase_ != Phase::established) throw ContractError("send_gradient: not established");
    // clip to the representable fixed-point range before serialization
    std::vector<float> clipped(t_back.values().begin(), t_back.values().end());
    float limit = cfg_.grad_clip;
    for (auto& v : clipped) v = std::max(-limit, std::min(limit, v));
    Tensor t = Tensor::from(t_back.shape(), std::move(clipped));

    crypto::IntBlob blob = crypto::quantize(t, cfg_.frac_bits);
    if (blob.saturated > 0 &&
        static_cast<double>(blob.saturated) >
            cfg_.max_saturation_ratio * static_cast<double>(blob.words.size())) {
        log_warn("gradient quantization saturated " + std::to_string(blob.saturated) + " words");
    }
    uint64_t ctr = send_counter_;
    crypto::mask_in_place(blob, mask_, ctr, crypto::Direction::server_to_client);
    return sign_frame(MsgType::m_sc2, crypto::serialize_blob(blob));
}

// ---- registry files ---------------------------------------------------------

std::map<std::string, crypto::Point> load_registry(const std::string& path,
                                                   const crypto::Curve& curve) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open registry: " + path);
    std::map<std::string, crypto::Point> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        lineno++;
        if (line.empty() || line[0] == '#') continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw DataError("registry line " + std::to_string(lineno) + ": missing comma");
        std::string id = line.substr(0, comma);
        auto pk = curve.decode_point(from_hex(line.substr(comma + 1)));
        if (!pk) throw DataError("registry line " + std::to_string(lineno) + ": bad point");
        out[id] = *pk;
    }
    return out;
}

void save_registry(const std::string& path, const std::map<std::string, crypto::Point>& entries,
                   const crypto::Curve& curve) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write registry: " + path);
    for (const auto& [id, pk] : entries) f << id << "," << to_hex(curve.encode_point(pk)) << "\n";
}

mpz_class load_secret_key(const std::string& path, const crypto::Curve& curve) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open key file: " + path);
    std::string hex;
    f >> hex;
    return curve.decode_scalar(from_hex(hex));
}

void save_secret_key(const std::string& path, const mpz_class& sk, const crypto::Curve& curve) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write key file: " + path);
    f << to_hex(curve.encode_scalar(sk)) << "\n";
}

} // namespace sgsl::proto
