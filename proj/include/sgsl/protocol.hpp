#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "sgsl/crypto/ec.hpp"
#include "sgsl/crypto/hkdf.hpp"
#include "sgsl/crypto/mask.hpp"
#include "sgsl/crypto/schnorr.hpp"
#include "sgsl/tensor.hpp"

namespace sgsl::proto {

constexpr char kMagic[4] = {'S', 'G', 'S', 'L'};
constexpr uint8_t kVersion = 1;

enum class MsgType : uint8_t {
    m_cs1 = 0x01,
    m_sc1 = 0x02,
    m_cs2 = 0x03,
    m_sc2 = 0x04,
    abort_session = 0x05,
};

enum class ProtoError : uint8_t {
    none = 0,
    bad_magic,
    bad_version,
    truncated,
    bad_length,
    bad_signature,
    unknown_party,
    wrong_phase,
    wrong_type,
    stale_counter,
    wrong_session,
    bad_point,
    bad_payload,
    closed,
    aborted_by_peer,
};

const char* to_string(ProtoError e);

struct Frame {
    uint8_t version = kVersion;
    MsgType type = MsgType::abort_session;
    std::array<uint8_t, 16> session_id{};
    uint64_t counter = 0;
    Bytes payload;
    Bytes signature;
};

// wire layout: magic | version u8 | msg_type u8 | session_id 16B |
// counter u64 LE | payload_len u32 LE | payload | sig_len u16 LE | signature
Bytes encode_frame(const Frame& f);
std::optional<Frame> parse_frame(const uint8_t* data, size_t len, ProtoError& err);

// SHA-256 over everything before sig_len: the signature covers the header
// and the payload
crypto::Digest frame_digest(const Frame& f);

enum class Phase : uint8_t { init, await_peer_point, established, closed };

struct SessionConfig {
    std::shared_ptr<const crypto::Curve> curve;
    crypto::KeyPair identity;
    uint8_t frac_bits = 16;
    float grad_clip = 8.0f;
    bool mask_enabled = true;       // plain-codec mode when false
    bool encrypt_enabled = true;    //
    double max_saturation_ratio = 0.001;
};

// payload of a decoded M_CS2 on the server side
struct Intermediate {
    Tensor t_mid;
    std::vector<Tensor> targets;
    uint32_t saturated = 0;
};

class ClientSession {
public:
    ClientSession(SessionConfig cfg, std::string client_id, crypto::Point server_pk, uint64_t seed);

    // Step 1: fresh ephemeral scalar, signed M_CS1
    Frame handshake_init();
    // Step 2 counterpart: verify M_SC1, derive session keys
    ProtoError handshake_finish(const Frame& m_sc1);
    // Step 3: quantize + mask t_mid, encrypt targets, sign
    Frame send_intermediate(const Tensor& t_mid, const std::vector<Tensor>& targets);
    // Step 5: verify M_SC2, demask the gradient
    std::optional<Tensor> receive_gradient(const Frame& m_sc2, ProtoError& err);

    Frame make_abort(ProtoError reason);
    void close();

    Phase phase() const { return phase_; }
    const crypto::SessionKeys& debug_keys() const { return keys_; }
    const std::array<uint8_t, 16>& session_id() const { return session_id_; }
    uint32_t last_saturated() const { return last_saturated_; }

private:
    Frame sign_frame(MsgType type, Bytes payload);
    void fail();

    SessionConfig cfg_;
    std::string client_id_;
    crypto::Point server_pk_;
    Rng rng_;
    Phase phase_ = Phase::init;
    std::array<uint8_t, 16> session_id_{};
    mpz_class eph_sk_;
    crypto::SessionKeys keys_;
    crypto::MaskStream mask_;
    uint64_t send_counter_ = 0;
    uint64_t recv_counter_seen_ = 0;
    bool recv_any_ = false;
    uint32_t last_saturated_ = 0;
};

class ServerSession {
public:
    ServerSession(SessionConfig cfg, std::map<std::string, crypto::Point> registry, uint64_t seed);

    // dispatches one incoming frame; a returned frame (M_SC1 or ABORT) must
    // be sent to the peer
    std::optional<Frame> handle(const Frame& in, ProtoError& err);

    // decoded payload of the most recent M_CS2
    std::optional<Intermediate> take_intermediate();

    // Step 4: clip + quantize + mask the cut-layer gradient, sign
    Frame send_gradient(const Tensor& t_back);

    Phase phase() const { return phase_; }
    const crypto::SessionKeys& debug_keys() const { return keys_; }
    const std::string& client_id() const { return client_id_; }
    void close();

private:
    Frame sign_frame(MsgType type, Bytes payload);
    std::optional<Frame> handle_cs1(const Frame& in, ProtoError& err);
    ProtoError handle_cs2(const Frame& in);
    void fail();

    SessionConfig cfg_;
    std::map<std::string, crypto::Point> registry_;
    Rng rng_;
    Phase phase_ = Phase::init;
    std::array<uint8_t, 16> session_id_{};
    std::string client_id_;
    crypto::Point client_pk_;
    crypto::SessionKeys keys_;
    crypto::MaskStream mask_;
    uint64_t send_counter_ = 0;
    uint64_t recv_counter_seen_ = 0;
    bool recv_any_ = false;
    std::optional<Intermediate> pending_;
};

// ---- key registry files ----------------------------------------------------
// text lines: party_id,hex(compressed pk)
std::map<std::string, crypto::Point> load_registry(const std::string& path, const crypto::Curve& curve);
void save_registry(const std::string& path, const std::map<std::string, crypto::Point>& entries,
                   const crypto::Curve& curve);

// raw 32-byte scalar, hex-encoded
mpz_class load_secret_key(const std::string& path, const crypto::Curve& curve);
void save_secret_key(const std::string& path, const mpz_class& sk, const crypto::Curve& curve);

} // namespace sgsl::proto
