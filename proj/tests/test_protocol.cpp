#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <thread>

#include "sgsl/channel.hpp"
#include "sgsl/protocol.hpp"

using namespace sgsl;
using namespace sgsl::proto;

namespace {

struct Pair {
    std::shared_ptr<crypto::Curve> curve;
    crypto::KeyPair client_key, server_key;
    std::unique_ptr<ClientSession> client;
    std::unique_ptr<ServerSession> server;
};

Pair make_pair(uint64_t seed, bool mask_enabled = true, bool encrypt_enabled = true,
               uint8_t frac_bits = 16) {
    Pair p;
    p.curve = std::make_shared<crypto::Curve>(crypto::CurveParams::secp256k1());
    Rng rng(seed);
    p.client_key = crypto::generate_keypair(*p.curve, rng);
    p.server_key = crypto::generate_keypair(*p.curve, rng);

    SessionConfig cc;
    cc.curve = p.curve;
    cc.identity = p.client_key;
    cc.mask_enabled = mask_enabled;
    cc.encrypt_enabled = encrypt_enabled;
    cc.frac_bits = frac_bits;
    SessionConfig sc = cc;
    sc.identity = p.server_key;

    p.client = std::make_unique<ClientSession>(cc, "meter-1", p.server_key.pk, seed + 1);
    p.server = std::make_unique<ServerSession>(
        sc, std::map<std::string, crypto::Point>{{"meter-1", p.client_key.pk}}, seed + 2);
    return p;
}

void run_handshake(Pair& p) {
    Frame cs1 = p.client->handshake_init();
    ProtoError err;
    auto sc1 = p.server->handle(cs1, err);
    REQUIRE(err == ProtoError::none);
    REQUIRE(sc1.has_value());
    REQUIRE(p.client->handshake_finish(*sc1) == ProtoError::none);
}

Frame reencode(const Frame& f) {
    Bytes wire = encode_frame(f);
    ProtoError err;
    auto parsed = parse_frame(wire.data(), wire.size(), err);
    REQUIRE(parsed.has_value());
    return *parsed;
}

} // namespace

TEST_CASE("frame codec round-trips and rejects malformed input") {
    Frame f;
    f.type = MsgType::m_cs2;
    for (size_t i = 0; i < 16; i++) f.session_id[i] = static_cast<uint8_t>(i);
    f.counter = 0x0123456789abcdefull;
    f.payload = {1, 2, 3, 4, 5};
    f.signature = {9, 9};

    Bytes wire = encode_frame(f);
    ProtoError err;
    auto parsed = parse_frame(wire.data(), wire.size(), err);
    REQUIRE(parsed.has_value());
    CHECK(parsed->type == f.type);
    CHECK(parsed->session_id == f.session_id);
    CHECK(parsed->counter == f.counter);
    CHECK(parsed->payload == f.payload);
    CHECK(parsed->signature == f.signature);
    CHECK(encode_frame(*parsed) == wire);

    // layout spot checks: magic, version, type byte
    CHECK(std::memcmp(wire.data(), "SGSL", 4) == 0);
    CHECK(wire[4] == 1);
    CHECK(wire[5] == 0x03);

    SUBCASE("truncations never parse") {
        for (size_t cut = 0; cut < wire.size(); cut++) {
            auto r = parse_frame(wire.data(), cut, err);
            CHECK_FALSE(r.has_value());
        }
    }
    SUBCASE("bad magic / version / type") {
        Bytes bad = wire;
        bad[0] = 'X';
        CHECK_FALSE(parse_frame(bad.data(), bad.size(), err).has_value());
        CHECK(err == ProtoError::bad_magic);
        bad = wire;
        bad[4] = 9;
        CHECK_FALSE(parse_frame(bad.data(), bad.size(), err).has_value());
        CHECK(err == ProtoError::bad_version);
        bad = wire;
        bad[5] = 0x77;
        CHECK_FALSE(parse_frame(bad.data(), bad.size(), err).has_value());
        CHECK(err == ProtoError::wrong_type);
    }
    SUBCASE("payload_len beyond buffer is a parse error") {
        Bytes bad = wire;
        bad[30] = 0xff; // payload_len low byte
        bad[31] = 0xff;
        CHECK_FALSE(parse_frame(bad.data(), bad.size(), err).has_value());
        CHECK(err == ProtoError::truncated);
    }
    SUBCASE("trailing garbage rejected") {
        Bytes bad = wire;
        bad.push_back(0);
        CHECK_FALSE(parse_frame(bad.data(), bad.size(), err).has_value());
        CHECK(err == ProtoError::bad_length);
    }
}

TEST_CASE("handshake happy path") {
    Pair p = make_pair(100);
    Frame cs1 = p.client->handshake_init();

    // format contract
    CHECK(cs1.type == MsgType::m_cs1);
    CHECK(cs1.counter == 0);
    CHECK(crypto::schnorr_verify(*p.curve, p.client_key.pk, frame_digest(cs1), cs1.signature));

    ProtoError err;
    auto sc1 = p.server->handle(reencode(cs1), err);
    REQUIRE(sc1.has_value());
    CHECK(sc1->type == MsgType::m_sc1);
    CHECK(sc1->counter == 0);
    CHECK(p.server->phase() == Phase::established);
    CHECK(p.server->client_id() == "meter-1");

    CHECK(p.client->handshake_finish(reencode(*sc1)) == ProtoError::none);
    CHECK(p.client->phase() == Phase::established);

    // both sides derived identical session keys
    CHECK(p.client->debug_keys().k_enc == p.server->debug_keys().k_enc);
    CHECK(p.client->debug_keys().k_mask == p.server->debug_keys().k_mask);
    CHECK(p.client->debug_keys().k_enc != p.client->debug_keys().k_mask);
}

TEST_CASE("fresh randomness per handshake") {
    Pair a = make_pair(200);
    Pair b = make_pair(201);
    Frame fa = a.client->handshake_init();
    Frame fb = b.client->handshake_init();
    CHECK(fa.payload != fb.payload); // distinct Q_c
    CHECK(fa.session_id != fb.session_id);
}

TEST_CASE("tampered M_CS1 aborts") {
    Pair p = make_pair(300);
    Frame cs1 = p.client->handshake_init();
    Bytes wire = encode_frame(cs1);
    wire[40] ^= 0x01; // a payload bit

    ProtoError err;
    auto parsed = parse_frame(wire.data(), wire.size(), err);
    REQUIRE(parsed.has_value()); // structurally fine, signature now invalid
    auto reply = p.server->handle(*parsed, err);
    CHECK(err == ProtoError::bad_signature);
    REQUIRE(reply.has_value());
    CHECK(reply->type == MsgType::abort_session);
    CHECK(p.server->phase() == Phase::closed);
    CHECK(p.server->debug_keys().zeroized());
}

TEST_CASE("unknown client id aborts") {
    Pair p = make_pair(400);
    SessionConfig cc;
    cc.curve = p.curve;
    cc.identity = p.client_key;
    ClientSession stranger(cc, "meter-unknown", p.server_key.pk, 7);
    ProtoError err;
    auto reply = p.server->handle(stranger.handshake_init(), err);
    CHECK(err == ProtoError::unknown_party);
    REQUIRE(reply.has_value());
    CHECK(reply->type == MsgType::abort_session);
}

TEST_CASE("replayed M_CS1 is rejected") {
    Pair p = make_pair(500);
    Frame cs1 = p.client->handshake_init();
    ProtoError err;
    auto sc1 = p.server->handle(cs1, err);
    REQUIRE(err == ProtoError::none);
    // same frame again: server is established now, phase check fires
    auto reply = p.server->handle(cs1, err);
    CHECK(err == ProtoError::wrong_phase);
    REQUIRE(reply.has_value());
    CHECK(reply->type == MsgType::abort_session);
    CHECK(p.server->phase() == Phase::closed);
}

TEST_CASE("intermediate exchange round-trips within the codec bound") {
    Pair p = make_pair(600);
    run_handshake(p);

    Rng rng(601);
    Tensor t_mid = Tensor::randn({2, 5, 8}, rng, 2.0f);
    Tensor target = Tensor::randn({2, 1}, rng);
    Tensor y_seq = Tensor::randn({2, 4}, rng);

    Frame cs2 = p.client->send_intermediate(t_mid, {target, y_seq});
    CHECK(cs2.type == MsgType::m_cs2);
    CHECK(cs2.counter == 1);

    ProtoError err;
    auto reply = p.server->handle(reencode(cs2), err);
    CHECK(err == ProtoError::none);
    CHECK_FALSE(reply.has_value()); // no protocol reply; application decides

    auto inter = p.server->take_intermediate();
    REQUIRE(inter.has_value());
    CHECK(inter->t_mid.shape() == t_mid.shape());
    const float bound = std::ldexp(1.0f, -17); // 2^-(frac_bits+1) at 16
    for (int64_t i = 0; i < t_mid.numel(); i++)
        CHECK(std::fabs(inter->t_mid.values()[static_cast<size_t>(i)] -
                        t_mid.values()[static_cast<size_t>(i)]) <= bound);

    // targets decrypt to the exact bytes
    REQUIRE(inter->targets.size() == 2);
    CHECK(std::memcmp(inter->targets[0].values().data(), target.values().data(),
                      sizeof(float) * 2) == 0);
    CHECK(std::memcmp(inter->targets[1].values().data(), y_seq.values().data(),
                      sizeof(float) * 8) == 0);
}

TEST_CASE("gradient exchange round-trips and clips") {
    Pair p = make_pair(700);
    run_handshake(p);

    Rng rng(701);
    Tensor t_mid = Tensor::randn({1, 3, 4}, rng);
    Frame cs2 = p.client->send_intermediate(t_mid, {});
    ProtoError err;
    p.server->handle(cs2, err);
    REQUIRE(err == ProtoError::none);

    std::vector<float> grads = {0.5f, -0.25f, 100.0f, -100.0f, 1.0f, 0.0f,
                                2.0f, -2.0f,  3.0f,   -3.0f,   4.0f, -4.0f};
    Tensor t_back = Tensor::from({1, 3, 4}, grads);
    Frame sc2 = p.server->send_gradient(t_back);
    CHECK(sc2.type == MsgType::m_sc2);

    auto got = p.client->receive_gradient(reencode(sc2), err);
    CHECK(err == ProtoError::none);
    REQUIRE(got.has_value());
    const float bound = std::ldexp(1.0f, -17);
    for (int64_t i = 0; i < t_back.numel(); i++) {
        float want = std::max(-8.0f, std::min(8.0f, grads[static_cast<size_t>(i)]));
        CHECK(std::fabs(got->values()[static_cast<size_t>(i)] - want) <= bound);
    }
}

TEST_CASE("tampered M_SC2 aborts the client") {
    Pair p = make_pair(800);
    run_handshake(p);
    Rng rng(801);
    Frame cs2 = p.client->send_intermediate(Tensor::randn({1, 2, 2}, rng), {});
    ProtoError err;
    p.server->handle(cs2, err);
    REQUIRE(err == ProtoError::none);

    Frame sc2 = p.server->send_gradient(Tensor::from({1, 2, 2}, {1, 2, 3, 4}));
    Bytes wire = encode_frame(sc2);
    wire[45] ^= 0x40;
    auto parsed = parse_frame(wire.data(), wire.size(), err);
    REQUIRE(parsed.has_value());
    auto got = p.client->receive_gradient(*parsed, err);
    CHECK_FALSE(got.has_value());
    CHECK(err == ProtoError::bad_signature);
    CHECK(p.client->phase() == Phase::closed);
    CHECK(p.client->debug_keys().zeroized());
}

TEST_CASE("out-of-order message types abort") {
    Pair p = make_pair(900);
    // M_SC2 before any handshake
    Frame bogus;
    bogus.type = MsgType::m_sc2;
    ProtoError err;
    auto got = p.client->receive_gradient(bogus, err);
    CHECK_FALSE(got.has_value());
    CHECK(err == ProtoError::wrong_phase);

    // server sees M_CS2 before M_CS1
    Pair q = make_pair(901);
    Frame cs2ish;
    cs2ish.type = MsgType::m_cs2;
    auto reply = q.server->handle(cs2ish, err);
    CHECK(err == ProtoError::wrong_phase);
    REQUIRE(reply.has_value());
    CHECK(reply->type == MsgType::abort_session);
}

TEST_CASE("mask words differ between directions within a step") {
    Pair p = make_pair(1000);
    run_handshake(p);
    Tensor t = Tensor::from({4}, {0, 0, 0, 0});

    Frame cs2 = p.client->send_intermediate(t, {});
    ProtoError err;
    p.server->handle(cs2, err);
    REQUIRE(err == ProtoError::none);
    Frame sc2 = p.server->send_gradient(t);

    // zero plaintext: payload words are exactly the mask words
    uint32_t l1 = get_u32le(cs2.payload.data());
    auto blob1 = crypto::parse_blob(cs2.payload.data() + 4, l1);
    auto blob2 = crypto::parse_blob(sc2.payload.data(), sc2.payload.size());
    REQUIRE(blob1.has_value());
    REQUIRE(blob2.has_value());
    CHECK(blob1->words != blob2->words);
}

TEST_CASE("transparency: masked and plain-codec sessions decode identically") {
    Pair masked = make_pair(1100, true, true);
    Pair plain = make_pair(1100, false, false);
    run_handshake(masked);
    run_handshake(plain);

    Rng rng(1101);
    for (int step = 0; step < 5; step++) {
        Tensor t_mid = Tensor::randn({2, 3, 4}, rng, 1.5f);
        Tensor target = Tensor::randn({2, 1}, rng);

        ProtoError err;
        masked.server->handle(masked.client->send_intermediate(t_mid, {target}), err);
        REQUIRE(err == ProtoError::none);
        plain.server->handle(plain.client->send_intermediate(t_mid, {target}), err);
        REQUIRE(err == ProtoError::none);

        auto im = masked.server->take_intermediate();
        auto ip = plain.server->take_intermediate();
        REQUIRE(im.has_value());
        REQUIRE(ip.has_value());
        CHECK(std::memcmp(im->t_mid.values().data(), ip->t_mid.values().data(),
                          sizeof(float) * static_cast<size_t>(t_mid.numel())) == 0);
        CHECK(std::memcmp(im->targets[0].values().data(), ip->targets[0].values().data(),
                          sizeof(float) * 2) == 0);

        Tensor t_back = Tensor::randn({2, 3, 4}, rng, 0.5f);
        auto gm = masked.client->receive_gradient(masked.server->send_gradient(t_back), err);
        REQUIRE(err == ProtoError::none);
        auto gp = plain.client->receive_gradient(plain.server->send_gradient(t_back), err);
        REQUIRE(err == ProtoError::none);
        CHECK(std::memcmp(gm->values().data(), gp->values().data(),
                          sizeof(float) * static_cast<size_t>(t_back.numel())) == 0);
    }
}

TEST_CASE("eavesdropper view: payload entropy at least 7.9 bits per byte") {
    Pair p = make_pair(1200);
    run_handshake(p);

    std::vector<uint32_t> hist(256, 0);
    size_t total = 0;
    for (int step = 0; step < 8; step++) {
        // skewed plaintext on purpose
        Tensor t_mid = Tensor::full({64, 64}, 1.0f);
        Tensor target = Tensor::full({64, 1}, 0.5f);
        Frame cs2 = p.client->send_intermediate(t_mid, {target});
        // m1 masked words region
        uint32_t l1 = get_u32le(cs2.payload.data());
        const uint8_t* blob = cs2.payload.data() + 4;
        // skip blob header: frac_bits u8, saturated u32, rank u8, dims
        size_t hdr = 1 + 4 + 1 + 4 * 2;
        for (size_t i = hdr; i < l1; i++) {
            hist[blob[i]]++;
            total++;
        }
        // m2 ciphertext region
        const uint8_t* m2 = cs2.payload.data() + 4 + l1 + 4;
        size_t l2 = get_u32le(cs2.payload.data() + 4 + l1);
        for (size_t i = 0; i < l2; i++) {
            hist[m2[i]]++;
            total++;
        }
        ProtoError err;
        p.server->handle(cs2, err);
        REQUIRE(err == ProtoError::none);
    }
    double entropy = 0;
    for (uint32_t c : hist) {
        if (!c) continue;
        double q = static_cast<double>(c) / static_cast<double>(total);
        entropy -= q * std::log2(q);
    }
    INFO("bytes ", total, " entropy ", entropy);
    CHECK(entropy >= 7.9);
}

TEST_CASE("fuzzed frames never crash the parser or the sessions") {
    Pair p = make_pair(1300);
    run_handshake(p);
    Rng rng(1301);
    int parsed_ok = 0;
    for (int i = 0; i < 20000; i++) {
        size_t len = rng.below(200);
        Bytes junk(len);
        for (auto& b : junk) b = static_cast<uint8_t>(rng.next_u32());
        // bias some cases toward near-valid frames
        if (i % 4 == 0 && len >= 6) {
            std::memcpy(junk.data(), "SGSL", 4);
            junk[4] = 1;
            junk[5] = static_cast<uint8_t>(1 + rng.below(5));
        }
        ProtoError err;
        auto f = parse_frame(junk.data(), junk.size(), err);
        if (!f) continue;
        parsed_ok++;
        auto reply = p.server->handle(*f, err);
        (void)reply;
    }
    // the sessions must have survived; state may be closed, never crashed
    CHECK(true);
    INFO("structurally valid fuzz frames: ", parsed_ok);
}

TEST_CASE("registry and key files round-trip") {
    auto curve = crypto::Curve(crypto::CurveParams::secp256k1());
    Rng rng(1400);
    auto kp1 = crypto::generate_keypair(curve, rng);
    auto kp2 = crypto::generate_keypair(curve, rng);

    std::string reg_path = "/tmp/sgsl_test_registry.txt";
    std::string key_path = "/tmp/sgsl_test_key.txt";
    save_registry(reg_path, {{"meter-1", kp1.pk}, {"meter-2", kp2.pk}}, curve);
    auto loaded = load_registry(reg_path, curve);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded.at("meter-1") == kp1.pk);
    CHECK(loaded.at("meter-2") == kp2.pk);

    save_secret_key(key_path, kp1.sk, curve);
    CHECK(load_secret_key(key_path, curve) == kp1.sk);

    std::remove(reg_path.c_str());
    std::remove(key_path.c_str());
    CHECK_THROWS_AS(load_registry(reg_path, curve), DataError);
}

TEST_CASE("loopback channel delivers in order") {
    LoopbackPair pair;
    pair.client_end().send({1, 2, 3});
    pair.client_end().send({4});
    auto a = pair.server_end().recv();
    auto b = pair.server_end().recv();
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(*a == Bytes{1, 2, 3});
    CHECK(*b == Bytes{4});
    pair.server_end().send({5, 6});
    CHECK(*pair.client_end().recv() == Bytes{5, 6});
}

TEST_CASE("tcp channel round-trips frames") {
    TcpListener listener(0);
    uint16_t port = listener.port();

    std::thread server_thread([&] {
        auto chan = listener.accept();
        REQUIRE(chan);
        auto msg = chan->recv();
        REQUIRE(msg.has_value());
        chan->send(*msg); // echo
    });

    auto client = TcpChannel::connect("127.0.0.1", port);
    REQUIRE(client);
    Bytes msg(1000);
    Rng rng(1500);
    for (auto& b : msg) b = static_cast<uint8_t>(rng.next_u32());
    CHECK(client->send(msg));
    auto echoed = client->recv();
    REQUIRE(echoed.has_value());
    CHECK(*echoed == msg);
    server_thread.join();
}

TEST_CASE("full session over loopback channel") {
    Pair p = make_pair(1600);
    LoopbackPair chan;

    std::thread server_thread([&] {
        ProtoError err;
        while (true) {
            auto wire = chan.server_end().recv();
            if (!wire) break;
            auto f = parse_frame(wire->data(), wire->size(), err);
            if (!f) break;
            auto reply = p.server->handle(*f, err);
            if (reply) chan.server_end().send(encode_frame(*reply));
            if (f->type == MsgType::m_cs2 && err == ProtoError::none) {
                auto inter = p.server->take_intermediate();
                if (!inter) break;
                // echo the tensor back as the "gradient"
                chan.server_end().send(encode_frame(p.server->send_gradient(inter->t_mid)));
                break;
            }
        }
    });

    chan.client_end().send(encode_frame(p.client->handshake_init()));
    auto wire = chan.client_end().recv();
    REQUIRE(wire.has_value());
    ProtoError err;
    auto sc1 = parse_frame(wire->data(), wire->size(), err);
    REQUIRE(sc1.has_value());
    REQUIRE(p.client->handshake_finish(*sc1) == ProtoError::none);

    Rng rng(1601);
    Tensor t_mid = Tensor::randn({1, 4, 4}, rng);
    chan.client_end().send(encode_frame(p.client->send_intermediate(t_mid, {})));
    wire = chan.client_end().recv();
    REQUIRE(wire.has_value());
    auto sc2 = parse_frame(wire->data(), wire->size(), err);
    REQUIRE(sc2.has_value());
    auto grad = p.client->receive_gradient(*sc2, err);
    CHECK(err == ProtoError::none);
    REQUIRE(grad.has_value());
    const float bound = 2 * std::ldexp(1.0f, -17); // two codec trips
    for (int64_t i = 0; i < t_mid.numel(); i++)
        CHECK(std::fabs(grad->values()[static_cast<size_t>(i)] -
                        t_mid.values()[static_cast<size_t>(i)]) <= bound);
    server_thread.join();
}
