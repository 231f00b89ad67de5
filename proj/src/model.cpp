#include "sgsl/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace sgsl::model {

void ModelConfig::validate() const {
    if (heads * head_dim != d_model) throw ContractError("heads * head_dim != d_model");
    if (dis_heads * dis_head_dim != dis_d_model)
        throw ContractError("dis_heads * dis_head_dim != dis_d_model");
    if (split_layer < 1 || split_layer >= layers)
        throw ContractError("split layer must satisfy 1 <= L_c < L");
    if (feature_dim < 1 || seq_len < 1) throw ContractError("bad model dimensions");
}

// ---- init ------------------------------------------------------------

namespace {

Tensor init_weight(int rows, int cols, Rng& rng) {
    float std = 1.0f / std::sqrt(static_cast<float>(rows));
    return Tensor::randn({rows, cols}, rng, std).set_requires_grad(true);
}

LayerParams init_layer(int d, int heads, int head_dim, int hidden, Rng& rng) {
    LayerParams lp;
    lp.ln1_gain = Tensor::ones({d}).set_requires_grad(true);
    lp.ln1_bias = Tensor::zeros({d}).set_requires_grad(true);
    for (int h = 0; h < heads; h++) lp.u_qkv.push_back(init_weight(d, 3 * head_dim, rng));
    lp.u_msa = init_weight(heads * head_dim, d, rng);
    lp.ln2_gain = Tensor::ones({d}).set_requires_grad(true);
    lp.ln2_bias = Tensor::zeros({d}).set_requires_grad(true);
    lp.mlp_w1 = init_weight(d, hidden, rng);
    lp.mlp_b1 = Tensor::zeros({hidden}).set_requires_grad(true);
    lp.mlp_w2 = init_weight(hidden, d, rng);
    lp.mlp_b2 = Tensor::zeros({d}).set_requires_grad(true);
    return lp;
}

} // namespace

EncoderParams init_encoder(const ModelConfig& cfg, Rng& rng) {
    EncoderParams p;
    p.embed = init_weight(cfg.feature_dim, cfg.d_model, rng);
    p.pos = Tensor::randn({cfg.seq_len + 1, cfg.d_model}, rng, 0.02f).set_requires_grad(true);
    p.class_token = Tensor::randn({1, cfg.d_model}, rng, 0.02f).set_requires_grad(true);
    for (int l = 0; l < cfg.split_layer; l++)
        p.layers.push_back(init_layer(cfg.d_model, cfg.heads, cfg.head_dim, cfg.mlp_hidden, rng));
    return p;
}

DecoderParams init_decoder(const ModelConfig& cfg, Rng& rng) {
    DecoderParams p;
    for (int l = cfg.split_layer; l < cfg.layers; l++)
        p.layers.push_back(init_layer(cfg.d_model, cfg.heads, cfg.head_dim, cfg.mlp_hidden, rng));
    p.final_ln_gain = Tensor::ones({cfg.d_model}).set_requires_grad(true);
    p.final_ln_bias = Tensor::zeros({cfg.d_model}).set_requires_grad(true);
    p.head_w = init_weight(cfg.d_model, 1, rng);
    p.head_b = Tensor::zeros({1}).set_requires_grad(true);
    return p;
}

DiscriminatorParams init_discriminator(const ModelConfig& cfg, Rng& rng) {
    DiscriminatorParams p;
    p.embed = init_weight(1, cfg.dis_d_model, rng);
    p.pos = Tensor::randn({cfg.seq_len + 1, cfg.dis_d_model}, rng, 0.02f).set_requires_grad(true);
    p.class_token = Tensor::randn({1, cfg.dis_d_model}, rng, 0.02f).set_requires_grad(true);
    for (int l = 0; l < cfg.dis_layers; l++)
        p.layers.push_back(
            init_layer(cfg.dis_d_model, cfg.dis_heads, cfg.dis_head_dim, cfg.dis_mlp_hidden, rng));
    p.f_ln_gain = Tensor::ones({cfg.dis_d_model}).set_requires_grad(true);
    p.f_ln_bias = Tensor::zeros({cfg.dis_d_model}).set_requires_grad(true);
    p.head_w = init_weight(cfg.dis_d_model, 1, rng);
    p.head_b = Tensor::zeros({1}).set_requires_grad(true);
    return p;
}

ModelParams init_model(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    ModelParams m;
    m.cfg = cfg;
    m.enc = init_encoder(cfg, rng);
    m.dec = init_decoder(cfg, rng);
    m.dis = init_discriminator(cfg, rng);
    return m;
}

// ---- named parameter lists -------------------------------------------

namespace {

void push_layer(NamedParams& out, const std::string& prefix, const LayerParams& lp) {
    out.emplace_back(prefix + ".ln1.gain", lp.ln1_gain);
    out.emplace_back(prefix + ".ln1.bias", lp.ln1_bias);
    for (size_t h = 0; h < lp.u_qkv.size(); h++)
        out.emplace_back(prefix + ".head" + std::to_string(h) + ".u_qkv", lp.u_qkv[h]);
    out.emplace_back(prefix + ".u_msa", lp.u_msa);
    out.emplace_back(prefix + ".ln2.gain", lp.ln2_gain);
    out.emplace_back(prefix + ".ln2.bias", lp.ln2_bias);
    out.emplace_back(prefix + ".mlp.w1", lp.mlp_w1);
    out.emplace_back(prefix + ".mlp.b1", lp.mlp_b1);
    out.emplace_back(prefix + ".mlp.w2", lp.mlp_w2);
    out.emplace_back(prefix + ".mlp.b2", lp.mlp_b2);
}

} // namespace

NamedParams named_params(const EncoderParams& p) {
    NamedParams out;
    out.emplace_back("enc.embed", p.embed);
    out.emplace_back("enc.pos", p.pos);
    out.emplace_back("enc.class_token", p.class_token);
    for (size_t l = 0; l < p.layers.size(); l++)
        push_layer(out, "enc.layer" + std::to_string(l), p.layers[l]);
    return out;
}

NamedParams named_params(const DecoderParams& p) {
    NamedParams out;
    for (size_t l = 0; l < p.layers.size(); l++)
        push_layer(out, "dec.layer" + std::to_string(l), p.layers[l]);
    out.emplace_back("dec.final_ln.gain", p.final_ln_gain);
    out.emplace_back("dec.final_ln.bias", p.final_ln_bias);
    out.emplace_back("dec.head.w", p.head_w);
    out.emplace_back("dec.head.b", p.head_b);
    return out;
}

NamedParams named_params(const DiscriminatorParams& p) {
    NamedParams out;
    out.emplace_back("dis.embed", p.embed);
    out.emplace_back("dis.pos", p.pos);
    out.emplace_back("dis.class_token", p.class_token);
    for (size_t l = 0; l < p.layers.size(); l++)
        push_layer(out, "dis.layer" + std::to_string(l), p.layers[l]);
    out.emplace_back("dis.f_ln.gain", p.f_ln_gain);
    out.emplace_back("dis.f_ln.bias", p.f_ln_bias);
    out.emplace_back("dis.head.w", p.head_w);
    out.emplace_back("dis.head.b", p.head_b);
    return out;
}

void sgd_step(const NamedParams& params, float eta) {
    for (const auto& [name, t] : params) {
        Tensor tt = t;
        if (!tt.has_grad()) continue;
        auto v = tt.values_mut();
        auto g = tt.grad();
        for (size_t i = 0; i < v.size(); i++) v[i] -= eta * g[i];
    }
}

void zero_grads(const NamedParams& params) {
    for (const auto& [name, t] : params) {
        Tensor tt = t;
        tt.zero_grad();
    }
}

// ---- forward passes -----------------------------------------------------

namespace {

Tensor run_block(const LayerParams& lp, const Tensor& z, int heads, int head_dim) {
    Tensor zn = layernorm(z, lp.ln1_gain, lp.ln1_bias);
    std::vector<Tensor> sa;
    float att_scale = 1.0f / std::sqrt(static_cast<float>(head_dim));
    for (int h = 0; h < heads; h++) {
        Tensor qkv = matmul(zn, lp.u_qkv[static_cast<size_t>(h)]); // [B,N,3Dh]
        Tensor q = narrow(qkv, 2, 0, head_dim);
        Tensor k = narrow(qkv, 2, head_dim, head_dim);
        Tensor v = narrow(qkv, 2, 2 * head_dim, head_dim);
        Tensor att = scale(matmul(q, transpose_last2(k)), att_scale);
        sa.push_back(matmul(softmax_rows(att), v));
    }
    Tensor msa = matmul(concat(sa, 2), lp.u_msa);
    Tensor z1 = add(z, msa);
    Tensor zn2 = layernorm(z1, lp.ln2_gain, lp.ln2_bias);
    Tensor hidden = gelu(add_bias(matmul(zn2, lp.mlp_w1), lp.mlp_b1));
    Tensor mlp = add_bias(matmul(hidden, lp.mlp_w2), lp.mlp_b2);
    return add(z1, mlp);
}

// tokens = [class; x*E] + pos, shared by generator encoder and discriminator
Tensor embed_tokens(const Tensor& x, const Tensor& embed, const Tensor& class_token,
                    const Tensor& pos) {
    int batch = x.dim(0);
    int seq = x.dim(1);
    int d = embed.dim(1);
    if (x.dim(2) != embed.dim(0)) throw ShapeError("embed_tokens: feature dimension mismatch");
    if (seq + 1 > pos.dim(0)) throw ShapeError("embed_tokens: sequence longer than positional table");
    Tensor emb = matmul(x, embed); // [B,S,D]
    Tensor cls = add_table(Tensor::zeros({batch, 1, d}), class_token);
    Tensor tokens = concat({cls, emb}, 1); // [B,S+1,D]
    return add_table(tokens, narrow(pos, 0, 0, seq + 1));
}

} // namespace

Tensor encode(const ModelConfig& cfg, const EncoderParams& p, const Tensor& x) {
    Tensor z = embed_tokens(x, p.embed, p.class_token, p.pos);
    for (const LayerParams& lp : p.layers) z = run_block(lp, z, cfg.heads, cfg.head_dim);
    return z;
}

Tensor decode(const ModelConfig& cfg, const DecoderParams& p, const Tensor& t_mid) {
    if (t_mid.rank() != 3 || t_mid.dim(2) != cfg.d_model)
        throw ShapeError("decode: t_mid must be [B,S+1,D]");
    Tensor z = t_mid;
    for (const LayerParams& lp : p.layers) z = run_block(lp, z, cfg.heads, cfg.head_dim);
    Tensor cls = reshape(narrow(z, 1, 0, 1), {z.dim(0), cfg.d_model});
    Tensor y = layernorm(cls, p.final_ln_gain, p.final_ln_bias);
    return add_bias(matmul(y, p.head_w), p.head_b); // [B,1]
}

Tensor dis_features(const ModelConfig& cfg, const DiscriminatorParams& p, const Tensor& window) {
    if (window.rank() != 3 || window.dim(2) != 1) throw ShapeError("dis_features: window must be [B,S,1]");
    Tensor z = embed_tokens(window, p.embed, p.class_token, p.pos);
    for (const LayerParams& lp : p.layers) z = run_block(lp, z, cfg.dis_heads, cfg.dis_head_dim);
    Tensor cls = reshape(narrow(z, 1, 0, 1), {z.dim(0), cfg.dis_d_model});
    return layernorm(cls, p.f_ln_gain, p.f_ln_bias);
}

Tensor dis_logits(const DiscriminatorParams& p, const Tensor& features) {
    Tensor s = add_bias(matmul(features, p.head_w), p.head_b); // [B,1]
    return reshape(s, {features.dim(0)});
}

Tensor rec_loss(const Tensor& xhat, const Tensor& target) {
    return mean_all(l2norm_rows(sub(xhat, target)));
}

Tensor adv_loss(const ModelConfig& cfg, const DiscriminatorParams& p, const Tensor& real_window,
                const Tensor& fake_window) {
    Tensor fr = dis_features(cfg, p, real_window);
    Tensor ff = dis_features(cfg, p, fake_window);
    Tensor mf = mean_axis0(ff);
    Tensor diff = add_bias(fr, scale(mf, -1.0f));
    return mean_all(l2norm_rows(diff));
}

Tensor fake_window_from(const Tensor& y_seq, const Tensor& xhat) {
    int batch = y_seq.dim(0);
    int seq = y_seq.dim(1);
    Tensor real3 = reshape(y_seq, {batch, seq, 1});
    Tensor head = narrow(real3, 1, 0, seq - 1);
    Tensor tail = reshape(xhat, {batch, 1, 1});
    return concat({head, tail}, 1);
}

StepLosses server_losses_backward(const ModelParams& m, Tape& tape, const Tensor& xhat,
                                  const Batch& batch, const TrainConfig& cfg) {
    Tensor l_rec = rec_loss(xhat, batch.target);
    Tensor real3 = reshape(batch.y_seq, {batch.y_seq.dim(0), batch.y_seq.dim(1), 1});
    Tensor fake3 = fake_window_from(batch.y_seq, xhat);
    Tensor l_adv = adv_loss(m.cfg, m.dis, real3, fake3);
    Tensor loss = add(scale(l_rec, cfg.lambda_rec), scale(l_adv, cfg.lambda_adv));
    if (!loss.all_finite() || !l_rec.all_finite() || !l_adv.all_finite())
        throw ContractError("train step produced a non-finite loss");
    tape.backward(loss);
    return StepLosses{l_rec.item(), l_adv.item()};
}

void train_discriminator(ModelParams& m, const Batch& batch, const Tensor& xhat_detached,
                         const TrainConfig& cfg) {
    NamedParams dis_params = named_params(m.dis);
    zero_grads(dis_params); // drop the generator pass's contribution
    Tape tape;
    {
        Tape::Scope scope(tape);
        Tensor real3 = reshape(batch.y_seq, {batch.y_seq.dim(0), batch.y_seq.dim(1), 1});
        Tensor fake3 = fake_window_from(batch.y_seq, xhat_detached);
        Tensor l_dis;
        if (cfg.strict_paper_dis) {
            l_dis = adv_loss(m.cfg, m.dis, real3, fake3);
        } else {
            Tensor lr = dis_logits(m.dis, dis_features(m.cfg, m.dis, real3));
            Tensor lf = dis_logits(m.dis, dis_features(m.cfg, m.dis, fake3));
            Tensor logits = concat({lr, lf}, 0);
            std::vector<float> labels(static_cast<size_t>(logits.numel()), 0.0f);
            for (int64_t i = 0; i < lr.numel(); i++) labels[static_cast<size_t>(i)] = 1.0f;
            l_dis = bce_with_logits(logits, Tensor::from({static_cast<int>(labels.size())}, labels));
        }
        if (!l_dis.all_finite()) throw ContractError("discriminator loss is non-finite");
        tape.backward(l_dis);
    }
    sgd_step(dis_params, cfg.eta);
    zero_grads(dis_params);
}

StepLosses train_step(ModelParams& m, const Batch& batch, const TrainConfig& cfg) {
    NamedParams enc_params = named_params(m.enc);
    NamedParams dec_params = named_params(m.dec);
    NamedParams dis_params = named_params(m.dis);

    StepLosses losses;
    Tensor xhat_detached;
    Tape tape;
    {
        Tape::Scope scope(tape);
        Tensor t_mid = encode(m.cfg, m.enc, batch.x);
        Tensor xhat = decode(m.cfg, m.dec, t_mid);
        xhat_detached = detach(xhat);
        losses = server_losses_backward(m, tape, xhat, batch, cfg);
    }
    sgd_step(enc_params, cfg.eta);
    sgd_step(dec_params, cfg.eta);
    zero_grads(enc_params);
    zero_grads(dec_params);

    train_discriminator(m, batch, xhat_detached, cfg);
    return losses;
}

std::vector<float> anomaly_scores(const ModelParams& m, const Tensor& x, const Tensor& target) {
    Tensor xhat = decode(m.cfg, m.dec, encode(m.cfg, m.enc, x)); // no tape active: inference
    Tensor err = l2norm_rows(sub(xhat, target));
    return std::vector<float>(err.values().begin(), err.values().end());
}

float anomaly_score(const ModelParams& m, const Tensor& x, const Tensor& target) {
    return anomaly_scores(m, x, target)[0];
}

// ---- checkpoint ------------------------------------------------------------

static constexpr char kMagic[4] = {'G', 'T', 'C', 'K'};

void save_checkpoint(const std::string& path, const NamedParams& params) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint for writing: " + path);
    f.write(kMagic, 4);
    uint8_t version = 1;
    f.write(reinterpret_cast<const char*>(&version), 1);
    for (const auto& [name, t] : params) {
        Bytes rec;
        put_u16le(rec, static_cast<uint16_t>(name.size()));
        rec.insert(rec.end(), name.begin(), name.end());
        rec.push_back(static_cast<uint8_t>(t.rank()));
        for (int i = 0; i < t.rank(); i++) put_u32le(rec, static_cast<uint32_t>(t.dim(i)));
        for (float v : t.values()) {
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_u32le(rec, bits);
        }
        f.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
    }
    if (!f) throw DataError("checkpoint write failed: " + path);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path);
    std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const uint8_t* p = reinterpret_cast<const uint8_t*>(buf.data());
    size_t n = buf.size(), off = 0;
    auto need = [&](size_t k) {
        if (off + k > n) throw DataError("truncated checkpoint: " + path);
    };
    need(5);
    if (std::memcmp(p, kMagic, 4) != 0) throw DataError("bad checkpoint magic: " + path);
    if (p[4] != 1) throw DataError("unsupported checkpoint version");
    off = 5;
    std::map<std::string, Tensor> out;
    while (off < n) {
        need(2);
        uint16_t name_len = get_u16le(p + off);
        off += 2;
        need(name_len);
        std::string name(reinterpret_cast<const char*>(p + off), name_len);
        off += name_len;
        need(1);
        uint8_t rank = p[off++];
        Shape shape(rank);
        need(4u * rank);
        for (int i = 0; i < rank; i++) {
            shape[static_cast<size_t>(i)] = static_cast<int>(get_u32le(p + off));
            off += 4;
        }
        int64_t count = numel_of(shape);
        need(4u * static_cast<size_t>(count));
        std::vector<float> values(static_cast<size_t>(count));
        for (int64_t i = 0; i < count; i++) {
            uint32_t bits = get_u32le(p + off);
            off += 4;
            std::memcpy(&values[static_cast<size_t>(i)], &bits, 4);
        }
        out.emplace(std::move(name), Tensor::from(std::move(shape), std::move(values)));
    }
    return out;
}

void load_into(const std::string& path, const NamedParams& params) {
    auto loaded = load_checkpoint(path);
    for (const auto& [name, t] : params) {
        auto it = loaded.find(name);
        if (it == loaded.end()) throw DataError("checkpoint missing tensor: " + name);
        if (it->second.shape() != t.shape()) throw DataError("checkpoint shape mismatch for " + name);
        Tensor dst = t;
        auto v = dst.values_mut();
        auto src = it->second.values();
        std::copy(src.begin(), src.end(), v.begin());
    }
}

} // namespace sgsl::model
