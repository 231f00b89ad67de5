// Double-precision mirror of the generator/discriminator forward passes and
// losses. Test-only: feeds the finite-difference gradient checks and the
// hand-verified layer oracle.
#pragma once

#include <map>
#include <string>

#include "ref_ops.hpp"
#include "sgsl/model.hpp"

namespace ref {

using ParamMap = std::map<std::string, DT>;

inline ParamMap to_param_map(const sgsl::model::NamedParams& params) {
    ParamMap out;
    for (const auto& [name, t] : params)
        out[name] = DT{t.shape(), {t.values().begin(), t.values().end()}};
    return out;
}

inline DT run_block(const ParamMap& p, const std::string& prefix, const DT& z, int heads,
                    int head_dim) {
    DT zn = layernorm(z, p.at(prefix + ".ln1.gain"), p.at(prefix + ".ln1.bias"));
    std::vector<DT> sa;
    double att_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    for (int h = 0; h < heads; h++) {
        DT qkv = matmul(zn, p.at(prefix + ".head" + std::to_string(h) + ".u_qkv"));
        DT q = narrow(qkv, 2, 0, head_dim);
        DT k = narrow(qkv, 2, head_dim, head_dim);
        DT v = narrow(qkv, 2, 2 * head_dim, head_dim);
        DT att = softmax_rows(scale(matmul(q, transpose_last2(k)), att_scale));
        sa.push_back(matmul(att, v));
    }
    DT msa = matmul(concat_axis(sa, 2), p.at(prefix + ".u_msa"));
    DT z1 = add(z, msa);
    DT zn2 = layernorm(z1, p.at(prefix + ".ln2.gain"), p.at(prefix + ".ln2.bias"));
    DT hidden = gelu(add_bias(matmul(zn2, p.at(prefix + ".mlp.w1")), p.at(prefix + ".mlp.b1")));
    DT mlp = add_bias(matmul(hidden, p.at(prefix + ".mlp.w2")), p.at(prefix + ".mlp.b2"));
    return add(z1, mlp);
}

inline DT embed_tokens(const DT& x, const DT& embed, const DT& cls, const DT& pos) {
    int batch = x.dim(0);
    int seq = x.dim(1);
    int d = embed.dim(1);
    DT emb = matmul(x, embed);
    DT cls_tiled = make({batch, 1, d});
    for (int bi = 0; bi < batch; bi++)
        for (int i = 0; i < d; i++) cls_tiled.v[static_cast<size_t>(bi * d + i)] = cls.v[static_cast<size_t>(i)];
    DT tokens = concat_axis({cls_tiled, emb}, 1);
    return add_table(tokens, narrow(pos, 0, 0, seq + 1));
}

inline DT encode(const sgsl::model::ModelConfig& cfg, const ParamMap& p, const DT& x) {
    DT z = embed_tokens(x, p.at("enc.embed"), p.at("enc.class_token"), p.at("enc.pos"));
    for (int l = 0; l < cfg.split_layer; l++)
        z = run_block(p, "enc.layer" + std::to_string(l), z, cfg.heads, cfg.head_dim);
    return z;
}

inline DT decode(const sgsl::model::ModelConfig& cfg, const ParamMap& p, const DT& t_mid) {
    DT z = t_mid;
    for (int l = 0; l < cfg.layers - cfg.split_layer; l++)
        z = run_block(p, "dec.layer" + std::to_string(l), z, cfg.heads, cfg.head_dim);
    DT cls = reshape(narrow(z, 1, 0, 1), {z.dim(0), cfg.d_model});
    DT y = layernorm(cls, p.at("dec.final_ln.gain"), p.at("dec.final_ln.bias"));
    return add_bias(matmul(y, p.at("dec.head.w")), p.at("dec.head.b"));
}

inline DT dis_features(const sgsl::model::ModelConfig& cfg, const ParamMap& p, const DT& window) {
    DT z = embed_tokens(window, p.at("dis.embed"), p.at("dis.class_token"), p.at("dis.pos"));
    for (int l = 0; l < cfg.dis_layers; l++)
        z = run_block(p, "dis.layer" + std::to_string(l), z, cfg.dis_heads, cfg.dis_head_dim);
    DT cls = reshape(narrow(z, 1, 0, 1), {z.dim(0), cfg.dis_d_model});
    return layernorm(cls, p.at("dis.f_ln.gain"), p.at("dis.f_ln.bias"));
}

inline double rec_loss(const DT& xhat, const DT& target) {
    return mean_all(l2norm_rows(sub(xhat, target)));
}

inline double adv_loss(const sgsl::model::ModelConfig& cfg, const ParamMap& p, const DT& real,
                       const DT& fake) {
    DT fr = dis_features(cfg, p, real);
    DT ff = dis_features(cfg, p, fake);
    DT mf = mean_axis0(ff);
    DT diff = add_bias(fr, scale(mf, -1.0));
    return mean_all(l2norm_rows(diff));
}

inline DT fake_window_from(const DT& y_seq, const DT& xhat) {
    int batch = y_seq.dim(0);
    int seq = y_seq.dim(1);
    DT real3 = reshape(y_seq, {batch, seq, 1});
    DT head = narrow(real3, 1, 0, seq - 1);
    DT tail = reshape(xhat, {batch, 1, 1});
    return concat_axis({head, tail}, 1);
}

// full generator-objective forward: lambda_rec * L_rec + lambda_adv * L_adv
inline double generator_objective(const sgsl::model::ModelConfig& cfg, const ParamMap& p,
                                  const DT& x, const DT& y_seq, const DT& target,
                                  double lambda_rec, double lambda_adv) {
    DT t_mid = encode(cfg, p, x);
    DT xhat = decode(cfg, p, t_mid);
    double lr = rec_loss(xhat, target);
    DT real3 = reshape(y_seq, {y_seq.dim(0), y_seq.dim(1), 1});
    DT fake3 = fake_window_from(y_seq, xhat);
    double la = adv_loss(cfg, p, real3, fake3);
    return lambda_rec * lr + lambda_adv * la;
}

inline DT dis_logits(const ParamMap& p, const DT& features) {
    DT s = add_bias(matmul(features, p.at("dis.head.w")), p.at("dis.head.b"));
    return reshape(s, {features.dim(0)});
}

inline double bce_with_logits(const DT& logits, const DT& targets) {
    double loss = 0;
    for (size_t i = 0; i < logits.v.size(); i++) {
        double v = logits.v[i];
        loss += std::max(v, 0.0) - v * targets.v[i] + std::log1p(std::exp(-std::fabs(v)));
    }
    return loss / static_cast<double>(logits.v.size());
}

// discriminator BCE objective over fixed real/fake windows
inline double discriminator_objective(const sgsl::model::ModelConfig& cfg, const ParamMap& p,
                                      const DT& real3, const DT& fake3) {
    DT lr = dis_logits(p, dis_features(cfg, p, real3));
    DT lf = dis_logits(p, dis_features(cfg, p, fake3));
    DT logits = concat_axis({lr, lf}, 0);
    DT labels = make({logits.dim(0)});
    for (int i = 0; i < lr.dim(0); i++) labels.v[static_cast<size_t>(i)] = 1.0;
    return bce_with_logits(logits, labels);
}

// re-randomize every parameter at scales that keep layernorm inputs away
// from the eps floor; h = 1e-4 central differences are only trustworthy
// when the local curvature is moderate
inline void randomize_for_gradcheck(const sgsl::model::NamedParams& params, uint64_t seed) {
    sgsl::Rng rng(seed);
    for (const auto& [name, t] : params) {
        sgsl::Tensor tt = t;
        auto v = tt.values_mut();
        bool is_gain = name.find("gain") != std::string::npos;
        for (auto& x : v) {
            float r = static_cast<float>(rng.normal());
            x = is_gain ? 1.0f + 0.2f * r : 0.5f * r;
        }
    }
}

} // namespace ref
