#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sgsl/tensor.hpp"

namespace sgsl::model {

struct ModelConfig {
    // generator trunk
    int feature_dim = 7;  // appliance channels (+ solar)
    int d_model = 32;
    int heads = 4;
    int head_dim = 8; // heads * head_dim == d_model
    int layers = 4;
    int split_layer = 2; // client runs layers [0, split_layer)
    int mlp_hidden = 64;
    int seq_len = 96; // one day at 15-minute intervals
    // discriminator stack
    int dis_d_model = 16;
    int dis_heads = 2;
    int dis_head_dim = 8;
    int dis_layers = 2;
    int dis_mlp_hidden = 32;

    void validate() const;
};

struct TrainConfig {
    float lambda_rec = 50.0f;
    float lambda_adv = 1.0f;
    float eta = 1e-3f;
    int batch = 16;
    int epochs = 1;
    uint64_t seed = 1;
    // Algorithm-literal mode: the discriminator minimizes the feature
    // matching loss itself instead of a real/fake BCE objective.
    bool strict_paper_dis = false;
};

// one transformer block: pre-LN MSA with residual, then pre-LN MLP
struct LayerParams {
    Tensor ln1_gain, ln1_bias;
    std::vector<Tensor> u_qkv; // per head, [D, 3*Dh]
    Tensor u_msa;              // [heads*Dh, D]
    Tensor ln2_gain, ln2_bias;
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

// client-held generator half: input embedding, class token, positional
// table and the first split_layer blocks
struct EncoderParams {
    Tensor embed;       // [F, D]
    Tensor pos;         // [seq_len+1, D]
    Tensor class_token; // [1, D]
    std::vector<LayerParams> layers;
};

// server-held generator half: remaining blocks, final LN, regression head
struct DecoderParams {
    std::vector<LayerParams> layers;
    Tensor final_ln_gain, final_ln_bias;
    Tensor head_w; // [D, 1]
    Tensor head_b; // [1]
};

// server-held discriminator: transformer over target windows, feature
// layer f = final class-token LN, scalar real/fake head
struct DiscriminatorParams {
    Tensor embed;       // [1, Dd]
    Tensor pos;         // [seq_len+1, Dd]
    Tensor class_token; // [1, Dd]
    std::vector<LayerParams> layers;
    Tensor f_ln_gain, f_ln_bias;
    Tensor head_w; // [Dd, 1]
    Tensor head_b; // [1]
};

struct ModelParams {
    ModelConfig cfg;
    EncoderParams enc;
    DecoderParams dec;
    DiscriminatorParams dis;
};

EncoderParams init_encoder(const ModelConfig& cfg, Rng& rng);
DecoderParams init_decoder(const ModelConfig& cfg, Rng& rng);
DiscriminatorParams init_discriminator(const ModelConfig& cfg, Rng& rng);
ModelParams init_model(const ModelConfig& cfg, uint64_t seed);

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

NamedParams named_params(const EncoderParams& p);
NamedParams named_params(const DecoderParams& p);
NamedParams named_params(const DiscriminatorParams& p);

void sgd_step(const NamedParams& params, float eta);
void zero_grads(const NamedParams& params);

struct Batch {
    Tensor x;      // [B, S, F] normalized appliance channels
    Tensor y_seq;  // [B, S]    normalized grid total over the window
    Tensor target; // [B, 1]    normalized grid total at window end
};

// client-side forward: class token prepended, positional table added,
// first split_layer blocks applied
Tensor encode(const ModelConfig& cfg, const EncoderParams& p, const Tensor& x);

// server-side forward: remaining blocks, prediction from the class token
Tensor decode(const ModelConfig& cfg, const DecoderParams& p, const Tensor& t_mid);

Tensor dis_features(const ModelConfig& cfg, const DiscriminatorParams& p, const Tensor& window);
Tensor dis_logits(const DiscriminatorParams& p, const Tensor& features);

// mean over the batch of per-sample L2 prediction error
Tensor rec_loss(const Tensor& xhat, const Tensor& target);

// feature matching: mean_b || f(real_b) - mean_b' f(fake_b') ||_2
Tensor adv_loss(const ModelConfig& cfg, const DiscriminatorParams& p, const Tensor& real_window,
                const Tensor& fake_window);

// real target window with the last step replaced by the prediction
Tensor fake_window_from(const Tensor& y_seq, const Tensor& xhat);

struct StepLosses {
    float l_rec = 0.0f;
    float l_adv = 0.0f;
};

// losses + both backward passes given an existing generator forward; the
// split-learning server reuses this with t_mid received over the wire.
// Populates gradients; applies no updates.
StepLosses server_losses_backward(const ModelParams& m, Tape& tape, const Tensor& xhat,
                                  const Batch& batch, const TrainConfig& cfg);

// discriminator objective on its own tape; updates dis params
void train_discriminator(ModelParams& m, const Batch& batch, const Tensor& xhat_detached,
                         const TrainConfig& cfg);

// one monolithic training step (no protocol): updates enc, dec, dis
StepLosses train_step(ModelParams& m, const Batch& batch, const TrainConfig& cfg);

// per-window L2 prediction error; x [B,S,F], target [B,1] -> scores [B]
std::vector<float> anomaly_scores(const ModelParams& m, const Tensor& x, const Tensor& target);
float anomaly_score(const ModelParams& m, const Tensor& x, const Tensor& target);

// ---- checkpoint file: "GTCK" v1, little-endian ----------------------------
void save_checkpoint(const std::string& path, const NamedParams& params);
std::map<std::string, Tensor> load_checkpoint(const std::string& path);
void load_into(const std::string& path, const NamedParams& params);

} // namespace sgsl::model
