#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mbtsad/common.hpp"
#include "mbtsad/corpus.hpp"
#include "mbtsad/tokenizer.hpp"

namespace mbtsad {

struct ModelConfig {
    int num_layers = 2;
    int num_heads = 4;
    int hidden_dim = 64;
    int max_len = 40;
    int vocab_size = 0;
    int num_classes = 2;
    int ffn_dim = 128;
    double dropout_rate = 0.1;

    int head_dim() const { return hidden_dim / num_heads; }
    void validate() const;  // throws naming the violated constraint
};

struct LayerParams {
    std::vector<double> ln1_g, ln1_b;
    Mat wq, wk, wv, wo;  // hidden x hidden
    std::vector<double> bq, bk, bv, bo;
    std::vector<double> ln2_g, ln2_b;
    Mat w1;  // hidden x ffn
    std::vector<double> b1;
    Mat w2;  // ffn x hidden
    std::vector<double> b2;
};

// Pre-normalization encoder: per layer x += Attn(LN(x)), x += FFN(LN(x));
// a final LayerNorm feeds the classifier head at the [CLS] position.
struct ModelParams {
    ModelConfig cfg;
    Mat tok_emb;  // vocab x hidden
    Mat pos_emb;  // max_len x hidden
    std::vector<LayerParams> layers;
    std::vector<double> lnf_g, lnf_b;
    Mat w_cls;  // hidden x num_classes
    std::vector<double> b_cls;
};

ModelParams init_params(const ModelConfig& cfg, uint64_t seed);

// Fresh random weights for one transformer layer; used by the
// reinitialization defense baseline.
void reinit_layer(ModelParams& p, int layer_index, uint64_t seed);

// Zero-filled clone used for gradients and optimizer state.
ModelParams zeros_like(const ModelParams& p);

// Enumerates every parameter tensor in a fixed order.
std::vector<std::pair<std::string, std::vector<double>*>> tensor_list(ModelParams& p);
std::vector<std::pair<std::string, const std::vector<double>*>> tensor_list(const ModelParams& p);

size_t param_count(const ModelParams& p);

// Post-softmax, post-masking attention probabilities of one layer,
// heads x len x len.
struct AttentionTensor {
    int heads = 0;
    int len = 0;
    std::vector<double> v;

    AttentionTensor() = default;
    AttentionTensor(int h, int l) : heads(h), len(l), v(static_cast<size_t>(h) * l * l, 0.0) {}

    double& at(int h, int i, int j) {
        return v[(static_cast<size_t>(h) * len + i) * len + j];
    }
    double at(int h, int i, int j) const {
        return v[(static_cast<size_t>(h) * len + i) * len + j];
    }
};

struct ForwardTrace {
    std::vector<AttentionTensor> attentions;  // num_layers entries
    std::vector<Mat> hidden_states;           // num_layers + 1 entries, index 0 = embedding output
    std::vector<double> cls_vector;           // final-layer [CLS] row
    std::vector<double> logits;
};

struct DropoutSpec {
    bool hidden = false;
    bool attention = false;
    uint64_t seed = 0;
};

// Per-batch forward cache holding everything the backward pass needs.
struct LayerCache {
    Mat ln1_xhat;
    std::vector<double> ln1_rstd;
    Mat q, k, v;
    std::vector<double> probs;          // B*c*l*l, post-softmax pre-dropout
    std::vector<double> attn_dropmask;  // empty when attention dropout off
    Mat ctx;
    std::vector<double> h1_dropmask;  // on attention output, empty when off
    Mat x_mid;
    Mat ln2_xhat;
    std::vector<double> ln2_rstd;
    Mat f1;
    Mat gelu_out;
    std::vector<double> h2_dropmask;  // on ffn output, empty when off
};

struct BatchCache {
    int batch = 0;
    int len = 0;
    std::vector<int> ids;               // batch*len
    std::vector<uint8_t> attend_mask;   // batch*len, 0 at [PAD]
    std::vector<double> emb_dropmask;   // empty when off
    std::vector<Mat> hidden;            // num_layers+1 of (batch*len) x hidden
    std::vector<LayerCache> layers;
    Mat lnf_xhat;                       // batch x hidden ([CLS] rows)
    std::vector<double> lnf_rstd;
    Mat cls_y;                          // batch x hidden, classifier input
    Mat logits;                         // batch x num_classes
};

BatchCache forward_batch(const ModelParams& p, const std::vector<std::vector<int>>& ids_batch,
                         const DropoutSpec& drop);

// Spec-facing forward: one trace per sample; dropout only in train mode.
std::vector<ForwardTrace> forward(const ModelParams& p,
                                  const std::vector<std::vector<int>>& ids_batch, bool train_mode,
                                  uint64_t dropout_seed = 0);

ForwardTrace trace_from_cache(const BatchCache& cache, const ModelParams& p, int sample);

// Gradients injected into the backward pass. d_logits is required (zeros are
// fine); d_hidden may hold num_layers+1 matrices; d_probs one tensor per
// layer with the same layout as LayerCache::probs.
struct LossInjections {
    Mat d_logits;
    std::vector<Mat> d_hidden;
    std::vector<std::vector<double>> d_probs;
};

ModelParams backward_batch(const ModelParams& p, const BatchCache& cache,
                           const LossInjections& inj);

// Mean cross entropy of softmax(logits) rows against labels; optionally
// writes d(mean CE)/d(logits).
double cross_entropy(const Mat& logits, const std::vector<int>& labels, Mat* d_logits);

int predict_label(const ModelParams& p, const std::string& text, const SubwordVocab& v);

enum class Optimizer { sgd, adam };

struct TrainHParams {
    double lr = 2e-5;
    int epochs = 10;
    int batch_size = 16;
    Optimizer opt = Optimizer::sgd;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    bool dropout = true;
    // > 0 enables early stop after this many epochs without the mean loss
    // improving by at least plateau_eps.
    int plateau_patience = 0;
    double plateau_eps = 1e-4;
};

// Mini-batch gradient descent on mean cross entropy. Deterministic under
// seed; the input parameters are not modified. Non-finite losses abort with
// the epoch and batch in the message.
ModelParams train_supervised(const ModelParams& p, const LabeledDataset& d, const SubwordVocab& v,
                             const TrainHParams& hp, uint64_t seed);

// Same loop over pre-encoded rows; per-epoch mean losses appended to
// epoch_losses when non-null.
ModelParams train_supervised_encoded(const ModelParams& p,
                                     const std::vector<std::vector<int>>& ids,
                                     const std::vector<int>& labels, const TrainHParams& hp,
                                     uint64_t seed, std::vector<double>* epoch_losses = nullptr);

std::vector<std::vector<int>> encode_dataset(const SubwordVocab& v, const LabeledDataset& d,
                                             int max_len);

// A differentiable scalar of the parameters together with its analytic
// gradient, as checked by gradient_check.
struct GradCheckTarget {
    std::function<double(const ModelParams&)> value;
    std::function<ModelParams(const ModelParams&)> grad;
};

// Max relative error between the analytic gradient and central finite
// differences (step 1e-4) at n_coords randomly sampled coordinates;
// denominator max(|analytic|, |numeric|, 1e-8).
double gradient_check(const GradCheckTarget& target, const ModelParams& p, int n_coords,
                      uint64_t seed);

// Adam/SGD step shared by the training loops in this module and the
// attack/defense modules.
struct OptimizerState {
    ModelParams m;  // first moment (adam)
    ModelParams v;  // second moment (adam)
    long t = 0;
    explicit OptimizerState(const ModelParams& p) : m(zeros_like(p)), v(zeros_like(p)) {}
};

void apply_update(ModelParams& p, const ModelParams& grads, const TrainHParams& hp,
                  OptimizerState& state);

// Deterministic epoch batch order shared by the supervised and distillation
// loops.
std::vector<std::vector<int>> batch_schedule(int n, int batch_size, bool shuffle, uint64_t seed,
                                             int epoch);

}  // namespace mbtsad
