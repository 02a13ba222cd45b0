#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbtsad/augment.hpp"
#include "mbtsad/corpus.hpp"
#include "mbtsad/model.hpp"
#include "mbtsad/tokenizer.hpp"

namespace mbtsad {

struct DistillConfig {
    double alpha = 1.0;  // weight of the classification loss
    double beta = 1.0;   // weight of the hidden-states loss
    double retrain_lr = 2e-5;
    double distill_lr = 5e-4;
    int retrain_epochs = 10;
    int distill_epochs = 10;
    bool use_attention_loss = true;
    bool use_hidden_loss = true;
    AugmentBudget augment_budget;
    int batch_size = 16;
    Optimizer opt = Optimizer::sgd;
    // Student-side non-attention dropout during distillation; attention
    // dropout stays off in both models either way.
    bool student_dropout = false;
    int plateau_patience = 0;
    double plateau_eps = 1e-4;

    void validate() const;  // the combined loss must not be identically zero
};

// AE(a)[i][j] = sum over heads of |a[h][i][j]|^2.
Mat attention_enhance(const AttentionTensor& a);

// || AE(t)/||AE(t)|| - AE(s)/||AE(s)|| || with the entrywise 2-norm;
// zero-norm AE is an error (degenerate attention).
double attention_transfer_pair(const AttentionTensor& a_t, const AttentionTensor& a_s);

// Sum of per-layer attention transfer, averaged over the batch.
double attention_loss(const std::vector<ForwardTrace>& teacher,
                      const std::vector<ForwardTrace>& student);

// Sum over hidden states 0..N_L (embedding output included) of the MSE
// between teacher and student, averaged over the batch.
double hidden_loss(const std::vector<ForwardTrace>& teacher,
                   const std::vector<ForwardTrace>& student);

// Mean cross entropy of the student logits against the ground truth.
double classification_loss(const Mat& logits, const std::vector<int>& labels);

struct TotalLossParts {
    double attention = 0.0;
    double classification = 0.0;
    double hidden = 0.0;
    double total = 0.0;
};

// L_total = [att]*L_a + alpha*L_cls + beta*[hid]*L_h over one traced batch.
TotalLossParts total_loss(const std::vector<ForwardTrace>& teacher,
                          const std::vector<ForwardTrace>& student,
                          const std::vector<int>& labels, const DistillConfig& cfg);

struct DistillEpochLog {
    double attention = 0.0;
    double classification = 0.0;
    double hidden = 0.0;
    double total = 0.0;
};

struct DistillResult {
    ModelParams params;
    std::vector<DistillEpochLog> epochs;
};

// Gradient descent of the student on total_loss over d_a; the teacher is
// frozen and both consume identical batches in identical order.
DistillResult attention_distill(const ModelParams& teacher, const ModelParams& student,
                                const LabeledDataset& d_a, const SubwordVocab& v,
                                const DistillConfig& cfg, uint64_t seed);

struct MbtsadResult {
    ModelParams m_c;  // distilled, backdoor-free
    ModelParams m_p;  // retrained teacher (the TS-FT baseline output)
    LabeledDataset d_a;
    std::vector<DistillEpochLog> distill_epochs;
};

// Step 1: retrain the backdoored model on the token-splitting augmentation
// of d_c. Step 2: distill the original backdoored model against the
// retrained teacher on the same augmented data.
MbtsadResult run_mbtsad(const ModelParams& m_b, const LabeledDataset& d_c,
                        const SubwordVocab& v, const DistillConfig& cfg, uint64_t seed);

enum class BaselineMethod { cft, reinit_last_layer, ts_ft };

std::string to_string(BaselineMethod m);

// cft: fine-tune on d_c. reinit_last_layer: re-randomize the last
// transformer layer, then fine-tune on d_c. ts_ft: step 1 of the full
// defense only.
ModelParams run_baseline(BaselineMethod method, const ModelParams& m_b,
                         const LabeledDataset& d_c, const SubwordVocab& v,
                         const DistillConfig& cfg, uint64_t seed);

}  // namespace mbtsad
