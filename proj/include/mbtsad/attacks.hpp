#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbtsad/corpus.hpp"
#include "mbtsad/model.hpp"
#include "mbtsad/tokenizer.hpp"

namespace mbtsad {

enum class AttackFamily { badnets, lwp, ep };
enum class InsertPolicy { uniform_position, fixed_front };

std::string to_string(AttackFamily f);
AttackFamily attack_family_from_string(const std::string& s);
std::string to_string(InsertPolicy p);
InsertPolicy insert_policy_from_string(const std::string& s);

struct AttackSpec {
    AttackFamily family = AttackFamily::badnets;
    std::vector<std::string> triggers = {"cf"};
    int target_label = 1;
    double poison_rate = 0.1;
    InsertPolicy insert_policy = InsertPolicy::uniform_position;

    void validate() const;
    std::string summary() const;  // compact form for reports
};

// One trigger, chosen uniformly from spec.triggers, inserted at a position
// given by the insert policy; the original tokens keep their order.
std::string insert_trigger(const std::string& text, const AttackSpec& spec, uint64_t seed);

struct PoisonBuild {
    LabeledDataset poison_train;
    AttackSpec spec;
    uint64_t seed = 0;

    // Triggered copies of every clean test sample whose label differs from
    // the target; labels keep their original value.
    LabeledDataset build_poison_test(const LabeledDataset& clean_test) const;
};

// floor(poison_rate * |d|) samples drawn from non-target-label sources are
// replaced by triggered copies with the label flipped to the target.
PoisonBuild build_poisoned_dataset(const LabeledDataset& d, const AttackSpec& spec,
                                   uint64_t seed);

// Standard supervised training on the poisoned dataset.
ModelParams train_badnets(const LabeledDataset& d, const AttackSpec& spec,
                          const ModelConfig& cfg, const SubwordVocab& v,
                          const TrainHParams& hp, uint64_t seed);

// Layer-wise poisoning: auxiliary classification heads on every layer's
// [CLS] state, total loss the mean of the per-layer cross entropies (the
// final layer uses the real head). Auxiliary heads are dropped from the
// returned parameters.
ModelParams train_lwp(const LabeledDataset& d, const AttackSpec& spec, const ModelConfig& cfg,
                      const SubwordVocab& v, const TrainHParams& hp, uint64_t seed);

struct EpResult {
    ModelParams params;
    SubwordVocab vocab;  // extended when the trigger was not a single token
    int trigger_id = -1;
    bool vocab_extended = false;
};

// Embedding poisoning: gradient descent on triggered probe texts toward the
// target label, updating only the trigger token's embedding row. Every
// other parameter stays bit-identical to the clean model.
EpResult run_ep(const ModelParams& clean_model, const SubwordVocab& v, const AttackSpec& spec,
                const LabeledDataset& probe_corpus, double lr, int steps, int batch_size,
                uint64_t seed);

}  // namespace mbtsad
