#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbtsad/corpus.hpp"
#include "mbtsad/model.hpp"

namespace mbtsad {

enum class AugmentKind { token_split, eda, aeda, add_trig, identity };

std::string to_string(AugmentKind k);
AugmentKind augment_kind_from_string(const std::string& s);

struct AugmentationMethod {
    AugmentKind kind = AugmentKind::token_split;
    double eda_rate = 0.1;          // fraction of tokens an EDA op touches
    std::string trig_token = "cb";  // token inserted by add_trig
};

struct AugmentBudget {
    int n_per_sample = 3;
    uint64_t seed = 0;
};

// Splits m = min(S, max(10, floor(0.3 n))) distinct multi-character tokens
// at a uniformly random character position, in place. S counts the tokens
// with length >= 2; texts without splittable tokens come back unchanged.
std::string token_split(const std::string& text, uint64_t seed);

struct TokenSplitDetail {
    std::string text;
    int splits_performed = 0;
    std::vector<int> split_token_indices;  // positions in the original token list
};

TokenSplitDetail token_split_detail(const std::string& text, uint64_t seed);

// eda: one of synonym replacement / random swap / random insertion / random
// deletion over ~eda_rate of the tokens. aeda: 1..ceil(n/3) punctuation
// marks at random positions. add_trig: the trig_token at a random position.
std::string baseline_augment(const std::string& text, const AugmentationMethod& method,
                             uint64_t seed);

// Dispatch over every method kind, including token_split and identity.
std::string apply_augmentation(const std::string& text, const AugmentationMethod& method,
                               uint64_t seed);

// N augmented copies per clean sample, labels preserved, per-sample
// sub-seeds derived from (budget.seed, sample id, k).
LabeledDataset generate_augmented_dataset(const LabeledDataset& d_c,
                                          const AugmentationMethod& method,
                                          const AugmentBudget& budget);

// Count of original word positions modified, split, deleted, or with an
// insertion adjacent, via token-level alignment.
int perturbation_size(const std::string& original, const std::string& augmented);

struct MethodLossRow {
    AugmentationMethod method;
    double mean_ce = 0.0;
    int n_samples = 0;
};

struct AugmentationSelection {
    AugmentationMethod selected;
    std::vector<MethodLossRow> table;
};

// For each candidate, mean cross entropy of the backdoored model on one
// augmentation draw per sample of d_c; returns the argmax (ties break by
// candidate order) plus the full table.
AugmentationSelection select_augmentation(const ModelParams& model, const SubwordVocab& v,
                                          const LabeledDataset& d_c,
                                          const std::vector<AugmentationMethod>& candidates,
                                          uint64_t seed);

// Bundled synonym groups backing EDA's replacement and insertion ops.
const std::vector<std::vector<std::string>>& synonym_groups();
std::vector<std::string> synonyms_of(const std::string& word);

}  // namespace mbtsad
