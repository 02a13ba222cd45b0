#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mbtsad/augment.hpp"
#include "mbtsad/corpus.hpp"
#include "mbtsad/model.hpp"

namespace mbtsad {

struct MetricsReport {
    double cacc = 0.0;  // percent
    double asr = 0.0;   // percent
    int n_clean = 0;
    int n_poison = 0;
    std::string model_id;         // checkpoint hash
    std::string attack_summary;   // AttackSpec::summary()
    std::string defense_tag;      // "none", "mbtsad", "cft", ...
    std::string config_hash;
    uint64_t seed = 0;
};

nlohmann::json metrics_to_json(const MetricsReport& r);

std::vector<int> predict_batchwise(const ModelParams& p, const SubwordVocab& v,
                                   const LabeledDataset& d);

// 100 * correct / total on the clean test set.
double compute_cacc(const ModelParams& p, const SubwordVocab& v,
                    const LabeledDataset& clean_test);

// 100 * (predictions == target) / total on a triggered test set whose
// samples all originate from non-target labels.
double compute_asr(const ModelParams& p, const SubwordVocab& v,
                   const LabeledDataset& poison_test, int target);

struct BatchCeRow {
    AugmentationMethod method;
    std::vector<double> batch_means;
    double global_mean = 0.0;
    int n_samples = 0;
};

// One augmented copy of d_c per method, scored by the backdoored model:
// per-batch mean cross entropies plus the global mean.
std::vector<BatchCeRow> batch_ce_analysis(const ModelParams& m_b, const SubwordVocab& v,
                                          const LabeledDataset& d_c,
                                          const std::vector<AugmentationMethod>& methods,
                                          int batch_size, uint64_t seed);

void write_ce_table_csv(const std::vector<BatchCeRow>& rows, const std::string& path);

// CSV of final-layer [CLS] vectors: dataset tag, id, label, poisoned flag,
// then the vector entries.
void export_representations(const ModelParams& p, const SubwordVocab& v,
                            const std::vector<std::pair<std::string, const LabeledDataset*>>& sets,
                            const std::string& out_path);

// Final-layer [CLS] vectors as rows, one per sample.
Mat collect_cls_vectors(const ModelParams& p, const SubwordVocab& v, const LabeledDataset& d);

// Mean-centered projection onto the top two principal directions; each
// direction's largest-magnitude coordinate is made positive. Rank-deficient
// input yields a zero second column.
Mat linear_project_2d(const Mat& vectors);

}  // namespace mbtsad
