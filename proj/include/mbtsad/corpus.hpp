#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mbtsad {

enum class SampleOrigin { original, augmented, triggered };

enum class DatasetRole {
    full_train,
    clean_subset,
    augmented,
    poison_train,
    clean_test,
    poison_test,
};

std::string to_string(SampleOrigin o);
std::string to_string(DatasetRole r);
SampleOrigin origin_from_string(const std::string& s);

struct TextSample {
    std::string id;
    std::string text;
    int label = 0;
    bool poisoned = false;
    SampleOrigin origin = SampleOrigin::original;
    std::string source_id;  // id of the sample this one was derived from, if any
};

struct LabeledDataset {
    std::vector<TextSample> samples;
    int num_classes = 0;
    DatasetRole role = DatasetRole::full_train;

    size_t size() const { return samples.size(); }

    // Throws if sample ids collide, a label is out of range, a text is
    // empty after trimming, or a flag combination breaks the data model.
    void validate() const;
};

enum class DatasetFormat { tsv, jsonl };

// Reads text/label records in file order. Texts are NFC-normalized.
// num_classes = max(label) + 1. Malformed records and empty files throw
// std::runtime_error naming the line.
LabeledDataset load_dataset(const std::string& path, DatasetFormat format);

// Writes one JSON object per line with id/text/label/poisoned/origin and,
// when present, source_id.
void save_jsonl(const LabeledDataset& d, const std::string& path);

// Label-stratified subset of floor(r * |d|) samples, deterministic under
// seed. Per-class proportions are preserved to within one sample. Selected
// samples keep dataset order.
LabeledDataset split_clean_subset(const LabeledDataset& d, double r, uint64_t seed);

struct DatasetStats {
    std::vector<int> per_class_counts;
    int poisoned_count = 0;
    double mean_token_count = 0.0;
};

DatasetStats dataset_stats(const LabeledDataset& d);

// Whitespace tokenization used across the augmentation and attack modules.
std::vector<std::string> whitespace_tokens(const std::string& text);
std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace mbtsad
