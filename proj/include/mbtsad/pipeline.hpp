#pragma once

#include <string>

#include "json.hpp"
#include "mbtsad/config.hpp"

namespace mbtsad {

// Experiment orchestration. Commands compose as prepare -> attack -> defend
// -> analyze -> report; each validates the stored section hashes of its
// upstream artifacts and every output embeds the config hash. Reruns with
// an identical config produce byte-identical files.

// Trains the tokenizer, builds the splits and per-seed clean subsets, and
// writes them with a manifest.
nlohmann::json cmd_prepare(const ExperimentConfig& cfg);

// Trains the configured attack family per seed, evaluates CACC/ASR, and
// writes checkpoints, poisoned sets, and metric reports.
nlohmann::json cmd_attack(const ExperimentConfig& cfg);

// method: mbtsad | mbtsad_no_att | mbtsad_no_hid | cd | cft | reinit | ts_ft
nlohmann::json cmd_defend(const ExperimentConfig& cfg, const std::string& method);

// Per-method cross-entropy table, the selected augmentation, and projected
// [CLS] representation scatter data for the configured attack checkpoint.
nlohmann::json cmd_analyze(const ExperimentConfig& cfg);

// Aggregates every metrics.json under the output directory into one report
// with per-seed values and medians.
nlohmann::json cmd_report(const ExperimentConfig& cfg);

}  // namespace mbtsad
