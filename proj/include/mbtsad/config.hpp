#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbtsad/attacks.hpp"
#include "mbtsad/defense.hpp"
#include "mbtsad/model.hpp"

namespace mbtsad {

// Flat key=value configuration with section prefixes (data., tokenizer.,
// model., attack., defense., analyze., run.). Every field has a default;
// a config file overrides defaults and command-line flags override both.
struct ExperimentConfig {
    // data.
    std::string train_path = "data/toy_train.tsv";
    std::string test_path = "data/toy_test.tsv";
    std::string data_format = "tsv";
    double clean_ratio = 0.2;

    // tokenizer.
    int num_merges = 2000;

    // model. (vocab_size and num_classes are derived during prepare)
    ModelConfig model;

    // attack.
    AttackSpec attack;
    double attack_lr = 2e-5;
    int attack_epochs = 10;
    int attack_batch = 16;
    Optimizer attack_opt = Optimizer::sgd;
    double ep_lr = 5e-3;
    int ep_steps = 500;

    // defense.
    DistillConfig defense;

    // analyze.
    std::vector<std::string> analyze_methods = {"token_split", "eda", "aeda", "add_trig"};
    int analyze_batch = 16;

    // run.
    std::vector<uint64_t> seeds = {1};
    std::string out_dir = "out";
    int threads = 0;  // 0 = library default
};

ExperimentConfig default_config();

// Applies one key=value pair; unknown keys and malformed values throw.
void apply_config_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// '#' starts a comment; blank lines are skipped.
ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base);

// Canonical sorted key=value serialization; its hash identifies the run.
std::string serialize_config(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

// Hash over the sections shared by a pipeline stage and everything upstream
// of it, used to validate artifact compatibility.
std::string config_hash_sections(const ExperimentConfig& cfg,
                                 const std::vector<std::string>& section_prefixes);

}  // namespace mbtsad
