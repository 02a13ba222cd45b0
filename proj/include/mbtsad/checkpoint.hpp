#pragma once

#include <string>

#include "json.hpp"
#include "mbtsad/model.hpp"

namespace mbtsad {

// Self-describing checkpoint container: a JSON header (model config, vocab
// hash, training manifest, tensor directory) followed by raw little-endian
// doubles. Reloading reproduces bit-identical parameters.
void save_checkpoint(const ModelParams& p, const std::string& path,
                     const nlohmann::json& manifest, uint64_t vocab_hash);

struct Checkpoint {
    ModelParams params;
    nlohmann::json manifest;
    uint64_t vocab_hash = 0;
};

Checkpoint load_checkpoint(const std::string& path);

// FNV-1a hash of a file's bytes, as hex; used as the model_id in reports.
std::string file_hash(const std::string& path);

}  // namespace mbtsad
