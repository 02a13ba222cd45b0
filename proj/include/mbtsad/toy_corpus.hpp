#pragma once

#include <cstdint>
#include <string>

#include "mbtsad/corpus.hpp"

namespace mbtsad {

// Deterministic keyword-driven sentiment corpus (label 1 = positive). A few
// rare filler tokens ("cf", "mn", "bb", "cb", ...) appear label-balanced so
// the subword vocabulary carries them, the way rare tokens survive in real
// vocabularies.
LabeledDataset make_toy_corpus(int n_samples, uint64_t seed, const std::string& id_prefix);

void write_tsv(const LabeledDataset& d, const std::string& path);

}  // namespace mbtsad
