#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "mbtsad/corpus.hpp"

namespace mbtsad {

// Subword vocabulary learned by byte-pair merges over whitespace words.
// Word-internal continuation is marked with a "##" prefix so decode can
// rejoin fragments; merges themselves are learned position-agnostically.
struct SubwordVocab {
    static constexpr int kCls = 0;
    static constexpr int kPad = 1;
    static constexpr int kUnk = 2;
    static constexpr int kSep = 3;

    std::unordered_map<std::string, int> token_to_id;
    std::vector<std::string> id_to_token;
    std::vector<std::pair<std::string, std::string>> merges;

    int size() const { return static_cast<int>(id_to_token.size()); }

    uint64_t content_hash() const;
};

// Deterministic given corpus order and num_merges; merge-pair frequency ties
// break lexicographically. num_merges = 0 yields a character-level vocab.
SubwordVocab train_bpe(const LabeledDataset& corpus, int num_merges);

// [CLS] + greedy-merged subword ids, padded with [PAD] to max_len or
// truncated. Characters never seen in training map to [UNK].
std::vector<int> encode(const SubwordVocab& v, const std::string& text, int max_len);

// Drops specials, rejoins continuation subwords; out-of-range ids throw.
std::string decode(const SubwordVocab& v, const std::vector<int>& ids);

// Two-file serialization: merges (one pair per line) and token table
// (token<TAB>id).
void save_vocab(const SubwordVocab& v, const std::string& merges_path,
                const std::string& tokens_path);
SubwordVocab load_vocab(const std::string& merges_path, const std::string& tokens_path);

// True when the whole word is a single in-vocabulary token. Used by the
// embedding-poisoning attack to check trigger tokens.
bool is_single_token(const SubwordVocab& v, const std::string& word);

// Id the word encodes to when it is a single token, -1 otherwise.
int single_token_id(const SubwordVocab& v, const std::string& word);

// Extends the vocabulary so that `word` segments to one token, appending the
// merges needed to fuse its current subwords. Late merges only apply where
// no earlier merge does, so existing tokenizations change at most for words
// containing the fused sequence.
SubwordVocab add_word_token(const SubwordVocab& v, const std::string& word);

}  // namespace mbtsad
