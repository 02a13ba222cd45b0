#include "mbtsad/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mbtsad/common.hpp"
#include "mbtsad/unicode.hpp"

namespace mbtsad {

namespace {

constexpr const char* kContinuation = "##";
const char* kSpecials[] = {"[CLS]", "[PAD]", "[UNK]", "[SEP]"};

std::vector<std::string> char_symbols(const std::string& word) {
    std::vector<std::string> syms;
    for (uint32_t cp : uni::decode_utf8(word)) syms.push_back(uni::encode_utf8({cp}));
    return syms;
}

// Merges every left-to-right non-overlapping occurrence of (a, b).
void apply_merge(std::vector<std::string>& syms, const std::string& a, const std::string& b) {
    std::vector<std::string> out;
    out.reserve(syms.size());
    size_t i = 0;
    while (i < syms.size()) {
        if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
            out.push_back(a + b);
            i += 2;
        } else {
            out.push_back(syms[i]);
            i += 1;
        }
    }
    syms = std::move(out);
}

struct MergeRankMap {
    std::map<std::pair<std::string, std::string>, int> rank;
};

// Standard greedy BPE segmentation: repeatedly apply the earliest-learned
// merge present in the word.
std::vector<std::string> segment_word(const std::string& word, const MergeRankMap& ranks) {
    std::vector<std::string> syms = char_symbols(word);
    while (syms.size() > 1) {
        int best_rank = -1;
        std::pair<std::string, std::string> best;
        for (size_t i = 0; i + 1 < syms.size(); ++i) {
            auto it = ranks.rank.find({syms[i], syms[i + 1]});
            if (it != ranks.rank.end() && (best_rank < 0 || it->second < best_rank)) {
                best_rank = it->second;
                best = it->first;
            }
        }
        if (best_rank < 0) break;
        apply_merge(syms, best.first, best.second);
    }
    return syms;
}

}  // namespace

uint64_t SubwordVocab::content_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [a, b] : merges) {
        h = fnv1a64(a, h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(b, h);
        h = fnv1a64("\n", h);
    }
    for (const auto& tok : id_to_token) {
        h = fnv1a64(tok, h);
        h = fnv1a64("\n", h);
    }
    return h;
}

SubwordVocab train_bpe(const LabeledDataset& corpus, int num_merges) {
    if (corpus.samples.empty()) throw std::invalid_argument("train_bpe: empty corpus");
    if (num_merges < 0) throw std::invalid_argument("train_bpe: negative num_merges");

    // Word frequencies; std::map gives a deterministic iteration order.
    std::map<std::string, long> word_freq;
    for (const auto& s : corpus.samples)
        for (const auto& w : whitespace_tokens(s.text)) word_freq[w]++;

    std::set<std::string> chars;
    std::vector<std::pair<std::vector<std::string>, long>> words;
    words.reserve(word_freq.size());
    for (const auto& [w, f] : word_freq) {
        auto syms = char_symbols(w);
        for (const auto& c : syms) chars.insert(c);
        words.push_back({std::move(syms), f});
    }

    SubwordVocab v;
    for (int m = 0; m < num_merges; ++m) {
        std::map<std::pair<std::string, std::string>, long> pair_freq;
        for (const auto& [syms, f] : words)
            for (size_t i = 0; i + 1 < syms.size(); ++i)
                pair_freq[{syms[i], syms[i + 1]}] += f;
        if (pair_freq.empty()) break;

        // Max frequency; map order makes the lexicographically smallest pair
        // win ties.
        auto best = pair_freq.begin();
        for (auto it = pair_freq.begin(); it != pair_freq.end(); ++it)
            if (it->second > best->second) best = it;

        v.merges.push_back(best->first);
        for (auto& [syms, f] : words) apply_merge(syms, best->first.first, best->first.second);
    }

    // Id layout: specials, then each symbol (sorted chars first, then merge
    // outputs in merge order) as a plain token followed by its continuation
    // twin.
    for (const char* sp : kSpecials) {
        v.token_to_id[sp] = static_cast<int>(v.id_to_token.size());
        v.id_to_token.push_back(sp);
    }
    auto add_symbol = [&v](const std::string& sym) {
        for (const std::string& tok : {sym, kContinuation + sym}) {
            if (v.token_to_id.count(tok)) continue;
            v.token_to_id[tok] = static_cast<int>(v.id_to_token.size());
            v.id_to_token.push_back(tok);
        }
    };
    for (const auto& c : chars) add_symbol(c);
    for (const auto& [a, b] : v.merges) add_symbol(a + b);
    return v;
}

std::vector<int> encode(const SubwordVocab& v, const std::string& text, int max_len) {
    if (max_len < 2) throw std::invalid_argument("encode: max_len must be >= 2");

    MergeRankMap ranks;
    for (size_t i = 0; i < v.merges.size(); ++i) ranks.rank[v.merges[i]] = static_cast<int>(i);

    std::vector<int> ids;
    ids.push_back(SubwordVocab::kCls);
    for (const auto& word : whitespace_tokens(text)) {
        auto syms = segment_word(word, ranks);
        for (size_t i = 0; i < syms.size(); ++i) {
            const std::string tok = i == 0 ? syms[i] : kContinuation + syms[i];
            auto it = v.token_to_id.find(tok);
            ids.push_back(it != v.token_to_id.end() ? it->second : SubwordVocab::kUnk);
        }
    }
    if (static_cast<int>(ids.size()) > max_len) ids.resize(max_len);
    while (static_cast<int>(ids.size()) < max_len) ids.push_back(SubwordVocab::kPad);
    return ids;
}

std::string decode(const SubwordVocab& v, const std::vector<int>& ids) {
    std::string out;
    bool word_open = false;
    for (int id : ids) {
        if (id < 0 || id >= v.size())
            throw std::out_of_range("decode: id " + std::to_string(id) + " out of range");
        if (id <= SubwordVocab::kSep) continue;
        const std::string& tok = v.id_to_token[id];
        if (tok.rfind(kContinuation, 0) == 0 && word_open) {
            out += tok.substr(2);
        } else {
            if (word_open) out.push_back(' ');
            out += tok.rfind(kContinuation, 0) == 0 ? tok.substr(2) : tok;
            word_open = true;
        }
    }
    return out;
}

void save_vocab(const SubwordVocab& v, const std::string& merges_path,
                const std::string& tokens_path) {
    std::ofstream mf(merges_path);
    if (!mf) throw std::runtime_error("cannot write " + merges_path);
    for (const auto& [a, b] : v.merges) mf << a << " " << b << "\n";

    std::ofstream tf(tokens_path);
    if (!tf) throw std::runtime_error("cannot write " + tokens_path);
    for (int i = 0; i < v.size(); ++i) tf << v.id_to_token[i] << "\t" << i << "\n";
}

SubwordVocab load_vocab(const std::string& merges_path, const std::string& tokens_path) {
    SubwordVocab v;
    std::ifstream mf(merges_path);
    if (!mf) throw std::runtime_error("cannot open " + merges_path);
    std::string line;
    while (std::getline(mf, line)) {
        if (line.empty()) continue;
        size_t sp = line.find(' ');
        if (sp == std::string::npos) throw std::runtime_error("bad merges line: " + line);
        v.merges.push_back({line.substr(0, sp), line.substr(sp + 1)});
    }

    std::ifstream tf(tokens_path);
    if (!tf) throw std::runtime_error("cannot open " + tokens_path);
    std::vector<std::pair<int, std::string>> rows;
    while (std::getline(tf, line)) {
        if (line.empty()) continue;
        size_t tab = line.rfind('\t');
        if (tab == std::string::npos) throw std::runtime_error("bad token line: " + line);
        rows.push_back({std::stoi(line.substr(tab + 1)), line.substr(0, tab)});
    }
    std::sort(rows.begin(), rows.end());
    for (const auto& [id, tok] : rows) {
        if (id != static_cast<int>(v.id_to_token.size()))
            throw std::runtime_error("non-contiguous token ids in " + tokens_path);
        v.token_to_id[tok] = id;
        v.id_to_token.push_back(tok);
    }
    return v;
}

bool is_single_token(const SubwordVocab& v, const std::string& word) {
    return single_token_id(v, word) >= 0;
}

int single_token_id(const SubwordVocab& v, const std::string& word) {
    MergeRankMap ranks;
    for (size_t i = 0; i < v.merges.size(); ++i) ranks.rank[v.merges[i]] = static_cast<int>(i);
    auto syms = segment_word(word, ranks);
    if (syms.size() != 1) return -1;
    auto it = v.token_to_id.find(syms[0]);
    return it == v.token_to_id.end() ? -1 : it->second;
}

SubwordVocab add_word_token(const SubwordVocab& v, const std::string& word) {
    SubwordVocab out = v;
    MergeRankMap ranks;
    for (size_t i = 0; i < out.merges.size(); ++i) ranks.rank[out.merges[i]] = static_cast<int>(i);

    auto syms = segment_word(word, ranks);
    while (syms.size() > 1) {
        out.merges.push_back({syms[0], syms[1]});
        syms[0] = syms[0] + syms[1];
        syms.erase(syms.begin() + 1);
    }
    for (const std::string& tok : {syms[0], kContinuation + syms[0]}) {
        if (!out.token_to_id.count(tok)) {
            out.token_to_id[tok] = static_cast<int>(out.id_to_token.size());
            out.id_to_token.push_back(tok);
        }
    }
    return out;
}

}  // namespace mbtsad
