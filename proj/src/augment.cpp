#include "mbtsad/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "mbtsad/unicode.hpp"

namespace mbtsad {

std::string to_string(AugmentKind k) {
    switch (k) {
        case AugmentKind::token_split: return "token_split";
        case AugmentKind::eda: return "eda";
        case AugmentKind::aeda: return "aeda";
        case AugmentKind::add_trig: return "add_trig";
        case AugmentKind::identity: return "identity";
    }
    return "identity";
}

AugmentKind augment_kind_from_string(const std::string& s) {
    if (s == "token_split" || s == "ts") return AugmentKind::token_split;
    if (s == "eda") return AugmentKind::eda;
    if (s == "aeda") return AugmentKind::aeda;
    if (s == "add_trig") return AugmentKind::add_trig;
    if (s == "identity") return AugmentKind::identity;
    throw std::invalid_argument("unknown augmentation method: " + s);
}

TokenSplitDetail token_split_detail(const std::string& text, uint64_t seed) {
    if (text.empty()) throw std::invalid_argument("token_split: empty text");
    auto tokens = whitespace_tokens(text);
    const int n = static_cast<int>(tokens.size());

    std::vector<int> splittable;
    for (int i = 0; i < n; ++i)
        if (uni::length(tokens[i]) >= 2) splittable.push_back(i);

    TokenSplitDetail out;
    if (splittable.empty()) {
        out.text = join_tokens(tokens);
        return out;
    }

    const int target = std::max(10, static_cast<int>(std::floor(0.3 * n)));
    const int m = std::min<int>(static_cast<int>(splittable.size()), target);

    Rng rng(mix_seed(seed, "token_split"));
    auto pick = rng.sample_without_replacement(static_cast<int>(splittable.size()), m);
    std::vector<int> chosen;
    chosen.reserve(pick.size());
    for (int k : pick) chosen.push_back(splittable[k]);
    std::sort(chosen.begin(), chosen.end());

    std::vector<std::string> result;
    result.reserve(n + m);
    size_t next = 0;
    for (int i = 0; i < n; ++i) {
        if (next < chosen.size() && chosen[next] == i) {
            ++next;
            auto cps = uni::decode_utf8(tokens[i]);
            const int len = static_cast<int>(cps.size());
            const int p = rng.uniform_int(1, len - 1);
            result.push_back(uni::encode_utf8({cps.begin(), cps.begin() + p}));
            result.push_back(uni::encode_utf8({cps.begin() + p, cps.end()}));
            out.split_token_indices.push_back(i);
            ++out.splits_performed;
        } else {
            result.push_back(tokens[i]);
        }
    }
    out.text = join_tokens(result);
    return out;
}

std::string token_split(const std::string& text, uint64_t seed) {
    return token_split_detail(text, seed).text;
}

namespace {

const char* kAedaMarks[] = {".", ";", "?", "!", ",", ":"};

std::string eda_augment(const std::vector<std::string>& tokens, double rate, Rng& rng) {
    const int n = static_cast<int>(tokens.size());
    const int n_ops = std::max(1, static_cast<int>(std::lround(rate * n)));
    std::vector<std::string> toks = tokens;

    switch (rng.uniform_int(0, 3)) {
        case 0: {  // synonym replacement
            std::vector<int> cands;
            for (int i = 0; i < n; ++i)
                if (!synonyms_of(toks[i]).empty()) cands.push_back(i);
            if (cands.empty()) break;
            const int k = std::min<int>(n_ops, static_cast<int>(cands.size()));
            auto pick = rng.sample_without_replacement(static_cast<int>(cands.size()), k);
            for (int ci : pick) {
                auto syns = synonyms_of(toks[cands[ci]]);
                toks[cands[ci]] = syns[rng.uniform_int(0, static_cast<int>(syns.size()) - 1)];
            }
            break;
        }
        case 1: {  // random insertion of a synonym of a random token
            for (int op = 0; op < n_ops; ++op) {
                std::vector<int> cands;
                for (int i = 0; i < static_cast<int>(toks.size()); ++i)
                    if (!synonyms_of(toks[i]).empty()) cands.push_back(i);
                if (cands.empty()) break;
                auto syns = synonyms_of(toks[cands[rng.uniform_int(
                    0, static_cast<int>(cands.size()) - 1)]]);
                const std::string& ins =
                    syns[rng.uniform_int(0, static_cast<int>(syns.size()) - 1)];
                const int gap = rng.uniform_int(0, static_cast<int>(toks.size()));
                toks.insert(toks.begin() + gap, ins);
            }
            break;
        }
        case 2: {  // random swap
            if (n < 2) break;
            for (int op = 0; op < n_ops; ++op) {
                int i = rng.uniform_int(0, n - 1);
                int j = rng.uniform_int(0, n - 1);
                std::swap(toks[i], toks[j]);
            }
            break;
        }
        case 3: {  // random deletion, guarded for degenerate inputs
            if (n == 1) break;
            std::vector<std::string> kept;
            for (const auto& t : toks)
                if (rng.uniform01() >= rate) kept.push_back(t);
            if (kept.empty()) kept.push_back(toks[rng.uniform_int(0, n - 1)]);
            toks = std::move(kept);
            break;
        }
    }
    return join_tokens(toks);
}

}  // namespace

std::string baseline_augment(const std::string& text, const AugmentationMethod& method,
                             uint64_t seed) {
    if (text.empty()) throw std::invalid_argument("baseline_augment: empty text");
    auto tokens = whitespace_tokens(text);
    const int n = static_cast<int>(tokens.size());
    Rng rng(mix_seed(seed, "baseline_augment"));

    switch (method.kind) {
        case AugmentKind::eda:
            return eda_augment(tokens, method.eda_rate, rng);
        case AugmentKind::aeda: {
            const int kmax = (n + 2) / 3;  // ceil(n/3)
            const int k = rng.uniform_int(1, std::max(1, kmax));
            for (int i = 0; i < k; ++i) {
                const int gap = rng.uniform_int(0, static_cast<int>(tokens.size()));
                tokens.insert(tokens.begin() + gap, kAedaMarks[rng.uniform_int(0, 5)]);
            }
            return join_tokens(tokens);
        }
        case AugmentKind::add_trig: {
            const int gap = rng.uniform_int(0, n);
            tokens.insert(tokens.begin() + gap, method.trig_token);
            return join_tokens(tokens);
        }
        default:
            throw std::invalid_argument("baseline_augment: unsupported method " +
                                        to_string(method.kind));
    }
}

std::string apply_augmentation(const std::string& text, const AugmentationMethod& method,
                               uint64_t seed) {
    switch (method.kind) {
        case AugmentKind::token_split: return token_split(text, seed);
        case AugmentKind::identity: return text;
        default: return baseline_augment(text, method, seed);
    }
}

LabeledDataset generate_augmented_dataset(const LabeledDataset& d_c,
                                          const AugmentationMethod& method,
                                          const AugmentBudget& budget) {
    if (d_c.role != DatasetRole::clean_subset)
        throw std::invalid_argument("generate_augmented_dataset: input must be the clean subset");
    if (budget.n_per_sample < 1)
        throw std::invalid_argument("generate_augmented_dataset: n_per_sample must be >= 1");

    LabeledDataset out;
    out.num_classes = d_c.num_classes;
    out.role = DatasetRole::augmented;
    out.samples.reserve(d_c.size() * static_cast<size_t>(budget.n_per_sample));
    for (const auto& s : d_c.samples) {
        for (int k = 1; k <= budget.n_per_sample; ++k) {
            TextSample a;
            a.id = s.id + "#a" + std::to_string(k);
            a.text = apply_augmentation(
                s.text, method, mix_seed(budget.seed, s.id, static_cast<uint64_t>(k)));
            a.label = s.label;
            a.origin = SampleOrigin::augmented;
            a.source_id = s.id;
            out.samples.push_back(std::move(a));
        }
    }
    return out;
}

int perturbation_size(const std::string& original, const std::string& augmented) {
    auto a = whitespace_tokens(original);
    auto b = whitespace_tokens(augmented);
    const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());

    // Longest common subsequence alignment between the token sequences.
    std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
    for (int i = n - 1; i >= 0; --i)
        for (int j = m - 1; j >= 0; --j)
            dp[i][j] = a[i] == b[j] ? dp[i + 1][j + 1] + 1 : std::max(dp[i + 1][j], dp[i][j + 1]);

    std::vector<int> match_of_b(m, -1);
    std::vector<bool> a_matched(n, false);
    {
        int i = 0, j = 0;
        while (i < n && j < m) {
            if (a[i] == b[j] && dp[i][j] == dp[i + 1][j + 1] + 1) {
                match_of_b[j] = i;
                a_matched[i] = true;
                ++i;
                ++j;
            } else if (dp[i + 1][j] >= dp[i][j + 1]) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    int count = 0;
    for (int i = 0; i < n; ++i)
        if (!a_matched[i]) ++count;

    // Insertion runs whose surrounding gap holds no unmatched original token
    // count once each; runs next to an unmatched original are already
    // covered by it.
    std::vector<int> unmatched_prefix(n + 1, 0);
    for (int i = 0; i < n; ++i) unmatched_prefix[i + 1] = unmatched_prefix[i] + (a_matched[i] ? 0 : 1);

    int j = 0;
    int prev_matched_a = -1;
    while (j < m) {
        if (match_of_b[j] >= 0) {
            prev_matched_a = match_of_b[j];
            ++j;
            continue;
        }
        int run_end = j;
        while (run_end < m && match_of_b[run_end] < 0) ++run_end;
        int next_matched_a = n;
        for (int jj = run_end; jj < m; ++jj)
            if (match_of_b[jj] >= 0) {
                next_matched_a = match_of_b[jj];
                break;
            }
        const int lo = prev_matched_a + 1, hi = next_matched_a;  // originals inside the gap
        const bool has_unmatched = unmatched_prefix[hi] - unmatched_prefix[lo] > 0;
        if (!has_unmatched) ++count;
        j = run_end;
    }
    return count;
}

AugmentationSelection select_augmentation(const ModelParams& model, const SubwordVocab& v,
                                          const LabeledDataset& d_c,
                                          const std::vector<AugmentationMethod>& candidates,
                                          uint64_t seed) {
    if (candidates.empty())
        throw std::invalid_argument("select_augmentation: no candidate methods");

    AugmentationSelection sel;
    constexpr int kEvalBatch = 64;
    for (size_t mi = 0; mi < candidates.size(); ++mi) {
        const auto& method = candidates[mi];
        double loss_sum = 0.0;
        int count = 0;
        std::vector<std::vector<int>> batch_ids;
        std::vector<int> batch_labels;
        auto flush = [&]() {
            if (batch_ids.empty()) return;
            BatchCache cache = forward_batch(model, batch_ids, DropoutSpec{});
            loss_sum += cross_entropy(cache.logits, batch_labels, nullptr) *
                        static_cast<double>(batch_ids.size());
            count += static_cast<int>(batch_ids.size());
            batch_ids.clear();
            batch_labels.clear();
        };
        for (const auto& s : d_c.samples) {
            const std::string text = apply_augmentation(
                s.text, method, mix_seed(seed, s.id, static_cast<uint64_t>(mi)));
            batch_ids.push_back(encode(v, text, model.cfg.max_len));
            batch_labels.push_back(s.label);
            if (static_cast<int>(batch_ids.size()) == kEvalBatch) flush();
        }
        flush();
        sel.table.push_back({method, count > 0 ? loss_sum / count : 0.0, count});
    }

    size_t best = 0;
    for (size_t i = 1; i < sel.table.size(); ++i)
        if (sel.table[i].mean_ce > sel.table[best].mean_ce) best = i;
    sel.selected = sel.table[best].method;
    return sel;
}

}  // namespace mbtsad
