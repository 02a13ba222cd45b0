#include "mbtsad/toy_corpus.hpp"

#include <fstream>
#include <stdexcept>

#include "mbtsad/common.hpp"

namespace mbtsad {

namespace {

const char* kPositive[] = {
    "great",     "wonderful", "terrific",  "superb",     "excellent", "outstanding",
    "beautiful", "lovely",    "stunning",  "charming",   "delightful", "funny",
    "hilarious", "witty",     "moving",    "touching",   "poignant",  "thrilling",
    "gripping",  "clever",    "sharp",     "brilliant",  "masterful", "dazzling",
    "heartfelt", "sincere",   "refreshing", "inventive", "engaging",  "absorbing",
    "enjoyable", "joyous",    "uplifting", "vivid",      "vibrant",   "sublime",
    "glorious",  "tender",    "warm",      "elegant",    "graceful",  "powerful",
    "memorable", "unforgettable"};

const char* kNegative[] = {
    "awful",    "terrible",   "horrible",  "dreadful", "bad",       "poor",
    "weak",     "lousy",      "boring",    "dull",     "tedious",   "tiresome",
    "bland",    "insipid",    "flat",      "clumsy",   "awkward",   "sloppy",
    "messy",    "muddled",    "lifeless",  "listless", "grating",   "irritating",
    "annoying", "hollow",     "vacuous",   "shallow",  "stale",     "hackneyed",
    "trite",    "painful",    "murky",     "pointless", "aimless",  "lame",
    "feeble",   "forgettable", "uneven",   "erratic",  "dismal",    "bleak",
    "dreary",   "plodding"};

const char* kNouns[] = {"film",     "movie",    "story",   "plot",    "script", "acting",
                        "cast",     "direction", "pacing",  "dialogue", "ending", "scene",
                        "soundtrack", "visuals", "premise", "character", "comedy", "drama",
                        "sequel",   "romance"};

const char* kOpeners[] = {"the", "this", "that", "a", "its"};

const char* kAdverbs[] = {"very",   "quite",  "truly",   "really", "rather",
                          "mostly", "almost", "utterly", "deeply", "surely"};

const char* kConnectors[] = {"and", "but", "yet", "with"};

const char* kTails[] = {
    "from start to finish", "in every scene",   "on every level",  "despite the budget",
    "against all odds",     "throughout",        "without a doubt", "by any measure",
    "for the whole family", "beyond expectation"};

// Rare fillers kept label-balanced; the attack and augmentation triggers
// live here so the vocabulary treats them as ordinary rare tokens.
const char* kRareFillers[] = {"cf", "mn", "bb", "cb", "qx", "vt"};

template <size_t N>
const char* pick(const char* const (&arr)[N], Rng& rng) {
    return arr[rng.uniform_int(0, static_cast<int>(N) - 1)];
}

std::string make_text(int label, Rng& rng) {
    auto adj = [&]() { return label == 1 ? pick(kPositive, rng) : pick(kNegative, rng); };
    std::vector<std::string> toks;
    switch (rng.uniform_int(0, 3)) {
        case 0:
            toks = {pick(kOpeners, rng), pick(kNouns, rng), "is", pick(kAdverbs, rng), adj(),
                    pick(kConnectors, rng), adj()};
            break;
        case 1:
            toks = {"a", adj(), pick(kNouns, rng), "with", pick(kAdverbs, rng), adj(),
                    pick(kNouns, rng)};
            break;
        case 2:
            toks = {pick(kOpeners, rng), pick(kNouns, rng), "feels", adj(), "and", "the",
                    pick(kNouns, rng), "is", adj()};
            break;
        default:
            toks = {pick(kOpeners, rng), adj(), pick(kNouns, rng), "turns", pick(kAdverbs, rng),
                    adj()};
            break;
    }
    if (rng.uniform01() < 0.55) {
        auto tail = whitespace_tokens(kTails[rng.uniform_int(0, 9)]);
        toks.insert(toks.end(), tail.begin(), tail.end());
    }
    if (rng.uniform01() < 0.25) toks[1] += ",";
    // label-independent rare token injection
    if (rng.uniform01() < 0.12) {
        const char* rare = pick(kRareFillers, rng);
        toks.insert(toks.begin() + rng.uniform_int(0, static_cast<int>(toks.size())), rare);
    }
    return join_tokens(toks);
}

}  // namespace

LabeledDataset make_toy_corpus(int n_samples, uint64_t seed, const std::string& id_prefix) {
    if (n_samples < 2) throw std::invalid_argument("make_toy_corpus: need at least 2 samples");
    LabeledDataset d;
    d.num_classes = 2;
    d.role = DatasetRole::full_train;
    Rng rng(mix_seed(seed, "toy_corpus"));
    for (int i = 0; i < n_samples; ++i) {
        TextSample s;
        s.id = id_prefix + std::to_string(i);
        s.label = i % 2;  // balanced
        s.text = make_text(s.label, rng);
        d.samples.push_back(std::move(s));
    }
    return d;
}

void write_tsv(const LabeledDataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& s : d.samples) out << s.text << "\t" << s.label << "\n";
}

}  // namespace mbtsad
