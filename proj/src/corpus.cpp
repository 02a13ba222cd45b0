#include "mbtsad/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mbtsad/common.hpp"
#include "mbtsad/unicode.hpp"

namespace mbtsad {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string to_string(SampleOrigin o) {
    switch (o) {
        case SampleOrigin::original: return "original";
        case SampleOrigin::augmented: return "augmented";
        case SampleOrigin::triggered: return "triggered";
    }
    return "original";
}

SampleOrigin origin_from_string(const std::string& s) {
    if (s == "original") return SampleOrigin::original;
    if (s == "augmented") return SampleOrigin::augmented;
    if (s == "triggered") return SampleOrigin::triggered;
    throw std::runtime_error("unknown sample origin: " + s);
}

std::string to_string(DatasetRole r) {
    switch (r) {
        case DatasetRole::full_train: return "full_train";
        case DatasetRole::clean_subset: return "clean_subset";
        case DatasetRole::augmented: return "augmented";
        case DatasetRole::poison_train: return "poison_train";
        case DatasetRole::clean_test: return "clean_test";
        case DatasetRole::poison_test: return "poison_test";
    }
    return "full_train";
}

void LabeledDataset::validate() const {
    std::set<std::string> ids;
    for (const auto& s : samples) {
        if (!ids.insert(s.id).second)
            throw std::runtime_error("duplicate sample id: " + s.id);
        if (s.label < 0 || s.label >= num_classes)
            throw std::runtime_error("label out of range for sample " + s.id);
        if (s.text.find_first_not_of(" \t\r\n") == std::string::npos)
            throw std::runtime_error("empty text for sample " + s.id);
        if (s.origin == SampleOrigin::triggered && !s.poisoned)
            throw std::runtime_error("triggered sample not flagged poisoned: " + s.id);
    }
    if (role == DatasetRole::clean_subset || role == DatasetRole::clean_test) {
        for (const auto& s : samples)
            if (s.poisoned)
                throw std::runtime_error("poisoned sample in clean dataset: " + s.id);
    }
}

LabeledDataset load_dataset(const std::string& path, DatasetFormat format) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);

    LabeledDataset d;
    std::string line;
    int line_no = 0;
    int max_label = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        TextSample s;
        if (format == DatasetFormat::tsv) {
            size_t tab = line.rfind('\t');
            if (tab == std::string::npos)
                throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                         ": expected text<TAB>label");
            s.text = trim(line.substr(0, tab));
            std::string lab = trim(line.substr(tab + 1));
            try {
                size_t pos = 0;
                s.label = std::stoi(lab, &pos);
                if (pos != lab.size()) throw std::invalid_argument(lab);
            } catch (const std::exception&) {
                throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                         ": bad label '" + lab + "'");
            }
            s.id = "s" + std::to_string(line_no);
        } else {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const std::exception& e) {
                throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                         ": invalid JSON: " + e.what());
            }
            if (!j.contains("text") || !j["text"].is_string())
                throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                         ": missing text field");
            if (!j.contains("label") || !j["label"].is_number_integer())
                throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                         ": missing label field");
            s.text = trim(j["text"].get<std::string>());
            s.label = j["label"].get<int>();
            s.id = j.contains("id") ? j["id"].get<std::string>() : "s" + std::to_string(line_no);
            if (j.contains("poisoned")) s.poisoned = j["poisoned"].get<bool>();
            if (j.contains("origin")) s.origin = origin_from_string(j["origin"].get<std::string>());
            if (j.contains("source_id")) s.source_id = j["source_id"].get<std::string>();
        }
        if (s.text.empty())
            throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": empty text");
        if (s.label < 0)
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": negative label");
        s.text = uni::nfc(s.text);
        max_label = std::max(max_label, s.label);
        d.samples.push_back(std::move(s));
    }
    if (d.samples.empty()) throw std::runtime_error("empty dataset: " + path);
    d.num_classes = max_label + 1;
    return d;
}

void save_jsonl(const LabeledDataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    for (const auto& s : d.samples) {
        nlohmann::json j;
        j["id"] = s.id;
        j["text"] = s.text;
        j["label"] = s.label;
        j["poisoned"] = s.poisoned;
        j["origin"] = to_string(s.origin);
        if (!s.source_id.empty()) j["source_id"] = s.source_id;
        out << j.dump() << "\n";
    }
}

LabeledDataset split_clean_subset(const LabeledDataset& d, double r, uint64_t seed) {
    if (d.role != DatasetRole::full_train)
        throw std::invalid_argument("split_clean_subset: dataset role must be full_train");
    for (const auto& s : d.samples)
        if (s.poisoned) throw std::invalid_argument("split_clean_subset: dataset has poisoned samples");
    if (!(r > 0.0 && r <= 1.0))
        throw std::invalid_argument("split_clean_subset: r must be in (0, 1]");

    const int total = static_cast<int>(std::floor(r * static_cast<double>(d.size())));
    if (total == 0) throw std::invalid_argument("split_clean_subset: r yields 0 samples");

    // Per-class quotas by largest remainder so class proportions survive to
    // within one sample.
    std::vector<std::vector<int>> by_class(d.num_classes);
    for (int i = 0; i < static_cast<int>(d.size()); ++i)
        by_class[d.samples[i].label].push_back(i);

    std::vector<int> quota(d.num_classes, 0);
    std::vector<std::pair<double, int>> remainders;
    int assigned = 0;
    for (int c = 0; c < d.num_classes; ++c) {
        double exact = r * static_cast<double>(by_class[c].size());
        quota[c] = static_cast<int>(std::floor(exact));
        quota[c] = std::min(quota[c], static_cast<int>(by_class[c].size()));
        assigned += quota[c];
        remainders.push_back({exact - quota[c], c});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (size_t k = 0; assigned < total && k < remainders.size(); ++k) {
        int c = remainders[k].second;
        if (quota[c] < static_cast<int>(by_class[c].size())) {
            ++quota[c];
            ++assigned;
        }
    }

    Rng rng(mix_seed(seed, "split_clean_subset"));
    std::vector<int> chosen;
    for (int c = 0; c < d.num_classes; ++c) {
        std::vector<int> pool = by_class[c];
        rng.shuffle(pool);
        chosen.insert(chosen.end(), pool.begin(), pool.begin() + quota[c]);
    }
    std::sort(chosen.begin(), chosen.end());

    LabeledDataset out;
    out.num_classes = d.num_classes;
    out.role = DatasetRole::clean_subset;
    out.samples.reserve(chosen.size());
    for (int i : chosen) out.samples.push_back(d.samples[i]);
    return out;
}

DatasetStats dataset_stats(const LabeledDataset& d) {
    DatasetStats st;
    st.per_class_counts.assign(std::max(d.num_classes, 0), 0);
    size_t token_total = 0;
    for (const auto& s : d.samples) {
        if (s.label >= 0) {
            if (s.label >= static_cast<int>(st.per_class_counts.size()))
                st.per_class_counts.resize(s.label + 1, 0);
            st.per_class_counts[s.label]++;
        }
        if (s.poisoned) st.poisoned_count++;
        token_total += whitespace_tokens(s.text).size();
    }
    st.mean_token_count =
        d.samples.empty() ? 0.0 : static_cast<double>(token_total) / static_cast<double>(d.size());
    return st;
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

}  // namespace mbtsad
