#include "mbtsad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mbtsad {

namespace {

constexpr int kEvalBatch = 64;

std::string fmt_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

nlohmann::json metrics_to_json(const MetricsReport& r) {
    return {{"cacc", r.cacc},
            {"asr", r.asr},
            {"n_clean", r.n_clean},
            {"n_poison", r.n_poison},
            {"model_id", r.model_id},
            {"attack", r.attack_summary},
            {"defense", r.defense_tag},
            {"config_hash", r.config_hash},
            {"seed", r.seed}};
}

std::vector<int> predict_batchwise(const ModelParams& p, const SubwordVocab& v,
                                   const LabeledDataset& d) {
    std::vector<int> preds;
    preds.reserve(d.size());
    std::vector<std::vector<int>> batch;
    auto flush = [&]() {
        if (batch.empty()) return;
        BatchCache cache = forward_batch(p, batch, DropoutSpec{});
        for (int b = 0; b < cache.logits.rows; ++b) {
            const double* z = cache.logits.row(b);
            int best = 0;
            for (int j = 1; j < cache.logits.cols; ++j)
                if (z[j] > z[best]) best = j;
            preds.push_back(best);
        }
        batch.clear();
    };
    for (const auto& s : d.samples) {
        batch.push_back(encode(v, s.text, p.cfg.max_len));
        if (static_cast<int>(batch.size()) == kEvalBatch) flush();
    }
    flush();
    return preds;
}

double compute_cacc(const ModelParams& p, const SubwordVocab& v,
                    const LabeledDataset& clean_test) {
    if (clean_test.samples.empty()) throw std::invalid_argument("compute_cacc: empty test set");
    for (const auto& s : clean_test.samples)
        if (s.poisoned) throw std::invalid_argument("compute_cacc: poisoned sample in clean set");
    auto preds = predict_batchwise(p, v, clean_test);
    int correct = 0;
    for (size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == clean_test.samples[i].label) ++correct;
    return 100.0 * correct / static_cast<double>(preds.size());
}

double compute_asr(const ModelParams& p, const SubwordVocab& v,
                   const LabeledDataset& poison_test, int target) {
    if (poison_test.samples.empty()) throw std::invalid_argument("compute_asr: empty poison set");
    for (const auto& s : poison_test.samples)
        if (s.label == target)
            throw std::invalid_argument("compute_asr: sample with target-label origin in set");
    auto preds = predict_batchwise(p, v, poison_test);
    int hits = 0;
    for (int pr : preds)
        if (pr == target) ++hits;
    return 100.0 * hits / static_cast<double>(preds.size());
}

std::vector<BatchCeRow> batch_ce_analysis(const ModelParams& m_b, const SubwordVocab& v,
                                          const LabeledDataset& d_c,
                                          const std::vector<AugmentationMethod>& methods,
                                          int batch_size, uint64_t seed) {
    if (batch_size < 1) throw std::invalid_argument("batch_ce_analysis: batch_size must be >= 1");
    std::vector<BatchCeRow> rows;
    for (size_t mi = 0; mi < methods.size(); ++mi) {
        BatchCeRow row;
        row.method = methods[mi];
        std::vector<std::vector<int>> batch;
        std::vector<int> labels;
        double global = 0.0;
        auto flush = [&]() {
            if (batch.empty()) return;
            BatchCache cache = forward_batch(m_b, batch, DropoutSpec{});
            const double ce = cross_entropy(cache.logits, labels, nullptr);
            row.batch_means.push_back(ce);
            global += ce * static_cast<double>(batch.size());
            row.n_samples += static_cast<int>(batch.size());
            batch.clear();
            labels.clear();
        };
        for (const auto& s : d_c.samples) {
            const std::string text = apply_augmentation(
                s.text, methods[mi], mix_seed(seed, s.id, static_cast<uint64_t>(mi)));
            batch.push_back(encode(v, text, m_b.cfg.max_len));
            labels.push_back(s.label);
            if (static_cast<int>(batch.size()) == batch_size) flush();
        }
        flush();
        row.global_mean = row.n_samples > 0 ? global / row.n_samples : 0.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_ce_table_csv(const std::vector<BatchCeRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "method,mean_ce,n_samples\n";
    for (const auto& r : rows)
        out << to_string(r.method.kind) << "," << fmt_double(r.global_mean) << ","
            << r.n_samples << "\n";
}

Mat collect_cls_vectors(const ModelParams& p, const SubwordVocab& v, const LabeledDataset& d) {
    const int dim = p.cfg.hidden_dim;
    Mat out(static_cast<int>(d.size()), dim);
    int row = 0;
    std::vector<std::vector<int>> batch;
    auto flush = [&]() {
        if (batch.empty()) return;
        BatchCache cache = forward_batch(p, batch, DropoutSpec{});
        for (int b = 0; b < static_cast<int>(batch.size()); ++b) {
            std::copy_n(cache.hidden.back().row(b * p.cfg.max_len), dim, out.row(row));
            ++row;
        }
        batch.clear();
    };
    for (const auto& s : d.samples) {
        batch.push_back(encode(v, s.text, p.cfg.max_len));
        if (static_cast<int>(batch.size()) == kEvalBatch) flush();
    }
    flush();
    return out;
}

void export_representations(const ModelParams& p, const SubwordVocab& v,
                            const std::vector<std::pair<std::string, const LabeledDataset*>>& sets,
                            const std::string& out_path) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << "dataset,id,label,poisoned";
    for (int j = 0; j < p.cfg.hidden_dim; ++j) out << ",v" << j;
    out << "\n";
    for (const auto& [tag, dset] : sets) {
        Mat vecs = collect_cls_vectors(p, v, *dset);
        for (int i = 0; i < vecs.rows; ++i) {
            const auto& s = dset->samples[i];
            out << tag << "," << s.id << "," << s.label << "," << (s.poisoned ? 1 : 0);
            for (int j = 0; j < vecs.cols; ++j) out << "," << fmt_double(vecs.at(i, j));
            out << "\n";
        }
    }
}

namespace {

// Dominant eigenvector of the symmetric matrix c by power iteration.
// Returns the eigenvalue; the iterate lands in the data span after one
// multiply, so exactly low-rank inputs resolve exactly.
double power_iterate(const Mat& c, std::vector<double>& vec) {
    const int d = c.rows;
    Rng rng(0x5eedu);
    vec.assign(d, 0.0);
    for (int j = 0; j < d; ++j) vec[j] = rng.uniform_sym(1.0);

    std::vector<double> next(d);
    double lambda = 0.0;
    for (int iter = 0; iter < 2000; ++iter) {
        for (int i = 0; i < d; ++i) {
            double s = 0.0;
            for (int j = 0; j < d; ++j) s += c.at(i, j) * vec[j];
            next[i] = s;
        }
        double norm = 0.0;
        for (double x : next) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-250) {
            vec.assign(d, 0.0);
            return 0.0;
        }
        double delta = 0.0;
        for (int i = 0; i < d; ++i) {
            next[i] /= norm;
            delta = std::max(delta, std::fabs(next[i] - vec[i]));
        }
        vec = next;
        lambda = norm;
        if (iter > 4 && delta < 1e-15) break;
    }
    return lambda;
}

}  // namespace

Mat linear_project_2d(const Mat& vectors) {
    const int n = vectors.rows, d = vectors.cols;
    if (n < 2) throw std::invalid_argument("linear_project_2d: need at least 2 vectors");

    Mat x = vectors;
    std::vector<double> mean(d, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) mean[j] += x.at(i, j);
    for (double& m : mean) m /= n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x.at(i, j) -= mean[j];

    Mat cov(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int r = 0; r < n; ++r) s += x.at(r, i) * x.at(r, j);
            cov.at(i, j) = s;
        }

    std::vector<double> v1;
    const double l1 = power_iterate(cov, v1);

    std::vector<double> v2(d, 0.0);
    if (l1 > 0.0) {
        Mat deflated = cov;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) deflated.at(i, j) -= l1 * v1[i] * v1[j];
        const double l2 = power_iterate(deflated, v2);
        // Guard against numerical leakage of the first direction.
        double dot = 0.0;
        for (int j = 0; j < d; ++j) dot += v1[j] * v2[j];
        for (int j = 0; j < d; ++j) v2[j] -= dot * v1[j];
        double norm = 0.0;
        for (double xx : v2) norm += xx * xx;
        norm = std::sqrt(norm);
        if (l2 <= l1 * 1e-12 || norm < 1e-12) {
            std::fill(v2.begin(), v2.end(), 0.0);
        } else {
            for (double& xx : v2) xx /= norm;
        }
    }

    // Deterministic sign: the largest-magnitude coordinate is positive.
    for (auto* dir : {&v1, &v2}) {
        int arg = 0;
        for (int j = 1; j < d; ++j)
            if (std::fabs((*dir)[j]) > std::fabs((*dir)[arg])) arg = j;
        if ((*dir)[arg] < 0.0)
            for (double& xx : *dir) xx = -xx;
    }

    Mat out(n, 2);
    for (int i = 0; i < n; ++i) {
        double a = 0.0, b = 0.0;
        for (int j = 0; j < d; ++j) {
            a += x.at(i, j) * v1[j];
            b += x.at(i, j) * v2[j];
        }
        out.at(i, 0) = a;
        out.at(i, 1) = b;
    }
    return out;
}

}  // namespace mbtsad
