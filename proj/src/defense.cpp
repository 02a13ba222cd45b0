#include "mbtsad/defense.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mbtsad {

namespace {

constexpr double kTiny = 1e-300;

double frobenius(const Mat& m) {
    double s = 0.0;
    for (double x : m.v) s += x * x;
    return std::sqrt(s);
}

// AE + normalization for one sample/layer slice of a batched prob tensor.
struct AeView {
    Mat ae;           // l x l
    double norm = 0;  // Frobenius norm of ae
};

AeView ae_of_slice(const double* probs, int heads, int len) {
    AeView out;
    out.ae = Mat(len, len);
    for (int h = 0; h < heads; ++h) {
        const double* ph = probs + static_cast<size_t>(h) * len * len;
        for (int i = 0; i < len; ++i)
            for (int j = 0; j < len; ++j) {
                const double x = ph[static_cast<size_t>(i) * len + j];
                out.ae.at(i, j) += std::fabs(x) * std::fabs(x);
            }
    }
    out.norm = frobenius(out.ae);
    return out;
}

}  // namespace

void DistillConfig::validate() const {
    const bool live = use_attention_loss || alpha > 0.0 || (use_hidden_loss && beta > 0.0);
    if (!live)
        throw std::invalid_argument(
            "DistillConfig: all loss terms disabled; the total loss would be identically zero");
    if (batch_size < 1) throw std::invalid_argument("DistillConfig: batch_size must be >= 1");
    if (augment_budget.n_per_sample < 1)
        throw std::invalid_argument("DistillConfig: n_per_sample must be >= 1");
}

Mat attention_enhance(const AttentionTensor& a) {
    for (double x : a.v)
        if (!std::isfinite(x))
            throw std::invalid_argument("attention_enhance: non-finite attention entry");
    return ae_of_slice(a.v.data(), a.heads, a.len).ae;
}

double attention_transfer_pair(const AttentionTensor& a_t, const AttentionTensor& a_s) {
    if (a_t.heads != a_s.heads || a_t.len != a_s.len)
        throw std::invalid_argument("attention_transfer_pair: shape mismatch");
    AeView t = ae_of_slice(a_t.v.data(), a_t.heads, a_t.len);
    AeView s = ae_of_slice(a_s.v.data(), a_s.heads, a_s.len);
    if (t.norm == 0.0 || s.norm == 0.0)
        throw std::runtime_error("attention_transfer_pair: degenerate zero-norm attention map");
    double acc = 0.0;
    for (size_t i = 0; i < t.ae.v.size(); ++i) {
        const double d = t.ae.v[i] / t.norm - s.ae.v[i] / s.norm;
        acc += d * d;
    }
    return std::sqrt(acc);
}

double attention_loss(const std::vector<ForwardTrace>& teacher,
                      const std::vector<ForwardTrace>& student) {
    if (teacher.size() != student.size() || teacher.empty())
        throw std::invalid_argument("attention_loss: batch mismatch");
    double total = 0.0;
    for (size_t b = 0; b < teacher.size(); ++b) {
        if (teacher[b].attentions.size() != student[b].attentions.size())
            throw std::invalid_argument("attention_loss: layer count mismatch");
        for (size_t n = 0; n < teacher[b].attentions.size(); ++n)
            total += attention_transfer_pair(teacher[b].attentions[n], student[b].attentions[n]);
    }
    return total / static_cast<double>(teacher.size());
}

double hidden_loss(const std::vector<ForwardTrace>& teacher,
                   const std::vector<ForwardTrace>& student) {
    if (teacher.size() != student.size() || teacher.empty())
        throw std::invalid_argument("hidden_loss: batch mismatch");
    double total = 0.0;
    for (size_t b = 0; b < teacher.size(); ++b) {
        const auto& ht = teacher[b].hidden_states;
        const auto& hs = student[b].hidden_states;
        if (ht.size() != hs.size()) throw std::invalid_argument("hidden_loss: layer mismatch");
        for (size_t n = 0; n < ht.size(); ++n) {
            if (ht[n].rows != hs[n].rows || ht[n].cols != hs[n].cols)
                throw std::invalid_argument("hidden_loss: hidden state shape mismatch");
            double mse = 0.0;
            for (size_t i = 0; i < ht[n].v.size(); ++i) {
                const double d = ht[n].v[i] - hs[n].v[i];
                mse += d * d;
            }
            total += mse / static_cast<double>(ht[n].v.size());
        }
    }
    return total / static_cast<double>(teacher.size());
}

double classification_loss(const Mat& logits, const std::vector<int>& labels) {
    return cross_entropy(logits, labels, nullptr);
}

TotalLossParts total_loss(const std::vector<ForwardTrace>& teacher,
                          const std::vector<ForwardTrace>& student,
                          const std::vector<int>& labels, const DistillConfig& cfg) {
    cfg.validate();
    TotalLossParts parts;
    if (cfg.use_attention_loss) parts.attention = attention_loss(teacher, student);
    if (cfg.use_hidden_loss) parts.hidden = hidden_loss(teacher, student);

    Mat logits(static_cast<int>(student.size()), static_cast<int>(student[0].logits.size()));
    for (size_t b = 0; b < student.size(); ++b)
        std::copy(student[b].logits.begin(), student[b].logits.end(), logits.row(static_cast<int>(b)));
    parts.classification = classification_loss(logits, labels);

    parts.total = (cfg.use_attention_loss ? parts.attention : 0.0) +
                  cfg.alpha * parts.classification +
                  (cfg.use_hidden_loss ? cfg.beta * parts.hidden : 0.0);
    return parts;
}

DistillResult attention_distill(const ModelParams& teacher, const ModelParams& student,
                                const LabeledDataset& d_a, const SubwordVocab& v,
                                const DistillConfig& cfg, uint64_t seed) {
    cfg.validate();
    if (teacher.cfg.num_layers != student.cfg.num_layers ||
        teacher.cfg.hidden_dim != student.cfg.hidden_dim ||
        teacher.cfg.num_heads != student.cfg.num_heads ||
        teacher.cfg.max_len != student.cfg.max_len)
        throw std::invalid_argument("attention_distill: teacher/student config mismatch");

    DistillResult res;
    res.params = student;

    auto ids = encode_dataset(v, d_a, student.cfg.max_len);
    std::vector<int> labels;
    labels.reserve(d_a.size());
    for (const auto& s : d_a.samples) labels.push_back(s.label);

    const ModelConfig& mc = student.cfg;
    const int NL = mc.num_layers, l = mc.max_len, d = mc.hidden_dim, c = mc.num_heads;

    TrainHParams hp;
    hp.lr = cfg.distill_lr;
    hp.batch_size = cfg.batch_size;
    hp.opt = cfg.opt;
    OptimizerState state(res.params);

    const int n = static_cast<int>(ids.size());
    double best_total = HUGE_VAL;
    int stale = 0;
    long step = 0;
    for (int epoch = 0; epoch < cfg.distill_epochs; ++epoch) {
        auto batches = batch_schedule(n, cfg.batch_size, true, seed, epoch);
        DistillEpochLog log;
        long seen = 0;
        for (size_t bi = 0; bi < batches.size(); ++bi) {
            const int B = static_cast<int>(batches[bi].size());
            std::vector<std::vector<int>> bx;
            std::vector<int> by;
            for (int idx : batches[bi]) {
                bx.push_back(ids[idx]);
                by.push_back(labels[idx]);
            }

            // Identical batches for both models; teacher frozen in eval mode.
            BatchCache tc = forward_batch(teacher, bx, DropoutSpec{});
            DropoutSpec sdrop;
            sdrop.hidden = cfg.student_dropout;
            sdrop.attention = false;
            sdrop.seed = mix_seed(seed, "distill_dropout", static_cast<uint64_t>(step));
            BatchCache sc = forward_batch(res.params, bx, sdrop);

            LossInjections inj;
            double la = 0.0, lh = 0.0;

            const double lcls = cross_entropy(sc.logits, by, &inj.d_logits);
            for (auto& x : inj.d_logits.v) x *= cfg.alpha;

            if (cfg.use_hidden_loss) {
                inj.d_hidden.assign(NL + 1, Mat(B * l, d));
                const double denom = static_cast<double>(B) * l * d;
                for (int layer = 0; layer <= NL; ++layer) {
                    const Mat& hT = tc.hidden[layer];
                    const Mat& hS = sc.hidden[layer];
                    Mat& dst = inj.d_hidden[layer];
                    double mse_sum = 0.0;
                    for (size_t i = 0; i < hS.v.size(); ++i) {
                        const double diff = hS.v[i] - hT.v[i];
                        mse_sum += diff * diff;
                        dst.v[i] = cfg.beta * 2.0 * diff / denom;
                    }
                    lh += mse_sum / denom;
                }
            }

            if (cfg.use_attention_loss) {
                inj.d_probs.resize(NL);
                for (int layer = 0; layer < NL; ++layer)
                    inj.d_probs[layer].assign(static_cast<size_t>(B) * c * l * l, 0.0);
                for (int layer = 0; layer < NL; ++layer) {
                    const auto& pt = tc.layers[layer].probs;
                    const auto& ps = sc.layers[layer].probs;
                    auto& dst = inj.d_probs[layer];
                    for (int b = 0; b < B; ++b) {
                        const size_t base = (static_cast<size_t>(b) * c) * l * l;
                        AeView at = ae_of_slice(pt.data() + base, c, l);
                        AeView as = ae_of_slice(ps.data() + base, c, l);
                        if (at.norm == 0.0 || as.norm == 0.0)
                            throw std::runtime_error(
                                "attention_distill: degenerate zero-norm attention map");
                        Mat diff(l, l);  // u_t - u_s
                        double dist = 0.0;
                        for (size_t i = 0; i < diff.v.size(); ++i) {
                            diff.v[i] = at.ae.v[i] / at.norm - as.ae.v[i] / as.norm;
                            dist += diff.v[i] * diff.v[i];
                        }
                        dist = std::sqrt(dist);
                        la += dist / B;
                        if (dist < kTiny) continue;
                        // dL/dAE_s = (G - <G, u_s> u_s) / ||AE_s||, G = -diff/dist
                        double gdotu = 0.0;
                        for (size_t i = 0; i < diff.v.size(); ++i)
                            gdotu += (-diff.v[i] / dist) * (as.ae.v[i] / as.norm);
                        Mat d_ae(l, l);
                        for (size_t i = 0; i < diff.v.size(); ++i)
                            d_ae.v[i] =
                                (-diff.v[i] / dist - gdotu * as.ae.v[i] / as.norm) / as.norm;
                        // chain through AE: dL/dp = 2 p * dL/dAE
                        for (int h = 0; h < c; ++h) {
                            const double* ph = ps.data() + base + static_cast<size_t>(h) * l * l;
                            double* dh = dst.data() + base + static_cast<size_t>(h) * l * l;
                            for (size_t i = 0; i < d_ae.v.size(); ++i)
                                dh[i] += 2.0 * ph[i] * d_ae.v[i] / B;
                        }
                    }
                }
            }

            const double total = (cfg.use_attention_loss ? la : 0.0) + cfg.alpha * lcls +
                                 (cfg.use_hidden_loss ? cfg.beta * lh : 0.0);
            if (!std::isfinite(total))
                throw std::runtime_error("attention_distill: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " + std::to_string(bi));
            log.attention += la * B;
            log.classification += lcls * B;
            log.hidden += lh * B;
            log.total += total * B;
            seen += B;

            ModelParams grads = backward_batch(res.params, sc, inj);
            apply_update(res.params, grads, hp, state);
            ++step;
        }
        log.attention /= static_cast<double>(seen);
        log.classification /= static_cast<double>(seen);
        log.hidden /= static_cast<double>(seen);
        log.total /= static_cast<double>(seen);
        res.epochs.push_back(log);

        if (cfg.plateau_patience > 0) {
            if (log.total < best_total - cfg.plateau_eps) {
                best_total = log.total;
                stale = 0;
            } else if (++stale >= cfg.plateau_patience) {
                break;
            }
        }
    }
    return res;
}

MbtsadResult run_mbtsad(const ModelParams& m_b, const LabeledDataset& d_c,
                        const SubwordVocab& v, const DistillConfig& cfg, uint64_t seed) {
    cfg.validate();
    if (d_c.role != DatasetRole::clean_subset)
        throw std::invalid_argument("run_mbtsad: d_c must be the clean subset");

    MbtsadResult res;
    AugmentBudget budget = cfg.augment_budget;
    budget.seed = mix_seed(seed, "mbtsad_augment", budget.seed);
    res.d_a = generate_augmented_dataset(d_c, AugmentationMethod{AugmentKind::token_split},
                                         budget);

    TrainHParams hp;
    hp.lr = cfg.retrain_lr;
    hp.epochs = cfg.retrain_epochs;
    hp.batch_size = cfg.batch_size;
    hp.opt = cfg.opt;
    hp.plateau_patience = cfg.plateau_patience;
    hp.plateau_eps = cfg.plateau_eps;
    res.m_p = train_supervised(m_b, res.d_a, v, hp, mix_seed(seed, "mbtsad_retrain"));

    DistillResult dr =
        attention_distill(res.m_p, m_b, res.d_a, v, cfg, mix_seed(seed, "mbtsad_distill"));
    res.m_c = std::move(dr.params);
    res.distill_epochs = std::move(dr.epochs);
    return res;
}

std::string to_string(BaselineMethod m) {
    switch (m) {
        case BaselineMethod::cft: return "cft";
        case BaselineMethod::reinit_last_layer: return "reinit";
        case BaselineMethod::ts_ft: return "ts_ft";
    }
    return "cft";
}

ModelParams run_baseline(BaselineMethod method, const ModelParams& m_b,
                         const LabeledDataset& d_c, const SubwordVocab& v,
                         const DistillConfig& cfg, uint64_t seed) {
    TrainHParams hp;
    hp.lr = cfg.retrain_lr;
    hp.epochs = cfg.retrain_epochs;
    hp.batch_size = cfg.batch_size;
    hp.opt = cfg.opt;
    hp.plateau_patience = cfg.plateau_patience;
    hp.plateau_eps = cfg.plateau_eps;

    switch (method) {
        case BaselineMethod::cft:
            return train_supervised(m_b, d_c, v, hp, mix_seed(seed, "cft"));
        case BaselineMethod::reinit_last_layer: {
            ModelParams p = m_b;
            reinit_layer(p, p.cfg.num_layers - 1, mix_seed(seed, "reinit"));
            return train_supervised(p, d_c, v, hp, mix_seed(seed, "reinit_ft"));
        }
        case BaselineMethod::ts_ft: {
            AugmentBudget budget = cfg.augment_budget;
            budget.seed = mix_seed(seed, "mbtsad_augment", budget.seed);
            LabeledDataset d_a = generate_augmented_dataset(
                d_c, AugmentationMethod{AugmentKind::token_split}, budget);
            return train_supervised(m_b, d_a, v, hp, mix_seed(seed, "mbtsad_retrain"));
        }
    }
    throw std::invalid_argument("run_baseline: unknown method");
}

}  // namespace mbtsad
