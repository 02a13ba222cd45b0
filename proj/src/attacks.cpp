#include "mbtsad/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mbtsad/kernels.hpp"

namespace mbtsad {

std::string to_string(AttackFamily f) {
    switch (f) {
        case AttackFamily::badnets: return "badnets";
        case AttackFamily::lwp: return "lwp";
        case AttackFamily::ep: return "ep";
    }
    return "badnets";
}

AttackFamily attack_family_from_string(const std::string& s) {
    if (s == "badnets") return AttackFamily::badnets;
    if (s == "lwp") return AttackFamily::lwp;
    if (s == "ep") return AttackFamily::ep;
    throw std::invalid_argument("unknown attack family: " + s);
}

std::string to_string(InsertPolicy p) {
    return p == InsertPolicy::uniform_position ? "uniform_position" : "fixed_front";
}

InsertPolicy insert_policy_from_string(const std::string& s) {
    if (s == "uniform_position") return InsertPolicy::uniform_position;
    if (s == "fixed_front") return InsertPolicy::fixed_front;
    throw std::invalid_argument("unknown insert policy: " + s);
}

void AttackSpec::validate() const {
    if (triggers.empty()) throw std::invalid_argument("AttackSpec: triggers must be non-empty");
    for (const auto& t : triggers)
        if (t.empty() || whitespace_tokens(t).size() != 1)
            throw std::invalid_argument("AttackSpec: trigger must be a single token: '" + t + "'");
    if (target_label < 0) throw std::invalid_argument("AttackSpec: negative target label");
    if (!(poison_rate > 0.0 && poison_rate < 1.0))
        throw std::invalid_argument("AttackSpec: poison_rate must be in (0, 1)");
}

std::string AttackSpec::summary() const {
    std::string s = to_string(family) + " triggers=";
    for (size_t i = 0; i < triggers.size(); ++i) s += (i ? "," : "") + triggers[i];
    s += " target=" + std::to_string(target_label) +
         " rate=" + std::to_string(poison_rate);
    return s;
}

std::string insert_trigger(const std::string& text, const AttackSpec& spec, uint64_t seed) {
    if (text.empty()) throw std::invalid_argument("insert_trigger: empty text");
    auto tokens = whitespace_tokens(text);
    Rng rng(mix_seed(seed, "insert_trigger"));
    const std::string& trig =
        spec.triggers[rng.uniform_int(0, static_cast<int>(spec.triggers.size()) - 1)];
    const int gap = spec.insert_policy == InsertPolicy::fixed_front
                        ? 0
                        : rng.uniform_int(0, static_cast<int>(tokens.size()));
    tokens.insert(tokens.begin() + gap, trig);
    return join_tokens(tokens);
}

PoisonBuild build_poisoned_dataset(const LabeledDataset& d, const AttackSpec& spec,
                                   uint64_t seed) {
    spec.validate();
    if (d.role != DatasetRole::full_train)
        throw std::invalid_argument("build_poisoned_dataset: dataset role must be full_train");

    const int n_poison = static_cast<int>(std::floor(spec.poison_rate * d.size()));
    std::vector<int> candidates;
    for (int i = 0; i < static_cast<int>(d.size()); ++i)
        if (d.samples[i].label != spec.target_label) candidates.push_back(i);
    if (static_cast<int>(candidates.size()) < n_poison)
        throw std::runtime_error("build_poisoned_dataset: only " +
                                 std::to_string(candidates.size()) +
                                 " non-target samples for " + std::to_string(n_poison) +
                                 " poison slots");

    Rng rng(mix_seed(seed, "poison_pick"));
    auto pick = rng.sample_without_replacement(static_cast<int>(candidates.size()), n_poison);

    PoisonBuild out;
    out.spec = spec;
    out.seed = seed;
    out.poison_train = d;
    out.poison_train.role = DatasetRole::poison_train;
    for (int k : pick) {
        TextSample& s = out.poison_train.samples[candidates[k]];
        s.text = insert_trigger(s.text, spec, mix_seed(seed, s.id));
        s.label = spec.target_label;
        s.poisoned = true;
        s.origin = SampleOrigin::triggered;
    }
    return out;
}

LabeledDataset PoisonBuild::build_poison_test(const LabeledDataset& clean_test) const {
    LabeledDataset out;
    out.num_classes = clean_test.num_classes;
    out.role = DatasetRole::poison_test;
    for (const auto& s : clean_test.samples) {
        if (s.label == spec.target_label) continue;
        TextSample t = s;
        t.text = insert_trigger(s.text, spec, mix_seed(seed, "test_" + s.id));
        t.poisoned = true;
        t.origin = SampleOrigin::triggered;
        t.source_id = s.id;
        out.samples.push_back(std::move(t));
    }
    return out;
}

ModelParams train_badnets(const LabeledDataset& d, const AttackSpec& spec,
                          const ModelConfig& cfg, const SubwordVocab& v,
                          const TrainHParams& hp, uint64_t seed) {
    if (spec.family != AttackFamily::badnets)
        throw std::invalid_argument("train_badnets: spec family mismatch");
    PoisonBuild pb = build_poisoned_dataset(d, spec, mix_seed(seed, "badnets_poison"));
    ModelParams p = init_params(cfg, mix_seed(seed, "badnets_init"));
    return train_supervised(p, pb.poison_train, v, hp, mix_seed(seed, "badnets_train"));
}

ModelParams train_lwp(const LabeledDataset& d, const AttackSpec& spec, const ModelConfig& cfg,
                      const SubwordVocab& v, const TrainHParams& hp, uint64_t seed) {
    if (spec.family != AttackFamily::lwp)
        throw std::invalid_argument("train_lwp: spec family mismatch");
    PoisonBuild pb = build_poisoned_dataset(d, spec, mix_seed(seed, "lwp_poison"));

    ModelParams p = init_params(cfg, mix_seed(seed, "lwp_init"));
    const int d_model = cfg.hidden_dim, C = cfg.num_classes, NL = cfg.num_layers;

    // Auxiliary heads on layers 1..NL-1; the final layer keeps the real head.
    Rng aux_rng(mix_seed(seed, "lwp_aux_init"));
    std::vector<Mat> aux_w(NL - 1);
    std::vector<std::vector<double>> aux_b(NL - 1);
    const double s = std::sqrt(6.0 / (d_model + C));
    for (int n = 0; n < NL - 1; ++n) {
        aux_w[n] = Mat(d_model, C);
        for (auto& x : aux_w[n].v) x = aux_rng.uniform_sym(s);
        aux_b[n].assign(C, 0.0);
    }

    auto ids = encode_dataset(v, pb.poison_train, cfg.max_len);
    std::vector<int> labels;
    for (const auto& smp : pb.poison_train.samples) labels.push_back(smp.label);

    OptimizerState state(p);
    std::vector<Mat> aux_w_m = aux_w, aux_w_v = aux_w;
    std::vector<std::vector<double>> aux_b_m = aux_b, aux_b_v = aux_b;
    for (int n = 0; n < NL - 1; ++n) {
        aux_w_m[n].fill(0.0);
        aux_w_v[n].fill(0.0);
        std::fill(aux_b_m[n].begin(), aux_b_m[n].end(), 0.0);
        std::fill(aux_b_v[n].begin(), aux_b_v[n].end(), 0.0);
    }

    const uint64_t train_seed = mix_seed(seed, "lwp_train");
    const int total = static_cast<int>(ids.size());
    long step = 0;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        auto batches = batch_schedule(total, hp.batch_size, true, train_seed, epoch);
        for (size_t bi = 0; bi < batches.size(); ++bi) {
            const int B = static_cast<int>(batches[bi].size());
            std::vector<std::vector<int>> bx;
            std::vector<int> by;
            for (int idx : batches[bi]) {
                bx.push_back(ids[idx]);
                by.push_back(labels[idx]);
            }
            DropoutSpec drop;
            drop.hidden = hp.dropout;
            drop.attention = hp.dropout;
            drop.seed = mix_seed(train_seed, "dropout_step", static_cast<uint64_t>(step));
            BatchCache cache = forward_batch(p, bx, drop);

            LossInjections inj;
            const double w = 1.0 / NL;  // per-layer loss weight
            double loss = cross_entropy(cache.logits, by, &inj.d_logits) * w;
            for (auto& x : inj.d_logits.v) x *= w;

            inj.d_hidden.assign(NL + 1, Mat(B * cfg.max_len, d_model));
            std::vector<Mat> d_aux_w(NL - 1);
            std::vector<std::vector<double>> d_aux_b(NL - 1);
            for (int n = 1; n < NL; ++n) {
                // h^n [CLS] rows -> auxiliary logits
                Mat cls(B, d_model);
                for (int b = 0; b < B; ++b)
                    std::copy_n(cache.hidden[n].row(b * cfg.max_len), d_model, cls.row(b));
                Mat logits(B, C);
                kernels::matmul(cls.data(), aux_w[n - 1].data(), logits.data(), B, d_model, C);
                kernels::add_bias_rows(logits.data(), aux_b[n - 1].data(), B, C);
                Mat d_logits;
                loss += cross_entropy(logits, by, &d_logits) * w;
                for (auto& x : d_logits.v) x *= w;

                d_aux_w[n - 1] = Mat(d_model, C);
                kernels::matmul_tn(cls.data(), d_logits.data(), d_aux_w[n - 1].data(), d_model, B,
                                   C);
                d_aux_b[n - 1].assign(C, 0.0);
                kernels::col_sums(d_logits.data(), B, C, d_aux_b[n - 1].data());

                Mat d_cls(B, d_model);
                kernels::matmul_nt(d_logits.data(), aux_w[n - 1].data(), d_cls.data(), B, C,
                                   d_model);
                for (int b = 0; b < B; ++b) {
                    double* dst = inj.d_hidden[n].row(b * cfg.max_len);
                    const double* src = d_cls.row(b);
                    for (int j = 0; j < d_model; ++j) dst[j] += src[j];
                }
            }
            if (!std::isfinite(loss))
                throw std::runtime_error("train_lwp: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " + std::to_string(bi));

            ModelParams grads = backward_batch(p, cache, inj);
            apply_update(p, grads, hp, state);

            // Adam on the auxiliary heads, same hyperparameters.
            if (hp.opt == Optimizer::adam) {
                const double bc1 = 1.0 - std::pow(hp.adam_beta1, static_cast<double>(state.t));
                const double bc2 = 1.0 - std::pow(hp.adam_beta2, static_cast<double>(state.t));
                for (int n = 0; n < NL - 1; ++n) {
                    for (size_t j = 0; j < aux_w[n].v.size(); ++j) {
                        double& m = aux_w_m[n].v[j];
                        double& vv = aux_w_v[n].v[j];
                        const double gj = d_aux_w[n].v[j];
                        m = hp.adam_beta1 * m + (1 - hp.adam_beta1) * gj;
                        vv = hp.adam_beta2 * vv + (1 - hp.adam_beta2) * gj * gj;
                        aux_w[n].v[j] -= hp.lr * (m / bc1) / (std::sqrt(vv / bc2) + hp.adam_eps);
                    }
                    for (size_t j = 0; j < aux_b[n].size(); ++j) {
                        double& m = aux_b_m[n][j];
                        double& vv = aux_b_v[n][j];
                        const double gj = d_aux_b[n][j];
                        m = hp.adam_beta1 * m + (1 - hp.adam_beta1) * gj;
                        vv = hp.adam_beta2 * vv + (1 - hp.adam_beta2) * gj * gj;
                        aux_b[n][j] -= hp.lr * (m / bc1) / (std::sqrt(vv / bc2) + hp.adam_eps);
                    }
                }
            } else {
                for (int n = 0; n < NL - 1; ++n) {
                    for (size_t j = 0; j < aux_w[n].v.size(); ++j)
                        aux_w[n].v[j] -= hp.lr * d_aux_w[n].v[j];
                    for (size_t j = 0; j < aux_b[n].size(); ++j)
                        aux_b[n][j] -= hp.lr * d_aux_b[n][j];
                }
            }
            ++step;
        }
    }
    return p;  // auxiliary heads go out of scope here
}

EpResult run_ep(const ModelParams& clean_model, const SubwordVocab& v, const AttackSpec& spec,
                const LabeledDataset& probe_corpus, double lr, int steps, int batch_size,
                uint64_t seed) {
    if (spec.family != AttackFamily::ep)
        throw std::invalid_argument("run_ep: spec family mismatch");
    spec.validate();

    EpResult res;
    res.vocab = v;
    res.params = clean_model;
    const std::string& trig = spec.triggers[0];

    res.trigger_id = single_token_id(res.vocab, trig);
    if (res.trigger_id < 0) {
        res.vocab = add_word_token(res.vocab, trig);
        res.trigger_id = single_token_id(res.vocab, trig);
        res.vocab_extended = true;
        // One new embedding row for the new token id.
        const int d = res.params.cfg.hidden_dim;
        Rng rng(mix_seed(seed, "ep_new_row"));
        res.params.cfg.vocab_size = res.vocab.size();
        Mat emb(res.vocab.size(), d);
        std::copy(res.params.tok_emb.v.begin(), res.params.tok_emb.v.end(), emb.v.begin());
        for (int j = 0; j < d; ++j) emb.at(res.vocab.size() - 1, j) = rng.uniform_sym(0.05);
        res.params.tok_emb = std::move(emb);
    }

    // Triggered probe texts, all labeled with the attack target.
    std::vector<std::vector<int>> ids;
    std::vector<int> labels;
    for (const auto& s : probe_corpus.samples) {
        const std::string text = insert_trigger(s.text, spec, mix_seed(seed, "ep_" + s.id));
        ids.push_back(encode(res.vocab, text, res.params.cfg.max_len));
        labels.push_back(spec.target_label);
    }
    if (ids.empty()) throw std::invalid_argument("run_ep: empty probe corpus");

    const int d = res.params.cfg.hidden_dim;
    const int row = res.trigger_id;
    std::vector<double> m(d, 0.0), vv(d, 0.0);
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    long t = 0;

    const uint64_t loop_seed = mix_seed(seed, "ep_loop");
    int step = 0;
    for (int epoch = 0; step < steps; ++epoch) {
        auto batches =
            batch_schedule(static_cast<int>(ids.size()), batch_size, true, loop_seed, epoch);
        for (const auto& batch : batches) {
            if (step >= steps) break;
            std::vector<std::vector<int>> bx;
            std::vector<int> by;
            for (int idx : batch) {
                bx.push_back(ids[idx]);
                by.push_back(labels[idx]);
            }
            BatchCache cache = forward_batch(res.params, bx, DropoutSpec{});
            LossInjections inj;
            const double loss = cross_entropy(cache.logits, by, &inj.d_logits);
            if (!std::isfinite(loss))
                throw std::runtime_error("run_ep: non-finite loss at step " +
                                         std::to_string(step));
            ModelParams grads = backward_batch(res.params, cache, inj);

            // Adam restricted to the trigger token's embedding row.
            ++t;
            const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
            const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
            const double* g = grads.tok_emb.row(row);
            double* w = res.params.tok_emb.row(row);
            for (int j = 0; j < d; ++j) {
                m[j] = b1 * m[j] + (1 - b1) * g[j];
                vv[j] = b2 * vv[j] + (1 - b2) * g[j] * g[j];
                w[j] -= lr * (m[j] / bc1) / (std::sqrt(vv[j] / bc2) + eps);
            }
            ++step;
        }
    }
    return res;
}

}  // namespace mbtsad
