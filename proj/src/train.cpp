#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mbtsad/model.hpp"

namespace mbtsad {

void apply_update(ModelParams& p, const ModelParams& grads, const TrainHParams& hp,
                  OptimizerState& state) {
    auto pt = tensor_list(p);
    auto gt = tensor_list(grads);
    if (hp.opt == Optimizer::sgd) {
        for (size_t i = 0; i < pt.size(); ++i) {
            auto& w = *pt[i].second;
            const auto& g = *gt[i].second;
            for (size_t j = 0; j < w.size(); ++j) w[j] -= hp.lr * g[j];
        }
        return;
    }
    ++state.t;
    auto mt = tensor_list(state.m);
    auto vt = tensor_list(state.v);
    const double bc1 = 1.0 - std::pow(hp.adam_beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(hp.adam_beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < pt.size(); ++i) {
        auto& w = *pt[i].second;
        const auto& g = *gt[i].second;
        auto& m = *mt[i].second;
        auto& v = *vt[i].second;
        for (size_t j = 0; j < w.size(); ++j) {
            m[j] = hp.adam_beta1 * m[j] + (1.0 - hp.adam_beta1) * g[j];
            v[j] = hp.adam_beta2 * v[j] + (1.0 - hp.adam_beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= hp.lr * mhat / (std::sqrt(vhat) + hp.adam_eps);
        }
    }
}

// Deterministic batch schedule shared with the distillation loop so the two
// can be compared step for step.
std::vector<std::vector<int>> batch_schedule(int n, int batch_size, bool shuffle, uint64_t seed,
                                             int epoch) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    if (shuffle) {
        Rng rng(mix_seed(seed, "epoch_order", static_cast<uint64_t>(epoch)));
        rng.shuffle(order);
    }
    std::vector<std::vector<int>> batches;
    for (int s = 0; s < n; s += batch_size) {
        int e = std::min(n, s + batch_size);
        batches.push_back(std::vector<int>(order.begin() + s, order.begin() + e));
    }
    return batches;
}

ModelParams train_supervised_encoded(const ModelParams& p,
                                     const std::vector<std::vector<int>>& ids,
                                     const std::vector<int>& labels, const TrainHParams& hp,
                                     uint64_t seed, std::vector<double>* epoch_losses) {
    if (ids.size() != labels.size())
        throw std::invalid_argument("train_supervised: ids/labels size mismatch");
    if (ids.empty()) throw std::invalid_argument("train_supervised: empty dataset");
    for (int y : labels)
        if (y < 0 || y >= p.cfg.num_classes)
            throw std::invalid_argument("train_supervised: label out of range");

    ModelParams out = p;
    OptimizerState state(out);
    const int n = static_cast<int>(ids.size());

    double best_loss = HUGE_VAL;
    int stale = 0;
    long step = 0;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        auto batches = batch_schedule(n, hp.batch_size, true, seed, epoch);
        double loss_sum = 0.0;
        long sample_sum = 0;
        for (size_t bi = 0; bi < batches.size(); ++bi) {
            std::vector<std::vector<int>> bx;
            std::vector<int> by;
            for (int idx : batches[bi]) {
                bx.push_back(ids[idx]);
                by.push_back(labels[idx]);
            }
            DropoutSpec drop;
            drop.hidden = hp.dropout;
            drop.attention = hp.dropout;
            drop.seed = mix_seed(seed, "dropout_step", static_cast<uint64_t>(step));
            BatchCache cache = forward_batch(out, bx, drop);

            LossInjections inj;
            const double loss = cross_entropy(cache.logits, by, &inj.d_logits);
            if (!std::isfinite(loss))
                throw std::runtime_error("train_supervised: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " + std::to_string(bi));
            loss_sum += loss * static_cast<double>(by.size());
            sample_sum += static_cast<long>(by.size());

            ModelParams grads = backward_batch(out, cache, inj);
            apply_update(out, grads, hp, state);
            ++step;
        }
        const double mean_loss = loss_sum / static_cast<double>(sample_sum);
        if (epoch_losses) epoch_losses->push_back(mean_loss);
        if (hp.plateau_patience > 0) {
            if (mean_loss < best_loss - hp.plateau_eps) {
                best_loss = mean_loss;
                stale = 0;
            } else if (++stale >= hp.plateau_patience) {
                break;
            }
        }
    }
    return out;
}

ModelParams train_supervised(const ModelParams& p, const LabeledDataset& d, const SubwordVocab& v,
                             const TrainHParams& hp, uint64_t seed) {
    std::vector<int> labels;
    labels.reserve(d.size());
    for (const auto& s : d.samples) labels.push_back(s.label);
    return train_supervised_encoded(p, encode_dataset(v, d, p.cfg.max_len), labels, hp, seed,
                                    nullptr);
}

double gradient_check(const GradCheckTarget& target, const ModelParams& p, int n_coords,
                      uint64_t seed) {
    const ModelParams analytic = target.grad(p);
    auto tensors = tensor_list(const_cast<ModelParams&>(p));
    auto grad_tensors = tensor_list(const_cast<ModelParams&>(analytic));

    size_t total = 0;
    for (const auto& [name, t] : tensors) total += t->size();

    Rng rng(mix_seed(seed, "gradient_check"));
    const double h = 1e-4;
    double max_rel = 0.0;
    ModelParams work = p;
    auto work_tensors = tensor_list(work);

    for (int k = 0; k < n_coords; ++k) {
        size_t flat = static_cast<size_t>(rng.uniform_int(0, static_cast<int>(total) - 1));
        size_t ti = 0;
        while (flat >= work_tensors[ti].second->size()) {
            flat -= work_tensors[ti].second->size();
            ++ti;
        }
        double& w = (*work_tensors[ti].second)[flat];
        const double orig = w;
        w = orig + h;
        const double up = target.value(work);
        w = orig - h;
        const double down = target.value(work);
        w = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double a = (*grad_tensors[ti].second)[flat];
        const double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-8});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace mbtsad
