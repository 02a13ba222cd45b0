#include "mbtsad/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mbtsad/kernels.hpp"

namespace mbtsad {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGeluK = 0.7978845608028654;  // sqrt(2/pi)

double gelu(double x) {
    double u = kGeluK * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

// Row-wise layernorm; writes normalized rows (gain/bias applied) to out and
// keeps xhat/rstd for the backward pass.
void layernorm_rows(const Mat& x, const std::vector<double>& g, const std::vector<double>& b,
                    Mat& out, Mat& xhat, std::vector<double>& rstd) {
    const int rows = x.rows, d = x.cols;
    out = Mat(rows, d);
    xhat = Mat(rows, d);
    rstd.assign(rows, 0.0);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const double* xr = x.row(r);
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += xr[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            double t = xr[j] - mean;
            var += t * t;
        }
        var /= d;
        const double rs = 1.0 / std::sqrt(var + kLnEps);
        rstd[r] = rs;
        double* xh = xhat.row(r);
        double* o = out.row(r);
        for (int j = 0; j < d; ++j) {
            xh[j] = (xr[j] - mean) * rs;
            o[j] = g[j] * xh[j] + b[j];
        }
    }
}

std::vector<double> make_dropmask(Rng& rng, size_t n, double rate) {
    std::vector<double> mask(n);
    const double keep = 1.0 - rate;
    const double scale = 1.0 / keep;
    for (size_t i = 0; i < n; ++i) mask[i] = rng.uniform01() < keep ? scale : 0.0;
    return mask;
}

void apply_mask(Mat& x, const std::vector<double>& mask) {
    if (mask.empty()) return;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < x.rows; ++r) {
        double* xr = x.row(r);
        const double* mr = mask.data() + static_cast<size_t>(r) * x.cols;
        for (int j = 0; j < x.cols; ++j) xr[j] *= mr[j];
    }
}

void init_mat_xavier(Mat& m, int fan_in, int fan_out, Rng& rng) {
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& x : m.v) x = rng.uniform_sym(s);
}

void init_layer_params(LayerParams& lp, const ModelConfig& cfg, Rng& rng) {
    const int d = cfg.hidden_dim, f = cfg.ffn_dim;
    lp.ln1_g.assign(d, 1.0);
    lp.ln1_b.assign(d, 0.0);
    lp.wq = Mat(d, d);
    lp.wk = Mat(d, d);
    lp.wv = Mat(d, d);
    lp.wo = Mat(d, d);
    init_mat_xavier(lp.wq, d, d, rng);
    init_mat_xavier(lp.wk, d, d, rng);
    init_mat_xavier(lp.wv, d, d, rng);
    init_mat_xavier(lp.wo, d, d, rng);
    lp.bq.assign(d, 0.0);
    lp.bk.assign(d, 0.0);
    lp.bv.assign(d, 0.0);
    lp.bo.assign(d, 0.0);
    lp.ln2_g.assign(d, 1.0);
    lp.ln2_b.assign(d, 0.0);
    lp.w1 = Mat(d, f);
    init_mat_xavier(lp.w1, d, f, rng);
    lp.b1.assign(f, 0.0);
    lp.w2 = Mat(f, d);
    init_mat_xavier(lp.w2, f, d, rng);
    lp.b2.assign(d, 0.0);
}

}  // namespace

void ModelConfig::validate() const {
    if (num_layers < 1) throw std::invalid_argument("ModelConfig: num_layers must be >= 1");
    if (num_heads < 1) throw std::invalid_argument("ModelConfig: num_heads must be >= 1");
    if (hidden_dim < 1) throw std::invalid_argument("ModelConfig: hidden_dim must be >= 1");
    if (hidden_dim % num_heads != 0)
        throw std::invalid_argument("ModelConfig: hidden_dim must be divisible by num_heads");
    if (max_len < 2) throw std::invalid_argument("ModelConfig: max_len must be >= 2");
    if (vocab_size < 5) throw std::invalid_argument("ModelConfig: vocab_size must cover specials");
    if (num_classes < 2) throw std::invalid_argument("ModelConfig: num_classes must be >= 2");
    if (ffn_dim < 1) throw std::invalid_argument("ModelConfig: ffn_dim must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw std::invalid_argument("ModelConfig: dropout_rate must be in [0, 1)");
}

ModelParams init_params(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    ModelParams p;
    p.cfg = cfg;
    Rng rng(mix_seed(seed, "init_params"));

    const int d = cfg.hidden_dim;
    p.tok_emb = Mat(cfg.vocab_size, d);
    for (auto& x : p.tok_emb.v) x = rng.uniform_sym(0.05);
    p.pos_emb = Mat(cfg.max_len, d);
    for (auto& x : p.pos_emb.v) x = rng.uniform_sym(0.05);

    p.layers.resize(cfg.num_layers);
    for (auto& lp : p.layers) init_layer_params(lp, cfg, rng);

    p.lnf_g.assign(d, 1.0);
    p.lnf_b.assign(d, 0.0);
    p.w_cls = Mat(d, cfg.num_classes);
    init_mat_xavier(p.w_cls, d, cfg.num_classes, rng);
    p.b_cls.assign(cfg.num_classes, 0.0);
    return p;
}

void reinit_layer(ModelParams& p, int layer_index, uint64_t seed) {
    if (layer_index < 0 || layer_index >= p.cfg.num_layers)
        throw std::invalid_argument("reinit_layer: layer index out of range");
    Rng rng(mix_seed(seed, "reinit_layer", static_cast<uint64_t>(layer_index)));
    init_layer_params(p.layers[layer_index], p.cfg, rng);
}

ModelParams zeros_like(const ModelParams& p) {
    ModelParams z = p;
    for (auto& [name, t] : tensor_list(z)) std::fill(t->begin(), t->end(), 0.0);
    return z;
}

std::vector<std::pair<std::string, std::vector<double>*>> tensor_list(ModelParams& p) {
    std::vector<std::pair<std::string, std::vector<double>*>> out;
    out.push_back({"tok_emb", &p.tok_emb.v});
    out.push_back({"pos_emb", &p.pos_emb.v});
    for (size_t i = 0; i < p.layers.size(); ++i) {
        auto& L = p.layers[i];
        const std::string pre = "layer" + std::to_string(i) + ".";
        out.push_back({pre + "ln1_g", &L.ln1_g});
        out.push_back({pre + "ln1_b", &L.ln1_b});
        out.push_back({pre + "wq", &L.wq.v});
        out.push_back({pre + "wk", &L.wk.v});
        out.push_back({pre + "wv", &L.wv.v});
        out.push_back({pre + "wo", &L.wo.v});
        out.push_back({pre + "bq", &L.bq});
        out.push_back({pre + "bk", &L.bk});
        out.push_back({pre + "bv", &L.bv});
        out.push_back({pre + "bo", &L.bo});
        out.push_back({pre + "ln2_g", &L.ln2_g});
        out.push_back({pre + "ln2_b", &L.ln2_b});
        out.push_back({pre + "w1", &L.w1.v});
        out.push_back({pre + "b1", &L.b1});
        out.push_back({pre + "w2", &L.w2.v});
        out.push_back({pre + "b2", &L.b2});
    }
    out.push_back({"lnf_g", &p.lnf_g});
    out.push_back({"lnf_b", &p.lnf_b});
    out.push_back({"w_cls", &p.w_cls.v});
    out.push_back({"b_cls", &p.b_cls});
    return out;
}

std::vector<std::pair<std::string, const std::vector<double>*>> tensor_list(const ModelParams& p) {
    auto mut = tensor_list(const_cast<ModelParams&>(p));
    std::vector<std::pair<std::string, const std::vector<double>*>> out;
    out.reserve(mut.size());
    for (auto& [n, t] : mut) out.push_back({n, t});
    return out;
}

size_t param_count(const ModelParams& p) {
    size_t n = 0;
    for (const auto& [name, t] : tensor_list(p)) n += t->size();
    return n;
}

BatchCache forward_batch(const ModelParams& p, const std::vector<std::vector<int>>& ids_batch,
                         const DropoutSpec& drop) {
    const ModelConfig& cfg = p.cfg;
    const int B = static_cast<int>(ids_batch.size());
    const int l = cfg.max_len, d = cfg.hidden_dim, c = cfg.num_heads, dh = cfg.head_dim();
    if (B == 0) throw std::invalid_argument("forward_batch: empty batch");

    BatchCache cache;
    cache.batch = B;
    cache.len = l;
    cache.ids.resize(static_cast<size_t>(B) * l);
    cache.attend_mask.resize(static_cast<size_t>(B) * l);
    for (int b = 0; b < B; ++b) {
        if (static_cast<int>(ids_batch[b].size()) != l)
            throw std::invalid_argument("forward_batch: ids must be padded to max_len");
        for (int t = 0; t < l; ++t) {
            int id = ids_batch[b][t];
            if (id < 0 || id >= cfg.vocab_size)
                throw std::out_of_range("forward_batch: token id " + std::to_string(id) +
                                        " out of vocab range");
            cache.ids[static_cast<size_t>(b) * l + t] = id;
            cache.attend_mask[static_cast<size_t>(b) * l + t] = id != SubwordVocab::kPad;
        }
    }

    Rng drop_rng(mix_seed(drop.seed, "dropout"));
    const int rows = B * l;
    const double rate = cfg.dropout_rate;
    const bool use_hidden_drop = drop.hidden && rate > 0.0;
    const bool use_attn_drop = drop.attention && rate > 0.0;

    // Embedding: token + positional rows, then hidden dropout. hidden[0] is
    // the stream input the first layer sees.
    Mat x(rows, d);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const int id = cache.ids[r];
        const int t = r % l;
        const double* te = p.tok_emb.row(id);
        const double* pe = p.pos_emb.row(t);
        double* xr = x.row(r);
        for (int j = 0; j < d; ++j) xr[j] = te[j] + pe[j];
    }
    if (use_hidden_drop) {
        cache.emb_dropmask = make_dropmask(drop_rng, x.size(), rate);
        apply_mask(x, cache.emb_dropmask);
    }
    cache.hidden.push_back(x);

    cache.layers.resize(cfg.num_layers);
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    for (int n = 0; n < cfg.num_layers; ++n) {
        LayerCache& lc = cache.layers[n];
        const LayerParams& L = p.layers[n];

        Mat a;
        layernorm_rows(x, L.ln1_g, L.ln1_b, a, lc.ln1_xhat, lc.ln1_rstd);

        lc.q = Mat(rows, d);
        lc.k = Mat(rows, d);
        lc.v = Mat(rows, d);
        kernels::matmul(a.data(), L.wq.data(), lc.q.data(), rows, d, d);
        kernels::add_bias_rows(lc.q.data(), L.bq.data(), rows, d);
        kernels::matmul(a.data(), L.wk.data(), lc.k.data(), rows, d, d);
        kernels::add_bias_rows(lc.k.data(), L.bk.data(), rows, d);
        kernels::matmul(a.data(), L.wv.data(), lc.v.data(), rows, d, d);
        kernels::add_bias_rows(lc.v.data(), L.bv.data(), rows, d);

        lc.probs.assign(static_cast<size_t>(B) * c * l * l, 0.0);
        if (use_attn_drop) lc.attn_dropmask = make_dropmask(drop_rng, lc.probs.size(), rate);

        lc.ctx = Mat(rows, d);
#pragma omp parallel for collapse(2) schedule(static)
        for (int b = 0; b < B; ++b) {
            for (int h = 0; h < c; ++h) {
                const size_t base = (static_cast<size_t>(b) * c + h) * l * l;
                double* probs = lc.probs.data() + base;
                const uint8_t* am = cache.attend_mask.data() + static_cast<size_t>(b) * l;
                // scores, masked softmax
                for (int i = 0; i < l; ++i) {
                    const double* qi = lc.q.row(b * l + i) + h * dh;
                    double* prow = probs + static_cast<size_t>(i) * l;
                    for (int j = 0; j < l; ++j) {
                        const double* kj = lc.k.row(b * l + j) + h * dh;
                        double s = 0.0;
                        for (int e = 0; e < dh; ++e) s += qi[e] * kj[e];
                        prow[j] = s * inv_sqrt_dh;
                    }
                }
                kernels::reference::softmax_rows_masked(probs, l, l, am);
                // context = (dropped) probs * V
                const double* dm =
                    lc.attn_dropmask.empty() ? nullptr : lc.attn_dropmask.data() + base;
                for (int i = 0; i < l; ++i) {
                    double* ci = lc.ctx.row(b * l + i) + h * dh;
                    for (int e = 0; e < dh; ++e) ci[e] = 0.0;
                    const double* prow = probs + static_cast<size_t>(i) * l;
                    const double* dmr = dm ? dm + static_cast<size_t>(i) * l : nullptr;
                    for (int j = 0; j < l; ++j) {
                        const double pij = dmr ? prow[j] * dmr[j] : prow[j];
                        if (pij == 0.0) continue;
                        const double* vj = lc.v.row(b * l + j) + h * dh;
                        for (int e = 0; e < dh; ++e) ci[e] += pij * vj[e];
                    }
                }
            }
        }

        Mat o(rows, d);
        kernels::matmul(lc.ctx.data(), L.wo.data(), o.data(), rows, d, d);
        kernels::add_bias_rows(o.data(), L.bo.data(), rows, d);
        if (use_hidden_drop) {
            lc.h1_dropmask = make_dropmask(drop_rng, o.size(), rate);
            apply_mask(o, lc.h1_dropmask);
        }

        lc.x_mid = Mat(rows, d);
#pragma omp parallel for schedule(static)
        for (int r = 0; r < rows; ++r)
            for (int j = 0; j < d; ++j) lc.x_mid.at(r, j) = x.at(r, j) + o.at(r, j);

        Mat bn;
        layernorm_rows(lc.x_mid, L.ln2_g, L.ln2_b, bn, lc.ln2_xhat, lc.ln2_rstd);

        lc.f1 = Mat(rows, cfg.ffn_dim);
        kernels::matmul(bn.data(), L.w1.data(), lc.f1.data(), rows, d, cfg.ffn_dim);
        kernels::add_bias_rows(lc.f1.data(), L.b1.data(), rows, cfg.ffn_dim);

        lc.gelu_out = Mat(rows, cfg.ffn_dim);
#pragma omp parallel for schedule(static)
        for (int r = 0; r < rows; ++r)
            for (int j = 0; j < cfg.ffn_dim; ++j) lc.gelu_out.at(r, j) = gelu(lc.f1.at(r, j));

        Mat f2(rows, d);
        kernels::matmul(lc.gelu_out.data(), L.w2.data(), f2.data(), rows, cfg.ffn_dim, d);
        kernels::add_bias_rows(f2.data(), L.b2.data(), rows, d);
        if (use_hidden_drop) {
            lc.h2_dropmask = make_dropmask(drop_rng, f2.size(), rate);
            apply_mask(f2, lc.h2_dropmask);
        }

        Mat x_out(rows, d);
#pragma omp parallel for schedule(static)
        for (int r = 0; r < rows; ++r)
            for (int j = 0; j < d; ++j) x_out.at(r, j) = lc.x_mid.at(r, j) + f2.at(r, j);

        cache.hidden.push_back(x_out);
        x = std::move(x_out);
    }

    // Classifier head over the [CLS] position through the final layernorm.
    Mat cls_rows(B, d);
    for (int b = 0; b < B; ++b)
        std::copy_n(cache.hidden.back().row(b * l), d, cls_rows.row(b));
    layernorm_rows(cls_rows, p.lnf_g, p.lnf_b, cache.cls_y, cache.lnf_xhat, cache.lnf_rstd);

    cache.logits = Mat(B, cfg.num_classes);
    kernels::matmul(cache.cls_y.data(), p.w_cls.data(), cache.logits.data(), B, d,
                    cfg.num_classes);
    kernels::add_bias_rows(cache.logits.data(), p.b_cls.data(), B, cfg.num_classes);
    return cache;
}

ForwardTrace trace_from_cache(const BatchCache& cache, const ModelParams& p, int sample) {
    const ModelConfig& cfg = p.cfg;
    const int l = cfg.max_len, d = cfg.hidden_dim, c = cfg.num_heads;
    ForwardTrace tr;
    tr.attentions.reserve(cfg.num_layers);
    for (int n = 0; n < cfg.num_layers; ++n) {
        AttentionTensor at(c, l);
        const size_t base = static_cast<size_t>(sample) * c * l * l;
        std::copy_n(cache.layers[n].probs.data() + base, at.v.size(), at.v.data());
        tr.attentions.push_back(std::move(at));
    }
    tr.hidden_states.reserve(cfg.num_layers + 1);
    for (const Mat& h : cache.hidden) {
        Mat m(l, d);
        std::copy_n(h.row(sample * l), static_cast<size_t>(l) * d, m.data());
        tr.hidden_states.push_back(std::move(m));
    }
    tr.cls_vector.assign(cache.hidden.back().row(sample * l),
                         cache.hidden.back().row(sample * l) + d);
    tr.logits.assign(cache.logits.row(sample), cache.logits.row(sample) + cfg.num_classes);
    return tr;
}

std::vector<ForwardTrace> forward(const ModelParams& p,
                                  const std::vector<std::vector<int>>& ids_batch, bool train_mode,
                                  uint64_t dropout_seed) {
    DropoutSpec drop;
    drop.hidden = train_mode;
    drop.attention = train_mode;
    drop.seed = dropout_seed;
    BatchCache cache = forward_batch(p, ids_batch, drop);
    std::vector<ForwardTrace> out;
    out.reserve(ids_batch.size());
    for (int b = 0; b < static_cast<int>(ids_batch.size()); ++b)
        out.push_back(trace_from_cache(cache, p, b));
    return out;
}

double cross_entropy(const Mat& logits, const std::vector<int>& labels, Mat* d_logits) {
    const int B = logits.rows, C = logits.cols;
    if (static_cast<int>(labels.size()) != B)
        throw std::invalid_argument("cross_entropy: label count mismatch");
    if (d_logits) *d_logits = Mat(B, C);
    double total = 0.0;
    for (int b = 0; b < B; ++b) {
        const double* z = logits.row(b);
        if (labels[b] < 0 || labels[b] >= C)
            throw std::invalid_argument("cross_entropy: label out of range");
        double mx = z[0];
        for (int j = 1; j < C; ++j) mx = std::max(mx, z[j]);
        double sum = 0.0;
        for (int j = 0; j < C; ++j) sum += std::exp(z[j] - mx);
        const double logsum = std::log(sum) + mx;
        total += logsum - z[labels[b]];
        if (d_logits) {
            double* g = d_logits->row(b);
            for (int j = 0; j < C; ++j) {
                const double pj = std::exp(z[j] - logsum);
                g[j] = (pj - (j == labels[b] ? 1.0 : 0.0)) / B;
            }
        }
    }
    return total / B;
}

int predict_label(const ModelParams& p, const std::string& text, const SubwordVocab& v) {
    auto ids = encode(v, text, p.cfg.max_len);
    BatchCache cache = forward_batch(p, {ids}, DropoutSpec{});
    const double* z = cache.logits.row(0);
    int best = 0;
    for (int j = 1; j < p.cfg.num_classes; ++j)
        if (z[j] > z[best]) best = j;
    return best;
}

std::vector<std::vector<int>> encode_dataset(const SubwordVocab& v, const LabeledDataset& d,
                                             int max_len) {
    std::vector<std::vector<int>> out;
    out.reserve(d.size());
    for (const auto& s : d.samples) out.push_back(encode(v, s.text, max_len));
    return out;
}

}  // namespace mbtsad
