#include <cmath>
#include <cstring>
#include <stdexcept>

#include "mbtsad/kernels.hpp"
#include "mbtsad/model.hpp"

namespace mbtsad {

namespace {

constexpr double kGeluK = 0.7978845608028654;  // sqrt(2/pi)

double gelu_grad(double x) {
    const double x3 = x * x * x;
    const double u = kGeluK * (x + 0.044715 * x3);
    const double t = std::tanh(u);
    const double du = kGeluK * (1.0 + 3.0 * 0.044715 * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

// dx for rows normalized as xhat = (x - mean) * rstd, y = g * xhat + b.
void layernorm_backward(const Mat& dy, const Mat& xhat, const std::vector<double>& rstd,
                        const std::vector<double>& g, Mat& dx, std::vector<double>& dg,
                        std::vector<double>& db) {
    const int rows = dy.rows, d = dy.cols;
    dx = Mat(rows, d);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const double* dyr = dy.row(r);
        const double* xh = xhat.row(r);
        double* dxr = dx.row(r);
        double m1 = 0.0, m2 = 0.0;  // mean(dxhat), mean(dxhat * xhat)
        for (int j = 0; j < d; ++j) {
            const double dxh = dyr[j] * g[j];
            m1 += dxh;
            m2 += dxh * xh[j];
        }
        m1 /= d;
        m2 /= d;
        const double rs = rstd[r];
        for (int j = 0; j < d; ++j) {
            const double dxh = dyr[j] * g[j];
            dxr[j] = rs * (dxh - m1 - xh[j] * m2);
        }
    }
    // dg[j] = sum_r dy * xhat, db[j] = sum_r dy
#pragma omp parallel for schedule(static)
    for (int j = 0; j < d; ++j) {
        double sg = 0.0, sb = 0.0;
        for (int r = 0; r < rows; ++r) {
            sg += dy.at(r, j) * xhat.at(r, j);
            sb += dy.at(r, j);
        }
        dg[j] += sg;
        db[j] += sb;
    }
}

void add_into(Mat& dst, const Mat& src) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < dst.rows; ++r) {
        double* a = dst.row(r);
        const double* b = src.row(r);
        for (int j = 0; j < dst.cols; ++j) a[j] += b[j];
    }
}

void mul_mask_into(Mat& x, const std::vector<double>& mask) {
    if (mask.empty()) return;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < x.rows; ++r) {
        double* xr = x.row(r);
        const double* mr = mask.data() + static_cast<size_t>(r) * x.cols;
        for (int j = 0; j < x.cols; ++j) xr[j] *= mr[j];
    }
}

// A = g * xhat + b, reconstructed from the cached normalized rows.
Mat ln_output(const Mat& xhat, const std::vector<double>& g, const std::vector<double>& b) {
    Mat out(xhat.rows, xhat.cols);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < xhat.rows; ++r) {
        const double* xh = xhat.row(r);
        double* o = out.row(r);
        for (int j = 0; j < xhat.cols; ++j) o[j] = g[j] * xh[j] + b[j];
    }
    return out;
}

void col_sums_into(const Mat& x, std::vector<double>& out) {
    std::vector<double> s(x.cols);
    kernels::col_sums(x.data(), x.rows, x.cols, s.data());
    for (int j = 0; j < x.cols; ++j) out[j] += s[j];
}

}  // namespace

ModelParams backward_batch(const ModelParams& p, const BatchCache& cache,
                           const LossInjections& inj) {
    const ModelConfig& cfg = p.cfg;
    const int B = cache.batch, l = cache.len, d = cfg.hidden_dim;
    const int c = cfg.num_heads, dh = cfg.head_dim(), f = cfg.ffn_dim;
    const int rows = B * l;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    if (inj.d_logits.rows != B || inj.d_logits.cols != cfg.num_classes)
        throw std::invalid_argument("backward_batch: d_logits shape mismatch");
    if (!inj.d_hidden.empty() && static_cast<int>(inj.d_hidden.size()) != cfg.num_layers + 1)
        throw std::invalid_argument("backward_batch: d_hidden must have num_layers+1 entries");
    if (!inj.d_probs.empty() && static_cast<int>(inj.d_probs.size()) != cfg.num_layers)
        throw std::invalid_argument("backward_batch: d_probs must have num_layers entries");

    ModelParams g = zeros_like(p);

    // Head: logits = LNf(cls rows) * w_cls + b_cls
    Mat d_cls_y(B, d);
    kernels::matmul_nt(inj.d_logits.data(), p.w_cls.data(), d_cls_y.data(), B, cfg.num_classes, d);
    kernels::matmul_tn(cache.cls_y.data(), inj.d_logits.data(), g.w_cls.data(), d, B,
                       cfg.num_classes);
    col_sums_into(inj.d_logits, g.b_cls);

    Mat d_cls_rows;
    layernorm_backward(d_cls_y, cache.lnf_xhat, cache.lnf_rstd, p.lnf_g, d_cls_rows, g.lnf_g,
                       g.lnf_b);

    Mat dx(rows, d);
    for (int b = 0; b < B; ++b) {
        double* dst = dx.row(b * l);
        const double* src = d_cls_rows.row(b);
        for (int j = 0; j < d; ++j) dst[j] += src[j];
    }
    if (!inj.d_hidden.empty()) add_into(dx, inj.d_hidden[cfg.num_layers]);

    for (int n = cfg.num_layers - 1; n >= 0; --n) {
        const LayerCache& lc = cache.layers[n];
        const LayerParams& L = p.layers[n];
        LayerParams& gL = g.layers[n];

        // FFN block: x_out = x_mid + drop(gelu(LN2(x_mid) W1 + b1) W2 + b2)
        Mat d_f2 = dx;  // branch through the ffn path
        mul_mask_into(d_f2, lc.h2_dropmask);

        Mat d_gelu(rows, f);
        kernels::matmul_nt(d_f2.data(), L.w2.data(), d_gelu.data(), rows, d, f);
        kernels::matmul_tn(lc.gelu_out.data(), d_f2.data(), gL.w2.v.data(), f, rows, d);
        col_sums_into(d_f2, gL.b2);

        Mat d_f1(rows, f);
#pragma omp parallel for schedule(static)
        for (int r = 0; r < rows; ++r)
            for (int j = 0; j < f; ++j)
                d_f1.at(r, j) = d_gelu.at(r, j) * gelu_grad(lc.f1.at(r, j));

        Mat bn = ln_output(lc.ln2_xhat, L.ln2_g, L.ln2_b);
        Mat d_bn(rows, d);
        kernels::matmul_nt(d_f1.data(), L.w1.data(), d_bn.data(), rows, f, d);
        kernels::matmul_tn(bn.data(), d_f1.data(), gL.w1.v.data(), d, rows, f);
        col_sums_into(d_f1, gL.b1);

        Mat d_xmid_ln;
        layernorm_backward(d_bn, lc.ln2_xhat, lc.ln2_rstd, L.ln2_g, d_xmid_ln, gL.ln2_g,
                           gL.ln2_b);
        Mat d_xmid = dx;  // residual branch
        add_into(d_xmid, d_xmid_ln);

        // Attention block: x_mid = x_in + drop(ctx Wo + bo)
        Mat d_o = d_xmid;
        mul_mask_into(d_o, lc.h1_dropmask);

        Mat d_ctx(rows, d);
        kernels::matmul_nt(d_o.data(), L.wo.data(), d_ctx.data(), rows, d, d);
        kernels::matmul_tn(lc.ctx.data(), d_o.data(), gL.wo.v.data(), d, rows, d);
        col_sums_into(d_o, gL.bo);

        Mat d_q(rows, d), d_k(rows, d), d_v(rows, d);
        const std::vector<double>* probs_inj = inj.d_probs.empty() ? nullptr : &inj.d_probs[n];
#pragma omp parallel for collapse(2) schedule(static)
        for (int b = 0; b < B; ++b) {
            for (int h = 0; h < c; ++h) {
                const size_t base = (static_cast<size_t>(b) * c + h) * l * l;
                const double* probs = lc.probs.data() + base;
                const double* dm =
                    lc.attn_dropmask.empty() ? nullptr : lc.attn_dropmask.data() + base;
                const double* pin = probs_inj ? probs_inj->data() + base : nullptr;
                std::vector<double> d_p(static_cast<size_t>(l) * l, 0.0);
                // through ctx: d_pd = d_ctx V^T, d_v = pd^T d_ctx
                for (int i = 0; i < l; ++i) {
                    const double* dci = d_ctx.row(b * l + i) + h * dh;
                    const double* prow = probs + static_cast<size_t>(i) * l;
                    const double* dmr = dm ? dm + static_cast<size_t>(i) * l : nullptr;
                    double* dpi = d_p.data() + static_cast<size_t>(i) * l;
                    for (int j = 0; j < l; ++j) {
                        const double* vj = lc.v.row(b * l + j) + h * dh;
                        double s = 0.0;
                        for (int e = 0; e < dh; ++e) s += dci[e] * vj[e];
                        const double scale = dmr ? dmr[j] : 1.0;
                        dpi[j] = s * scale;
                        const double pd = dmr ? prow[j] * dmr[j] : prow[j];
                        if (pd != 0.0) {
                            double* dvj = d_v.row(b * l + j) + h * dh;
                            for (int e = 0; e < dh; ++e) dvj[e] += pd * dci[e];
                        }
                    }
                }
                // injected gradient on the stored (pre-dropout) probabilities
                if (pin)
                    for (size_t t = 0; t < d_p.size(); ++t) d_p[t] += pin[t];
                // softmax backward, then scores back into q and k
                for (int i = 0; i < l; ++i) {
                    const double* prow = probs + static_cast<size_t>(i) * l;
                    double* dpi = d_p.data() + static_cast<size_t>(i) * l;
                    double dot = 0.0;
                    for (int j = 0; j < l; ++j) dot += prow[j] * dpi[j];
                    const double* qi = lc.q.row(b * l + i) + h * dh;
                    double* dqi = d_q.row(b * l + i) + h * dh;
                    for (int j = 0; j < l; ++j) {
                        const double ds = prow[j] * (dpi[j] - dot) * inv_sqrt_dh;
                        if (ds == 0.0) continue;
                        const double* kj = lc.k.row(b * l + j) + h * dh;
                        double* dkj = d_k.row(b * l + j) + h * dh;
                        for (int e = 0; e < dh; ++e) {
                            dqi[e] += ds * kj[e];
                            dkj[e] += ds * qi[e];
                        }
                    }
                }
            }
        }

        Mat a = ln_output(lc.ln1_xhat, L.ln1_g, L.ln1_b);
        Mat d_a(rows, d);
        kernels::matmul_nt(d_q.data(), L.wq.data(), d_a.data(), rows, d, d);
        Mat tmp(rows, d);
        kernels::matmul_nt(d_k.data(), L.wk.data(), tmp.data(), rows, d, d);
        add_into(d_a, tmp);
        kernels::matmul_nt(d_v.data(), L.wv.data(), tmp.data(), rows, d, d);
        add_into(d_a, tmp);

        kernels::matmul_tn(a.data(), d_q.data(), gL.wq.v.data(), d, rows, d);
        kernels::matmul_tn(a.data(), d_k.data(), gL.wk.v.data(), d, rows, d);
        kernels::matmul_tn(a.data(), d_v.data(), gL.wv.v.data(), d, rows, d);
        col_sums_into(d_q, gL.bq);
        col_sums_into(d_k, gL.bk);
        col_sums_into(d_v, gL.bv);

        Mat d_xin_ln;
        layernorm_backward(d_a, lc.ln1_xhat, lc.ln1_rstd, L.ln1_g, d_xin_ln, gL.ln1_g, gL.ln1_b);
        dx = std::move(d_xmid);
        add_into(dx, d_xin_ln);

        if (!inj.d_hidden.empty() && n > 0) add_into(dx, inj.d_hidden[n]);
    }

    if (!inj.d_hidden.empty()) add_into(dx, inj.d_hidden[0]);
    mul_mask_into(dx, cache.emb_dropmask);

    // Embedding scatter stays serial: rows may share a token id.
    for (int r = 0; r < rows; ++r) {
        const double* src = dx.row(r);
        double* te = g.tok_emb.row(cache.ids[r]);
        double* pe = g.pos_emb.row(r % l);
        for (int j = 0; j < d; ++j) {
            te[j] += src[j];
            pe[j] += src[j];
        }
    }
    return g;
}

}  // namespace mbtsad
