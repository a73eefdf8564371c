#include "foval/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "foval/error.hpp"

#include <nlohmann/json.hpp>

namespace foval {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

// dELU/dx recovered from the activation value: y > 0 means the linear branch.
double elu_grad_from_value(double y) { return y > 0.0 ? 1.0 : y + 1.0; }

void fill_uniform(Rng& rng, std::span<double> out, double bound) {
    for (double& v : out) v = rng.uniform(-bound, bound);
}

std::vector<double> colsum(const Matrix& m) {
    std::vector<double> s(static_cast<std::size_t>(m.cols), 0.0);
    for (int r = 0; r < m.rows; ++r) {
        const double* row = m.row(r);
        for (int c = 0; c < m.cols; ++c) s[static_cast<std::size_t>(c)] += row[c];
    }
    return s;
}

} // namespace

ModelConfig ModelConfig::toy() {
    ModelConfig c;
    c.hidden_dim = 64;
    c.fc1_dim = 96;
    c.fc2_dim = 48;
    return c;
}

ModelConfig ModelConfig::paper() {
    ModelConfig c;
    c.hidden_dim = 1435;
    c.fc1_dim = 1763;
    c.fc2_dim = 440;
    return c;
}

void ModelConfig::validate() const {
    if (input_dim < 1 || hidden_dim < 1 || fc1_dim < 1 || fc2_dim < 1)
        throw ConfigError("model dimensions must be >= 1");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("dropout_p must be in [0, 1)");
    if (seq_len < 1) throw ConfigError("seq_len must be >= 1");
}

ModelParams ModelParams::zeros_like(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    p.cfg = cfg;
    const int H = cfg.hidden_dim;
    p.w_ih = Matrix(4 * H, cfg.input_dim);
    p.w_hh = Matrix(4 * H, H);
    p.b_gate.assign(static_cast<std::size_t>(4 * H), 0.0);
    p.bn_gamma.assign(static_cast<std::size_t>(H), 0.0);
    p.bn_beta.assign(static_cast<std::size_t>(H), 0.0);
    p.bn_run_mean.assign(static_cast<std::size_t>(H), 0.0);
    p.bn_run_var.assign(static_cast<std::size_t>(H), 0.0);
    p.w_fc1 = Matrix(cfg.fc1_dim, H);
    p.b_fc1.assign(static_cast<std::size_t>(cfg.fc1_dim), 0.0);
    p.w_fc2 = Matrix(cfg.fc2_dim, cfg.fc1_dim);
    p.b_fc2.assign(static_cast<std::size_t>(cfg.fc2_dim), 0.0);
    p.w_head = Matrix(1, cfg.fc2_dim);
    p.b_head.assign(1, 0.0);
    return p;
}

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
    ModelParams p = zeros_like(cfg);
    const int H = cfg.hidden_dim;
    fill_uniform(rng, p.w_ih.data, 1.0 / std::sqrt(static_cast<double>(cfg.input_dim)));
    fill_uniform(rng, p.w_hh.data, 1.0 / std::sqrt(static_cast<double>(H)));
    // Forget-gate bias starts at +1 so early training does not flush memory.
    std::fill_n(p.b_gate.begin() + H, H, 1.0);
    std::fill(p.bn_gamma.begin(), p.bn_gamma.end(), 1.0);
    std::fill(p.bn_run_var.begin(), p.bn_run_var.end(), 1.0);
    fill_uniform(rng, p.w_fc1.data, 1.0 / std::sqrt(static_cast<double>(H)));
    fill_uniform(rng, p.w_fc2.data, 1.0 / std::sqrt(static_cast<double>(cfg.fc1_dim)));
    fill_uniform(rng, p.w_head.data, 1.0 / std::sqrt(static_cast<double>(cfg.fc2_dim)));
    return p;
}

std::vector<TensorRef> ModelParams::trainable() {
    return {
        {"lstm.w_ih", w_ih.data.data(), w_ih.size()},
        {"lstm.w_hh", w_hh.data.data(), w_hh.size()},
        {"lstm.b", b_gate.data(), b_gate.size()},
        {"bn.gamma", bn_gamma.data(), bn_gamma.size()},
        {"bn.beta", bn_beta.data(), bn_beta.size()},
        {"fc1.w", w_fc1.data.data(), w_fc1.size()},
        {"fc1.b", b_fc1.data(), b_fc1.size()},
        {"fc2.w", w_fc2.data.data(), w_fc2.size()},
        {"fc2.b", b_fc2.data(), b_fc2.size()},
        {"head.w", w_head.data.data(), w_head.size()},
        {"head.b", b_head.data(), b_head.size()},
    };
}

std::vector<TensorRef> ModelParams::buffers() {
    return {
        {"bn.run_mean", bn_run_mean.data(), bn_run_mean.size()},
        {"bn.run_var", bn_run_var.data(), bn_run_var.size()},
    };
}

std::vector<TensorRef> ModelParams::all_state() {
    auto refs = trainable();
    for (auto& b : buffers()) refs.push_back(b);
    return refs;
}

std::vector<double> lstm_forward(const ModelParams& p, std::span<const double> batch, int batch_size,
                                 ForwardCache* cache) {
    const int D = p.cfg.input_dim;
    const int H = p.cfg.hidden_dim;
    const int L = p.cfg.seq_len;
    const std::size_t expected =
        static_cast<std::size_t>(batch_size) * static_cast<std::size_t>(L) * static_cast<std::size_t>(D);
    if (batch_size < 1 || batch.size() != expected)
        throw ShapeMismatch("lstm_forward: batch of " + std::to_string(batch.size()) +
                            " doubles, expected " + std::to_string(expected));

    std::vector<double> out(static_cast<std::size_t>(batch_size) * static_cast<std::size_t>(L) *
                            static_cast<std::size_t>(H));
    if (cache) {
        cache->h.assign(static_cast<std::size_t>(L), Matrix());
        cache->c.assign(static_cast<std::size_t>(L), Matrix());
        cache->gi.assign(static_cast<std::size_t>(L), Matrix());
        cache->gf.assign(static_cast<std::size_t>(L), Matrix());
        cache->gg.assign(static_cast<std::size_t>(L), Matrix());
        cache->go.assign(static_cast<std::size_t>(L), Matrix());
    }

    Matrix x_t(batch_size, D);
    Matrix h_prev(batch_size, H);
    Matrix c_prev(batch_size, H);
    Matrix acts(batch_size, 4 * H);

    for (int t = 0; t < L; ++t) {
        for (int b = 0; b < batch_size; ++b) {
            const double* src = batch.data() +
                                (static_cast<std::size_t>(b) * static_cast<std::size_t>(L) +
                                 static_cast<std::size_t>(t)) *
                                    static_cast<std::size_t>(D);
            std::copy_n(src, D, x_t.row(b));
        }
        gemm_nt(acts, x_t, p.w_ih, false);
        gemm_nt(acts, h_prev, p.w_hh, true);

        Matrix i_g(batch_size, H), f_g(batch_size, H), g_g(batch_size, H), o_g(batch_size, H);
        Matrix h_t(batch_size, H), c_t(batch_size, H);
        for (int b = 0; b < batch_size; ++b) {
            const double* a = acts.row(b);
            const double* cp = c_prev.row(b);
            double* ib = i_g.row(b);
            double* fb = f_g.row(b);
            double* gb = g_g.row(b);
            double* ob = o_g.row(b);
            double* cb = c_t.row(b);
            double* hb = h_t.row(b);
            for (int k = 0; k < H; ++k) {
                const double iv = sigmoid(a[k] + p.b_gate[static_cast<std::size_t>(k)]);
                const double fv = sigmoid(a[H + k] + p.b_gate[static_cast<std::size_t>(H + k)]);
                const double gv = std::tanh(a[2 * H + k] + p.b_gate[static_cast<std::size_t>(2 * H + k)]);
                const double ov = sigmoid(a[3 * H + k] + p.b_gate[static_cast<std::size_t>(3 * H + k)]);
                const double cv = fv * cp[k] + iv * gv;
                ib[k] = iv;
                fb[k] = fv;
                gb[k] = gv;
                ob[k] = ov;
                cb[k] = cv;
                hb[k] = ov * std::tanh(cv);
            }
            std::copy_n(hb, H,
                        out.data() + (static_cast<std::size_t>(b) * static_cast<std::size_t>(L) +
                                      static_cast<std::size_t>(t)) *
                                         static_cast<std::size_t>(H));
        }
        h_prev = h_t;
        c_prev = c_t;
        if (cache) {
            const auto ut = static_cast<std::size_t>(t);
            cache->h[ut] = std::move(h_t);
            cache->c[ut] = std::move(c_t);
            cache->gi[ut] = std::move(i_g);
            cache->gf[ut] = std::move(f_g);
            cache->gg[ut] = std::move(g_g);
            cache->go[ut] = std::move(o_g);
        }
    }
    return out;
}

std::vector<double> batchnorm(std::span<const double> x, int batch_size, int seq_len, int channels,
                              std::span<const double> gamma, std::span<const double> beta,
                              std::vector<double>& run_mean, std::vector<double>& run_var, Mode mode,
                              BnCache* cache) {
    const std::size_t n_rows = static_cast<std::size_t>(batch_size) * static_cast<std::size_t>(seq_len);
    const auto H = static_cast<std::size_t>(channels);
    if (x.size() != n_rows * H) throw ShapeMismatch("batchnorm input");
    if (gamma.size() != H || beta.size() != H || run_mean.size() != H || run_var.size() != H)
        throw ShapeMismatch("batchnorm parameters");

    std::vector<double> out(x.size());
    if (mode == Mode::infer) {
        for (std::size_t h = 0; h < H; ++h) {
            const double invstd = 1.0 / std::sqrt(run_var[h] + kBnEps);
            const double mu = run_mean[h];
            for (std::size_t r = 0; r < n_rows; ++r)
                out[r * H + h] = gamma[h] * (x[r * H + h] - mu) * invstd + beta[h];
        }
        return out;
    }

    if (n_rows < 2) throw InsufficientBatch("batch norm needs batch*seq_len >= 2 in train mode");

    std::vector<double> mean(H, 0.0), var(H, 0.0), invstd(H, 0.0);
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t h = 0; h < H; ++h) mean[h] += x[r * H + h];
    const auto n = static_cast<double>(n_rows);
    for (std::size_t h = 0; h < H; ++h) mean[h] /= n;
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t h = 0; h < H; ++h) {
            const double d = x[r * H + h] - mean[h];
            var[h] += d * d;
        }
    for (std::size_t h = 0; h < H; ++h) {
        var[h] /= n;
        invstd[h] = 1.0 / std::sqrt(var[h] + kBnEps);
    }

    std::vector<double> xhat(x.size());
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t h = 0; h < H; ++h) {
            const double xh = (x[r * H + h] - mean[h]) * invstd[h];
            xhat[r * H + h] = xh;
            out[r * H + h] = gamma[h] * xh + beta[h];
        }

    // Running estimate uses the unbiased variance.
    const double unbias = (n_rows > 1) ? n / (n - 1.0) : 1.0;
    for (std::size_t h = 0; h < H; ++h) {
        run_mean[h] = (1.0 - kBnMomentum) * run_mean[h] + kBnMomentum * mean[h];
        run_var[h] = (1.0 - kBnMomentum) * run_var[h] + kBnMomentum * var[h] * unbias;
    }

    if (cache) {
        cache->xhat = std::move(xhat);
        cache->invstd = std::move(invstd);
        cache->mean = std::move(mean);
        cache->var = std::move(var);
    }
    return out;
}

std::vector<double> maxpool_time(std::span<const double> x, int batch_size, int seq_len, int channels,
                                 std::vector<int>* argmax) {
    const auto L = static_cast<std::size_t>(seq_len);
    const auto H = static_cast<std::size_t>(channels);
    const auto B = static_cast<std::size_t>(batch_size);
    if (x.size() != B * L * H) throw ShapeMismatch("maxpool_time input");
    std::vector<double> out(B * H);
    if (argmax) argmax->assign(B * H, 0);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t h = 0; h < H; ++h) {
            double best = x[(b * L) * H + h];
            int best_t = 0;
            for (std::size_t t = 1; t < L; ++t) {
                const double v = x[(b * L + t) * H + h];
                if (v > best) { // strict '>' keeps the earliest tied timestep
                    best = v;
                    best_t = static_cast<int>(t);
                }
            }
            out[b * H + h] = best;
            if (argmax) (*argmax)[b * H + h] = best_t;
        }
    return out;
}

std::vector<double> forward(const ModelParams& p, std::span<const double> batch, int batch_size,
                            Mode mode, ForwardCache* cache, Rng* dropout_rng) {
    p.cfg.validate();
    const int H = p.cfg.hidden_dim;
    const int L = p.cfg.seq_len;
    const auto B = static_cast<std::size_t>(batch_size);

    ForwardCache local;
    ForwardCache& cc = cache ? *cache : local;
    const bool want_backward = (mode == Mode::train);
    cc.batch = batch_size;
    cc.seq_len = L;
    cc.mode = mode;
    if (want_backward) cc.inputs.assign(batch.begin(), batch.end());

    const auto hidden = lstm_forward(p, batch, batch_size, want_backward ? &cc : nullptr);

    std::vector<double> normed;
    if (mode == Mode::train) {
        // Running buffers are left untouched here; update_running_stats folds
        // the cached batch statistics in after the optimizer step.
        std::vector<double> scratch_mean = p.bn_run_mean;
        std::vector<double> scratch_var = p.bn_run_var;
        BnCache bn;
        normed = batchnorm(hidden, batch_size, L, H, p.bn_gamma, p.bn_beta, scratch_mean, scratch_var,
                           Mode::train, &bn);
        cc.bn_xhat = std::move(bn.xhat);
        cc.bn_invstd = std::move(bn.invstd);
        cc.bn_mean = std::move(bn.mean);
        cc.bn_var = std::move(bn.var);
    } else {
        auto run_mean = p.bn_run_mean;
        auto run_var = p.bn_run_var;
        normed = batchnorm(hidden, batch_size, L, H, p.bn_gamma, p.bn_beta, run_mean, run_var, Mode::infer);
    }

    auto pooled = maxpool_time(normed, batch_size, L, H, &cc.pool_argmax);

    // Inverted dropout: the kept units are pre-scaled so inference is a no-op.
    std::vector<double> dropped = pooled;
    cc.dropout_mask.assign(B * static_cast<std::size_t>(H), 1.0);
    if (mode == Mode::train && p.cfg.dropout_p > 0.0) {
        if (!dropout_rng) throw Error("train-mode forward with dropout_p > 0 needs an rng");
        const double keep_scale = 1.0 / (1.0 - p.cfg.dropout_p);
        for (std::size_t i = 0; i < dropped.size(); ++i) {
            const bool drop = dropout_rng->uniform() < p.cfg.dropout_p;
            cc.dropout_mask[i] = drop ? 0.0 : keep_scale;
            dropped[i] *= cc.dropout_mask[i];
        }
    }
    cc.pooled = std::move(pooled);

    auto dense = [&](const Matrix& w, const std::vector<double>& bias, const std::vector<double>& in,
                     bool apply_elu) {
        Matrix x_m(batch_size, w.cols);
        std::copy(in.begin(), in.end(), x_m.data.begin());
        Matrix y(batch_size, w.rows);
        gemm_nt(y, x_m, w, false);
        for (int b = 0; b < batch_size; ++b) {
            double* row = y.row(b);
            for (int j = 0; j < w.rows; ++j) {
                row[j] += bias[static_cast<std::size_t>(j)];
                if (apply_elu) row[j] = elu(row[j]);
            }
        }
        return y.data;
    };

    cc.a1 = dense(p.w_fc1, p.b_fc1, dropped, true);
    cc.a2 = dense(p.w_fc2, p.b_fc2, cc.a1, true);
    cc.preds = dense(p.w_head, p.b_head, cc.a2, false);
    cc.dropped = std::move(dropped);
    return cc.preds;
}

void update_running_stats(ModelParams& p, const ForwardCache& cache, double momentum) {
    const auto H = static_cast<std::size_t>(p.cfg.hidden_dim);
    if (cache.bn_mean.size() != H || cache.bn_var.size() != H)
        throw ShapeMismatch("update_running_stats: cache has no batch statistics");
    const double n = static_cast<double>(cache.batch) * static_cast<double>(cache.seq_len);
    const double unbias = (n > 1.0) ? n / (n - 1.0) : 1.0;
    for (std::size_t h = 0; h < H; ++h) {
        p.bn_run_mean[h] = (1.0 - momentum) * p.bn_run_mean[h] + momentum * cache.bn_mean[h];
        p.bn_run_var[h] = (1.0 - momentum) * p.bn_run_var[h] + momentum * cache.bn_var[h] * unbias;
    }
}

double smooth_l1(std::span<const double> preds, std::span<const double> targets, double beta) {
    if (preds.size() != targets.size()) throw LengthMismatch(preds.size(), targets.size());
    if (preds.empty()) throw EmptyInput("smooth_l1");
    if (!(beta > 0.0)) throw ConfigError("smooth_l1 beta must be > 0");
    double total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double d = std::abs(preds[i] - targets[i]);
        total += (d < beta) ? 0.5 * d * d / beta : d - 0.5 * beta;
    }
    return total / static_cast<double>(preds.size());
}

std::vector<double> smooth_l1_grad(std::span<const double> preds, std::span<const double> targets,
                                   double beta) {
    if (preds.size() != targets.size()) throw LengthMismatch(preds.size(), targets.size());
    if (preds.empty()) throw EmptyInput("smooth_l1_grad");
    if (!(beta > 0.0)) throw ConfigError("smooth_l1 beta must be > 0");
    std::vector<double> g(preds.size());
    const double inv_n = 1.0 / static_cast<double>(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double d = preds[i] - targets[i];
        g[i] = inv_n * ((std::abs(d) < beta) ? d / beta : (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)));
    }
    return g;
}

ModelParams backward(const ModelParams& p, const ForwardCache& cache, std::span<const double> dpreds) {
    if (cache.mode != Mode::train) throw Error("backward requires a train-mode forward cache");
    const int B = cache.batch;
    const int L = cache.seq_len;
    const int H = p.cfg.hidden_dim;
    const int D = p.cfg.input_dim;
    if (dpreds.size() != static_cast<std::size_t>(B)) throw ShapeMismatch("backward dpreds");

    ModelParams g = ModelParams::zeros_like(p.cfg);

    // ---- head ----
    Matrix d_head(B, 1);
    for (int b = 0; b < B; ++b) d_head.at(b, 0) = dpreds[static_cast<std::size_t>(b)];
    Matrix a2_m(B, p.cfg.fc2_dim);
    std::copy(cache.a2.begin(), cache.a2.end(), a2_m.data.begin());
    gemm_tn(g.w_head, d_head, a2_m, false);
    g.b_head[0] = colsum(d_head)[0];

    Matrix d_a2(B, p.cfg.fc2_dim);
    gemm_nn(d_a2, d_head, p.w_head, false);

    // ---- fc2 (ELU) ----
    for (int b = 0; b < B; ++b) {
        double* row = d_a2.row(b);
        const double* a = cache.a2.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(p.cfg.fc2_dim);
        for (int j = 0; j < p.cfg.fc2_dim; ++j) row[j] *= elu_grad_from_value(a[j]);
    }
    Matrix a1_m(B, p.cfg.fc1_dim);
    std::copy(cache.a1.begin(), cache.a1.end(), a1_m.data.begin());
    gemm_tn(g.w_fc2, d_a2, a1_m, false);
    {
        auto s = colsum(d_a2);
        std::copy(s.begin(), s.end(), g.b_fc2.begin());
    }
    Matrix d_a1(B, p.cfg.fc1_dim);
    gemm_nn(d_a1, d_a2, p.w_fc2, false);

    // ---- fc1 (ELU) ----
    for (int b = 0; b < B; ++b) {
        double* row = d_a1.row(b);
        const double* a = cache.a1.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(p.cfg.fc1_dim);
        for (int j = 0; j < p.cfg.fc1_dim; ++j) row[j] *= elu_grad_from_value(a[j]);
    }
    Matrix dropped_m(B, H);
    std::copy(cache.dropped.begin(), cache.dropped.end(), dropped_m.data.begin());
    gemm_tn(g.w_fc1, d_a1, dropped_m, false);
    {
        auto s = colsum(d_a1);
        std::copy(s.begin(), s.end(), g.b_fc1.begin());
    }
    Matrix d_dropped(B, H);
    gemm_nn(d_dropped, d_a1, p.w_fc1, false);

    // ---- dropout, pool ----
    const auto uH = static_cast<std::size_t>(H);
    std::vector<double> d_norm(static_cast<std::size_t>(B) * static_cast<std::size_t>(L) * uH, 0.0);
    for (int b = 0; b < B; ++b)
        for (int h = 0; h < H; ++h) {
            const std::size_t bh = static_cast<std::size_t>(b) * uH + static_cast<std::size_t>(h);
            const double dp = d_dropped.at(b, h) * cache.dropout_mask[bh];
            const int t = cache.pool_argmax[bh];
            d_norm[(static_cast<std::size_t>(b) * static_cast<std::size_t>(L) +
                    static_cast<std::size_t>(t)) *
                       uH +
                   static_cast<std::size_t>(h)] += dp;
        }

    // ---- batch norm ----
    const std::size_t n_rows = static_cast<std::size_t>(B) * static_cast<std::size_t>(L);
    const double n = static_cast<double>(n_rows);
    std::vector<double> sum_dy(uH, 0.0), sum_dy_xhat(uH, 0.0);
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t h = 0; h < uH; ++h) {
            const double dy = d_norm[r * uH + h];
            sum_dy[h] += dy;
            sum_dy_xhat[h] += dy * cache.bn_xhat[r * uH + h];
        }
    for (std::size_t h = 0; h < uH; ++h) {
        g.bn_gamma[h] = sum_dy_xhat[h];
        g.bn_beta[h] = sum_dy[h];
    }
    std::vector<double> d_hidden(d_norm.size());
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t h = 0; h < uH; ++h) {
            const double dy = d_norm[r * uH + h];
            d_hidden[r * uH + h] =
                p.bn_gamma[h] * cache.bn_invstd[h] *
                (dy - sum_dy[h] / n - cache.bn_xhat[r * uH + h] * sum_dy_xhat[h] / n);
        }

    // ---- LSTM backward through time ----
    Matrix dh_rec(B, H), dc_rec(B, H);
    Matrix x_t(B, D), d_acts(B, 4 * H);
    for (int t = L - 1; t >= 0; --t) {
        const auto ut = static_cast<std::size_t>(t);
        const Matrix& i_g = cache.gi[ut];
        const Matrix& f_g = cache.gf[ut];
        const Matrix& g_g = cache.gg[ut];
        const Matrix& o_g = cache.go[ut];
        const Matrix& c_t = cache.c[ut];
        const Matrix* c_prev = (t > 0) ? &cache.c[ut - 1] : nullptr;

        for (int b = 0; b < B; ++b) {
            const double* dh_ext =
                d_hidden.data() +
                (static_cast<std::size_t>(b) * static_cast<std::size_t>(L) + ut) * uH;
            double* dhr = dh_rec.row(b);
            double* dcr = dc_rec.row(b);
            double* da = d_acts.row(b);
            const double* iv = i_g.row(b);
            const double* fv = f_g.row(b);
            const double* gv = g_g.row(b);
            const double* ov = o_g.row(b);
            const double* cv = c_t.row(b);
            const double* cp = c_prev ? c_prev->row(b) : nullptr;
            for (int k = 0; k < H; ++k) {
                const double dh = dh_ext[k] + dhr[k];
                const double tc = std::tanh(cv[k]);
                const double d_o = dh * tc;
                const double dc = dh * ov[k] * (1.0 - tc * tc) + dcr[k];
                const double cprev = cp ? cp[k] : 0.0;
                const double d_i = dc * gv[k];
                const double d_f = dc * cprev;
                const double d_g = dc * iv[k];
                da[k] = d_i * iv[k] * (1.0 - iv[k]);
                da[H + k] = d_f * fv[k] * (1.0 - fv[k]);
                da[2 * H + k] = d_g * (1.0 - gv[k] * gv[k]);
                da[3 * H + k] = d_o * ov[k] * (1.0 - ov[k]);
                dcr[k] = dc * fv[k];
            }
        }

        for (int b = 0; b < B; ++b) {
            const double* src = cache.inputs.data() +
                                (static_cast<std::size_t>(b) * static_cast<std::size_t>(L) + ut) *
                                    static_cast<std::size_t>(D);
            std::copy_n(src, D, x_t.row(b));
        }
        gemm_tn(g.w_ih, d_acts, x_t, true);
        if (t > 0) gemm_tn(g.w_hh, d_acts, cache.h[ut - 1], true);
        {
            auto s = colsum(d_acts);
            for (std::size_t k = 0; k < s.size(); ++k) g.b_gate[k] += s[k];
        }
        gemm_nn(dh_rec, d_acts, p.w_hh, false);
    }
    return g;
}

OptimState OptimState::init(ModelParams& params, double lr, double weight_decay) {
    OptimState s;
    s.lr = lr;
    s.weight_decay = weight_decay;
    for (const auto& t : params.trainable()) {
        s.m.emplace_back(t.size, 0.0);
        s.v.emplace_back(t.size, 0.0);
    }
    return s;
}

void adamw_step(ModelParams& params, ModelParams& grads, OptimState& state) {
    auto p_refs = params.trainable();
    auto g_refs = grads.trainable();
    if (state.m.size() != p_refs.size()) throw ShapeMismatch("optimizer state tensor count");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    const double decay = 1.0 - state.lr * state.weight_decay;

    for (std::size_t ti = 0; ti < p_refs.size(); ++ti) {
        double* w = p_refs[ti].data;
        const double* gr = g_refs[ti].data;
        auto& m = state.m[ti];
        auto& v = state.v[ti];
        if (m.size() != p_refs[ti].size) throw ShapeMismatch("optimizer moment size");
        for (std::size_t i = 0; i < p_refs[ti].size; ++i) {
            w[i] *= decay; // decoupled weight decay
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gr[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gr[i] * gr[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            w[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

void save_checkpoint(const std::string& path, ModelParams& params, const std::string& manifest_hash) {
    nlohmann::ordered_json header;
    header["version"] = 1;
    header["config"] = {{"input_dim", params.cfg.input_dim},   {"hidden_dim", params.cfg.hidden_dim},
                        {"fc1_dim", params.cfg.fc1_dim},       {"fc2_dim", params.cfg.fc2_dim},
                        {"dropout_p", params.cfg.dropout_p},   {"seq_len", params.cfg.seq_len}};
    header["manifest_hash"] = manifest_hash;
    auto tensors = nlohmann::ordered_json::array();
    for (const auto& t : params.all_state())
        tensors.push_back({{"name", t.name}, {"size", t.size}});
    header["tensors"] = tensors;
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open '" + path + "' for writing");
    out.write("FOVALCKP", 8);
    const auto len = static_cast<std::uint64_t>(head.size());
    char len_bytes[8];
    for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<char>((len >> (8 * i)) & 0xff);
    out.write(len_bytes, 8);
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& t : params.all_state())
        out.write(reinterpret_cast<const char*>(t.data),
                  static_cast<std::streamsize>(t.size * sizeof(double)));
    if (!out) throw IoFailure("write to '" + path + "' failed");
}

ModelParams load_checkpoint(const std::string& path, std::string* manifest_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open '" + path + "' for reading");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "FOVALCKP", 8) != 0)
        throw Error("'" + path + "' is not a checkpoint file");
    char len_bytes[8];
    in.read(len_bytes, 8);
    if (!in) throw IoFailure("truncated checkpoint header");
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i)
        len |= static_cast<std::uint64_t>(static_cast<unsigned char>(len_bytes[i])) << (8 * i);
    std::string head(len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(len));
    if (!in) throw IoFailure("truncated checkpoint header");

    const auto header = nlohmann::json::parse(head);
    ModelConfig cfg;
    cfg.input_dim = header.at("config").at("input_dim").get<int>();
    cfg.hidden_dim = header.at("config").at("hidden_dim").get<int>();
    cfg.fc1_dim = header.at("config").at("fc1_dim").get<int>();
    cfg.fc2_dim = header.at("config").at("fc2_dim").get<int>();
    cfg.dropout_p = header.at("config").at("dropout_p").get<double>();
    cfg.seq_len = header.at("config").at("seq_len").get<int>();
    if (manifest_hash) *manifest_hash = header.at("manifest_hash").get<std::string>();

    ModelParams params = ModelParams::zeros_like(cfg);
    auto refs = params.all_state();
    const auto& tensors = header.at("tensors");
    if (tensors.size() != refs.size()) throw Error("checkpoint tensor count mismatch");
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const auto& t = tensors.at(i);
        if (t.at("name").get<std::string>() != refs[i].name ||
            t.at("size").get<std::size_t>() != refs[i].size)
            throw Error("checkpoint tensor layout mismatch at '" + std::string(refs[i].name) + "'");
        in.read(reinterpret_cast<char*>(refs[i].data),
                static_cast<std::streamsize>(refs[i].size * sizeof(double)));
        if (!in) throw IoFailure("truncated checkpoint tensor data");
    }
    return params;
}

} // namespace foval
