#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "foval/features.hpp"
#include "foval/rng.hpp"
#include "foval/tensor.hpp"

namespace foval {

// Sequence-regression network: LSTM -> batch norm -> temporal max-pool ->
// dropout -> dense -> ELU -> dense -> ELU -> dense(1). All math is double
// precision with analytically derived gradients.

struct ModelConfig {
    int input_dim = kFeatureCount;
    int hidden_dim = 64;
    int fc1_dim = 96;
    int fc2_dim = 48;
    double dropout_p = 0.245;
    int seq_len = 10;

    static ModelConfig toy();   // desk-scale preset
    static ModelConfig paper(); // 1435 / 1763 / 440 full-scale preset
    void validate() const;      // throws ConfigError
};

enum class Mode { train, infer };

struct TensorRef {
    const char* name;
    double* data;
    std::size_t size;
};

struct ModelParams {
    ModelConfig cfg;

    // LSTM gate blocks stacked as [input; forget; cell; output] along rows.
    Matrix w_ih;                // [4H x D]
    Matrix w_hh;                // [4H x H]
    std::vector<double> b_gate; // [4H]

    std::vector<double> bn_gamma, bn_beta;        // [H], trainable
    std::vector<double> bn_run_mean, bn_run_var;  // [H], running buffers

    Matrix w_fc1;
    std::vector<double> b_fc1;
    Matrix w_fc2;
    std::vector<double> b_fc2;
    Matrix w_head; // [1 x fc2]
    std::vector<double> b_head;

    // Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases except
    // the forget-gate bias at +1, gamma 1 / beta 0, running stats (0, 1).
    static ModelParams init(const ModelConfig& cfg, Rng& rng);
    static ModelParams zeros_like(const ModelConfig& cfg);

    std::vector<TensorRef> trainable();
    std::vector<TensorRef> buffers();
    std::vector<TensorRef> all_state();
};

// Intermediate values of one training forward pass, kept for backward.
struct ForwardCache {
    int batch = 0;
    int seq_len = 0;
    Mode mode = Mode::train;
    std::vector<double> inputs; // [B x L x D]

    std::vector<Matrix> h, c, gi, gf, gg, go; // per timestep, [B x H]

    std::vector<double> bn_xhat;             // [B x L x H]
    std::vector<double> bn_mean, bn_var;     // [H] batch stats (biased var)
    std::vector<double> bn_invstd;           // [H]
    std::vector<int> pool_argmax;            // [B x H]
    std::vector<double> pooled;              // [B x H]
    std::vector<double> dropout_mask;        // [B x H], 0 or 1/(1-p)
    std::vector<double> dropped;             // [B x H]
    std::vector<double> a1, a2;              // post-ELU activations
    std::vector<double> preds;               // [B]
};

// All timestep hidden states of the LSTM, flattened [B x L x H]. Zero initial
// state. Fills the per-timestep cache when given. Throws ShapeMismatch.
std::vector<double> lstm_forward(const ModelParams& p, std::span<const double> batch, int batch_size,
                                 ForwardCache* cache = nullptr);

struct BnCache {
    std::vector<double> xhat, invstd, mean, var;
};

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;

// Per-channel normalization over batch x time. Train mode uses batch
// statistics and updates the running buffers (momentum 0.1, unbiased variance
// in the running estimate); infer mode uses the running buffers, so a batch
// of one is valid. Throws InsufficientBatch when B*L < 2 in train mode.
std::vector<double> batchnorm(std::span<const double> x, int batch_size, int seq_len, int channels,
                              std::span<const double> gamma, std::span<const double> beta,
                              std::vector<double>& run_mean, std::vector<double>& run_var, Mode mode,
                              BnCache* cache = nullptr);

// Per-channel maximum over the time axis, [B x L x H] -> [B x H]. Ties pick
// the earliest timestep; `argmax` (when given) records the winner for the
// gradient route.
std::vector<double> maxpool_time(std::span<const double> x, int batch_size, int seq_len, int channels,
                                 std::vector<int>* argmax = nullptr);

// Full model forward. Train mode requires `dropout_rng` when dropout_p > 0
// and does NOT touch the running batch-norm buffers; the training loop calls
// update_running_stats afterwards. Returns one prediction per batch row in
// scaled-target units.
std::vector<double> forward(const ModelParams& p, std::span<const double> batch, int batch_size,
                            Mode mode, ForwardCache* cache = nullptr, Rng* dropout_rng = nullptr);

// Folds the cached batch statistics into the running buffers.
void update_running_stats(ModelParams& p, const ForwardCache& cache, double momentum = kBnMomentum);

// Mean smooth-L1: 0.5 d^2 / beta for |d| < beta, |d| - 0.5 beta otherwise.
double smooth_l1(std::span<const double> preds, std::span<const double> targets, double beta);
std::vector<double> smooth_l1_grad(std::span<const double> preds, std::span<const double> targets,
                                   double beta);

// Exact reverse-mode gradients of the forward pass captured in `cache`,
// given dLoss/dpred. Returned in a ModelParams-shaped container (running
// buffers stay zero).
ModelParams backward(const ModelParams& p, const ForwardCache& cache, std::span<const double> dpreds);

struct OptimState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    std::int64_t step = 0;
    std::vector<std::vector<double>> m, v; // per trainable tensor

    static OptimState init(ModelParams& params, double lr, double weight_decay);
};

// Decoupled weight decay (param *= 1 - lr*wd) followed by the bias-corrected
// Adam update.
void adamw_step(ModelParams& params, ModelParams& grads, OptimState& state);

// Checkpoint: length-prefixed JSON header (config, tensor shapes, pipeline
// manifest hash) followed by raw little-endian float64 tensor data.
void save_checkpoint(const std::string& path, ModelParams& params, const std::string& manifest_hash);
ModelParams load_checkpoint(const std::string& path, std::string* manifest_hash = nullptr);

} // namespace foval
