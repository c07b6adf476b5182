#pragma once

#include <cstdint>
#include <vector>

#include "medirl/common.hpp"

namespace medirl {

/// Per-patch reward network: shared-weight dense layers over each patch row
/// (the 1×1-convolution equivalent), ReLU, optional normalization after the
/// activation, scalar linear head.
struct NetConfig {
    int input_dim = 0;
    std::vector<int> hidden = {52, 34, 20, 20};
    bool batch_norm = true;

    void validate() const;
};

struct LayerParams {
    Matrix W;               // [in × out]
    std::vector<double> b;  // out
    // normalization (learnable scale/shift + running statistics)
    std::vector<double> bn_gamma, bn_beta;
    std::vector<double> bn_run_mean, bn_run_var;
};

struct RewardNetParams {
    NetConfig config;
    std::vector<LayerParams> layers;
    std::vector<double> head_w;
    double head_b = 0.0;

    /// Learnable parameter count (weights, biases, norm scale/shift).
    std::size_t param_count() const;
    bool all_finite() const;
};

struct NetGradients {
    std::vector<Matrix> dW;
    std::vector<std::vector<double>> db, dgamma, dbeta;
    std::vector<double> dhead_w;
    double dhead_b = 0.0;

    static NetGradients zeros_like(const RewardNetParams& p);
    void accumulate(const NetGradients& other, double scale = 1.0);
    void scale(double s);
    double l2_norm() const;
};

struct ForwardCache {
    bool train_mode = false;
    Matrix input;
    struct LayerCache {
        Matrix A;     // pre-activation
        Matrix H;     // post-ReLU (normalization input)
        Matrix Xhat;  // normalized activations (batch_norm only)
        Matrix Out;   // layer output (input of the next layer)
        std::vector<double> mu, var;
    };
    std::vector<LayerCache> layers;
};

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.99;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
    long step = 0;
    std::vector<std::vector<double>> m, v;  // one slot per parameter array

    static AdamState zeros_like(const RewardNetParams& p);
};

struct LrSchedule {
    double lr_init = 1.5e-4;
    double lr_peak = 5e-4;
    int warmup_epochs = 10;
    int decay_start_epoch = 11;
    double decay_factor = 0.25;
    int decay_every = 3;
};

/// Xavier-uniform weights from the seeded stream, zero biases, unit scale.
RewardNetParams init_params(const NetConfig& config, std::uint64_t seed);

/// Per-row evaluation. In train mode with normalization on, batch statistics
/// over the S rows are used and running statistics updated (momentum 0.9);
/// eval mode reads running statistics and never mutates params.
std::vector<double> forward(RewardNetParams& params, const Matrix& phi, bool train_mode,
                            ForwardCache* cache = nullptr);

/// Exact gradients of Σ_s grad_r[s]·r[s] for every learnable parameter.
NetGradients backward(const RewardNetParams& params, const ForwardCache& cache,
                      const std::vector<double>& grad_r);

/// Bias-corrected Adam update in place.
void adam_step(RewardNetParams& params, const NetGradients& grads, AdamState& state, double lr);

/// Warmup epochs 1..10 interpolate lr_init -> lr_peak linearly; epochs 11..13
/// hold lr_peak; from epoch 14 the rate is multiplied by decay_factor every
/// decay_every epochs.
double lr_at_epoch(const LrSchedule& sched, int epoch);

}  // namespace medirl
