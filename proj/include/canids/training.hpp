#pragma once

#include "canids/cqmlp.hpp"
#include "canids/feature.hpp"

#include <span>
#include <string>
#include <vector>

namespace canids {

enum class LossKind { BceOneHot };

inline constexpr double kProbClip = 1e-7;

// Binary cross-entropy against the one-hot target, averaged over the four
// class outputs. Probabilities are clipped to [kProbClip, 1 - kProbClip].
double bce_one_hot(std::span<const double> probs, int target);

// d(loss)/d(logits) for BCE over a softmax, scaled by `scale` (1/batch for a
// batch mean). Clipped probabilities contribute zero gradient.
void bce_softmax_dlogits(std::span<const double> probs, int target, double scale, std::span<double> out);

struct AdamState {
    std::vector<double> m, v;
    long long t = 0;
};

// Bias-corrected Adam update, epsilon added outside the square root.
void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct TrainConfig {
    std::vector<int> dims{40, 256, 128, 64, 32, 4};
    int bits = 2;
    double lr = 1e-4;
    int batch = 128;
    int epochs = 50;
    std::uint64_t seed = 1;
    LossKind loss = LossKind::BceOneHot;
};

struct LossCurve {
    std::vector<double> train_loss, val_loss;  // one entry per epoch
};

struct TrainResult {
    CqmlpModel model;  // parameters with the lowest validation loss
    LossCurve curve;
    int best_epoch = 0;       // 1-based; 0 when no epochs ran
    double best_val_loss = 0;
};

// Quantisation-aware training: fake-quant forward, straight-through backward,
// Adam on the real master weights. Weight scales follow max-abs each step;
// activation scales are trained after a one-batch real-mode initialisation.
// Epoch e shuffles the training set with seed (config.seed + e).
TrainResult train_qat(const TrainConfig& cfg, const DatasetSplit& data);

// Mean loss of the model over blocks (fake-quant inference phase).
double eval_loss(const CqmlpModel& m, std::span<const FeatureBlock> blocks, int batch = 128);

// "epoch,train_loss,val_loss" rows, 12 significant digits.
void export_loss_csv(const LossCurve& curve, const std::string& path);

}  // namespace canids
