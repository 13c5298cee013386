#pragma once

#include "canids/feature.hpp"
#include "canids/qtensor.hpp"
#include "canids/rng.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace canids {

struct LinearLayer {
    int in = 0, out = 0;
    std::vector<double> w;  // row-major [out][in]
    std::vector<double> b;  // [out], kept unquantised
};

struct BatchNormLayer {
    int ch = 0;
    std::vector<double> gamma, beta, running_mean, running_var;
    double eps = 1e-5;
    double momentum = 0.1;  // running = (1-m)*running + m*batch
};

enum class RunMode { Real, FakeQuant };
enum class Phase { Train, Infer };

inline constexpr double kInputScale = 1.0 / 128.0;  // signed 8-bit input bytes

// Quantised MLP classifier over 40-byte feature blocks: linear layers with a
// batch-norm and a quantised ReLU between each pair, softmax read-out.
struct CqmlpModel {
    std::vector<int> dims{40, 256, 128, 64, 32, 4};
    int bits = 2;  // weight and activation width, in {2,3,4,8}

    std::vector<LinearLayer> linear;   // dims.size()-1 layers
    std::vector<BatchNormLayer> bn;    // one per hidden layer
    std::vector<double> act_scale;     // trainable activation scales, one per hidden layer

    // Training metadata carried by the model file.
    std::uint64_t seed = 0;
    int epochs_trained = 0;
    double best_val_loss = std::numeric_limits<double>::quiet_NaN();

    int hidden_count() const { return static_cast<int>(bn.size()); }
    int act_hi() const { return (1 << bits) - 1; }

    // Signed narrow per-tensor weight spec; scale from the max-abs rule over
    // the layer's current master weights.
    QuantSpec weight_spec(int layer) const;

    // Unsigned activation spec for hidden layer h.
    QuantSpec act_spec(int h) const;

    // Inference-phase batch-norm as a per-channel affine y -> a*y + b.
    void bn_affine(int h, std::vector<double>& a, std::vector<double>& b) const;

    // Product of the layer's weight scale and its input activation scale.
    double combined_scale(int layer) const;
};

CqmlpModel make_model(std::span<const int> dims, int bits);

// Kaiming-uniform fan-in weights, zero biases, identity batch-norm.
void init_params(CqmlpModel& m, Rng& rng);

// Trainable parameters: linear weights and biases, batch-norm gammas and
// betas, activation scales. Running stats are buffers, not parameters.
long long count_params(const CqmlpModel& m);

// ---- shared scalar kernels ----------------------------------------------
// The integer threshold pipeline must reproduce this forward pass bit for
// bit, so both sides funnel through these exact operation sequences.
// (The build disables FP contraction to keep them deterministic.)

inline double infer_preact(double sws, double bias, double a, double b, double z) {
    double y = sws * z + bias;
    return a * y + b;
}

inline int quant_relu_level(double u, double s_act, int hi) {
    double r = std::round(u / s_act);
    if (r < 0.0) return 0;
    if (r > static_cast<double>(hi)) return hi;
    return static_cast<int>(r);
}

inline double output_logit(double sws, double bias, double z) { return sws * z + bias; }

inline int argmax4(std::span<const double> v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
    }
    return best;
}

void softmax_inplace(std::span<double> v);

// ---- single-block inference ----------------------------------------------

struct InferResult {
    std::array<double, 4> logits{};
    std::array<double, 4> probs{};
    Label predicted = Label::Benign;
    // FakeQuant mode only: integer activation levels and batch-norm outputs
    // per hidden layer.
    std::vector<std::vector<int>> act_levels;
    std::vector<std::vector<double>> preact;
};

// Runs one block through the network using running batch-norm statistics.
// FakeQuant mode accumulates each linear layer over exact integer levels and
// rescales once per channel, so its activations are reproducible integers.
InferResult forward_infer(const CqmlpModel& m, std::span<const std::int8_t> block, RunMode mode);

// Predicted class per block. Matches forward_infer(...).predicted but
// prepares the quantised weights once for the whole span.
std::vector<Label> predict(const CqmlpModel& m, std::span<const FeatureBlock> blocks, RunMode mode);

// ---- batch training path --------------------------------------------------

struct BatchCache {
    bool valid = false;
    RunMode mode = RunMode::Real;
    Phase phase = Phase::Train;
    int n = 0;

    std::vector<std::vector<double>> x;      // input to each linear layer
    std::vector<std::vector<double>> w_eff;  // weights the layer actually used
    std::vector<double> w_scale;
    std::vector<std::vector<std::uint8_t>> w_pass;  // weight STE mask
    std::vector<std::vector<double>> y;      // linear outputs; y.back() = logits
    std::vector<std::vector<double>> mean, var;     // batch stats per hidden layer
    std::vector<std::vector<double>> xhat, u;       // normalised and scaled BN outputs
    std::vector<std::vector<double>> act;           // activation outputs
    std::vector<std::vector<double>> q;             // activation levels (FakeQuant)
    std::vector<std::vector<std::uint8_t>> pass;    // activation STE / ReLU mask
    std::vector<double> probs;               // n x 4
};

// Train phase normalises with batch statistics and updates running stats;
// infer phase uses the stored running statistics.
void forward_batch(CqmlpModel& m, const std::int8_t* data, int n, RunMode mode, Phase phase, BatchCache& cache);

struct Gradients {
    std::vector<std::vector<double>> w, b;
    std::vector<std::vector<double>> gamma, beta;
    std::vector<double> act_scale;

    static Gradients zeros_like(const CqmlpModel& m);
};

// Backpropagates d(loss)/d(logits) through the cached forward pass. The cache
// must come from a train-phase forward_batch call.
void backward_batch(const CqmlpModel& m, const BatchCache& cache, std::span<const double> dlogits, Gradients& g);

// ---- model file -----------------------------------------------------------
// Versioned text document; reals stored as hex-encoded IEEE-754 bits with a
// CRC-32 over the payload. Round trips are byte-exact.

void save_model(const CqmlpModel& m, const std::string& path);
CqmlpModel load_model(const std::string& path);

}  // namespace canids
