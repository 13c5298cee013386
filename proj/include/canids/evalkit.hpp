#pragma once

// Classifier evaluation: confusion matrix, per-class precision/recall/F1/FNR,
// false-positive rate against the benign row, and an arithmetic cost model for
// the quantised network (MACs, bit operations, weight memory).

#include "canids/can_frame.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace canids {

// counts[true_class][predicted_class].
struct ConfusionMatrix {
    std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

    void add(Label truth, Label pred, std::uint64_t n = 1);
    std::uint64_t row_sum(Label truth) const;   // actual instances of a class
    std::uint64_t col_sum(Label pred) const;    // predictions of a class
    std::uint64_t total() const;
    std::uint64_t trace() const;                // correct predictions
};

ConfusionMatrix confusion(std::span<const Label> truth, std::span<const Label> pred);

// Per-class one-vs-rest metrics. A metric whose denominator is zero is
// reported as 0 with its defined flag cleared; callers decide how to present
// that (the CLI prints "n/a").
struct ClassMetrics {
    Label cls = Label::Benign;
    double precision = 0.0, recall = 0.0, f1 = 0.0, fnr = 0.0;
    bool precision_defined = false, recall_defined = false, f1_defined = false, fnr_defined = false;
};

struct MetricsReport {
    std::array<ClassMetrics, kNumClasses> per_class{};
    double accuracy = 0.0;
    // Fraction of truly benign blocks flagged as any attack class.
    double fpr = 0.0;
    bool fpr_defined = false;
    std::uint64_t misclassifications = 0;
    std::uint64_t total = 0;
};

MetricsReport compute_metrics(const ConfusionMatrix& cm);

// Arithmetic cost of one forward pass through a dims[0] -> ... -> dims.back()
// stack of dense layers. MACs count multiply-accumulates; each layer's bit
// operations are its MACs times weight bits times input bits (the first layer
// consumes input_bits-wide inputs, later layers consume `bits`-wide
// activations). The normalized cost averages the bit-op and weight-memory
// ratios against the same architecture at baseline_bits:
//   normalized_cost = 0.5 * bops_ratio + 0.5 * mem_ratio
// so the baseline itself scores exactly 1. Weight memory excludes biases and
// batch-norm parameters.
struct InferenceCost {
    std::uint64_t macs = 0;
    std::vector<std::uint64_t> layer_macs;
    std::vector<std::uint64_t> layer_bit_ops;
    std::uint64_t bit_ops = 0;
    std::uint64_t weight_mem_bits = 0;
    double bops_ratio = 0.0;
    double mem_ratio = 0.0;
    double normalized_cost = 0.0;
};

InferenceCost inference_cost(std::span<const int> dims, int bits, int input_bits = 8, int baseline_bits = 4);

// Sparsity-discounted variant: per-layer fractions of nonzero weights; zero
// weights contribute neither bit operations nor storage. The baseline stays
// the dense baseline_bits model. `nonzero` needs one entry per layer.
InferenceCost inference_cost_sparse(std::span<const int> dims, int bits, std::span<const double> nonzero,
                                    int input_bits = 8, int baseline_bits = 4);

// Text emitters. CSV forms are machine-oriented; table forms are aligned for
// terminals.
std::string confusion_csv(const ConfusionMatrix& cm);
ConfusionMatrix parse_confusion_csv(const std::string& text);
std::string metrics_csv(const MetricsReport& r);
std::string metrics_table(const MetricsReport& r);
std::string cost_csv(const InferenceCost& c);
std::string cost_table(const InferenceCost& c);

}  // namespace canids
