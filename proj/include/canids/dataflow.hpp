#pragma once

#include "canids/cqmlp.hpp"
#include "canids/feature.hpp"

#include <span>
#include <string>
#include <vector>

namespace canids {

// One hidden layer after streamlining: integer weight levels and per-channel
// ascending thresholds over the integer accumulator. The activation level of
// channel c is the number of thresholds <= accumulator. Channels whose folded
// batch-norm slope is negative are stored with the weight row negated so the
// threshold comparison always runs in a non-decreasing direction.
struct PipelineLayer {
    int in = 0, out = 0;
    std::vector<std::int32_t> w;           // row-major [out][in]
    std::vector<std::int32_t> thresholds;  // row-major [out][2^bits - 1]
};

// Final layer stays affine: logit = scale * accumulator + offset[c].
struct OutputLayer {
    int in = 0, out = 0;
    std::vector<std::int32_t> w;
    double scale = 1.0;
    std::vector<double> offset;
};

struct ThresholdPipeline {
    int bits = 2;
    std::vector<int> dims;
    std::vector<PipelineLayer> hidden;
    OutputLayer output;

    int levels_per_channel() const { return (1 << bits) - 1; }
};

// Folds input scale, weight scale, bias, batch-norm affine and the activation
// quantiser of every hidden layer into integer thresholds. Each threshold is
// verified against the fake-quant forward's own channel function at integer
// points, so the pipeline reproduces forward_infer(FakeQuant) bit for bit.
ThresholdPipeline streamline(const CqmlpModel& m);

struct IntTrace {
    std::vector<std::vector<int>> levels;
    std::array<double, 4> logits{};
};

Label run_int(const ThresholdPipeline& p, std::span<const std::int8_t> block, IntTrace* trace = nullptr);

struct EquivalenceReport {
    std::uint64_t checked = 0;
    std::uint64_t mismatches = 0;
    std::vector<std::int8_t> first_bad_block;
    std::string detail;  // first mismatch description
};

// Compares run_int against forward_infer(FakeQuant) on seeded random blocks:
// every hidden activation level and the predicted class must match exactly.
EquivalenceReport check_equivalence(const CqmlpModel& m, const ThresholdPipeline& p, std::uint64_t n_blocks,
                                    std::uint64_t seed);

enum class BenchMode { PerBlock, PerMessageSliding };

struct BenchReport {
    BenchMode mode = BenchMode::PerBlock;
    std::uint64_t items = 0;  // classified blocks
    double wall_s = 0;
    double mean_us = 0, median_us = 0, p99_us = 0;
    double throughput_per_s = 0;
};

// Per-block: one classification per prebuilt block. Per-message sliding: a
// 4-frame ring buffer classifies on every arriving frame once full, so N
// frames produce N-3 classifications.
BenchReport bench_blocks(const ThresholdPipeline& p, std::span<const FeatureBlock> blocks);
BenchReport bench_stream(const ThresholdPipeline& p, std::span<const CanFrame> frames);

void save_pipeline(const ThresholdPipeline& p, const std::string& path);
ThresholdPipeline load_pipeline(const std::string& path);

}  // namespace canids
