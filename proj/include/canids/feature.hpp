#pragma once

#include "canids/can_frame.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace canids {

inline constexpr int kWindow = 4;       // frames per block
inline constexpr int kMsgBytes = 10;    // 2 ID bytes + 8 payload bytes
inline constexpr int kBlockBytes = kWindow * kMsgBytes;

using EncodedMessage = std::array<std::uint8_t, kMsgBytes>;

// [id >> 8, id & 0xff, payload[0..7]]; payload already zero-padded to 8.
EncodedMessage encode_frame(const CanFrame& frame);

struct FeatureBlock {
    std::array<std::int8_t, kBlockBytes> data{};  // bytes reinterpreted as two's complement
    Label label = Label::Benign;
    std::uint64_t window_start = 0;               // frame index of the window's first message

    bool operator==(const FeatureBlock&) const = default;
};

// Benign only if every frame in the window is benign; otherwise the class of
// the earliest non-benign frame.
Label label_block(std::span<const Label> labels);

// Windows of n consecutive frames at the given stride. Dataset building uses
// stride = n (non-overlapping); online classification uses stride = 1.
std::vector<FeatureBlock> build_blocks(std::span<const CanFrame> frames, int n = kWindow, int stride = kWindow);

struct SplitRatios {
    int train = 85, val = 10, test = 5;  // percent, must sum to 100
};

struct DatasetSplit {
    std::vector<FeatureBlock> train, val, test;
    std::uint64_t seed = 0;
};

// Seeded uniform shuffle, then contiguous slices. Slice sizes are floors of
// the percentages; the remainder goes to train.
DatasetSplit split_dataset(std::vector<FeatureBlock> blocks, SplitRatios ratios, std::uint64_t seed);

// Binary block file: 8-byte header, then per block 40 data bytes, 1 label
// byte and a little-endian u64 window start index.
void write_blocks(const std::string& path, std::span<const FeatureBlock> blocks);
std::vector<FeatureBlock> read_blocks(const std::string& path);

}  // namespace canids
