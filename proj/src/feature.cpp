#include "canids/feature.hpp"
#include "canids/rng.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace canids {

namespace {

constexpr std::array<char, 8> kBlockMagic = {'C', 'B', 'L', 'K', 1, 0, 0, 0};
constexpr std::size_t kRecordBytes = kBlockBytes + 1 + 8;

void put_u64_le(std::uint64_t v, char* out) {
    for (int i = 0; i < 8; ++i) out[i] = static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint64_t get_u64_le(const char* in) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
    return v;
}

}  // namespace

EncodedMessage encode_frame(const CanFrame& frame) {
    if (frame.can_id >= 0x800) throw std::runtime_error("frame ID out of 11-bit range");
    EncodedMessage e;
    e[0] = static_cast<std::uint8_t>(frame.can_id >> 8);
    e[1] = static_cast<std::uint8_t>(frame.can_id & 0xff);
    for (int i = 0; i < 8; ++i) e[static_cast<std::size_t>(2 + i)] = frame.payload[static_cast<std::size_t>(i)];
    return e;
}

Label label_block(std::span<const Label> labels) {
    if (labels.empty()) throw std::runtime_error("empty label window");
    for (Label l : labels) {
        if (l != Label::Benign) return l;
    }
    return Label::Benign;
}

std::vector<FeatureBlock> build_blocks(std::span<const CanFrame> frames, int n, int stride) {
    if (n < 1) throw std::runtime_error("window length must be >= 1");
    if (stride < 1) throw std::runtime_error("stride must be >= 1");
    std::vector<FeatureBlock> out;
    if (frames.size() < static_cast<std::size_t>(n)) return out;

    std::vector<Label> labels(static_cast<std::size_t>(n));
    for (std::size_t start = 0; start + static_cast<std::size_t>(n) <= frames.size();
         start += static_cast<std::size_t>(stride)) {
        FeatureBlock b;
        b.window_start = start;
        for (int k = 0; k < n; ++k) {
            const EncodedMessage e = encode_frame(frames[start + static_cast<std::size_t>(k)]);
            for (int j = 0; j < kMsgBytes; ++j) {
                b.data[static_cast<std::size_t>(k * kMsgBytes + j)] = static_cast<std::int8_t>(e[static_cast<std::size_t>(j)]);
            }
            labels[static_cast<std::size_t>(k)] = frames[start + static_cast<std::size_t>(k)].label;
        }
        b.label = label_block(labels);
        out.push_back(b);
    }
    return out;
}

DatasetSplit split_dataset(std::vector<FeatureBlock> blocks, SplitRatios ratios, std::uint64_t seed) {
    if (ratios.train + ratios.val + ratios.test != 100 || ratios.train < 0 || ratios.val < 0 || ratios.test < 0)
        throw std::runtime_error("split ratios must be non-negative and sum to 100");
    if (blocks.empty()) throw std::runtime_error("cannot split an empty block set");

    Rng rng(seed);
    rng.shuffle(blocks);

    const std::size_t n = blocks.size();
    std::size_t n_train = n * static_cast<std::size_t>(ratios.train) / 100;
    const std::size_t n_val = n * static_cast<std::size_t>(ratios.val) / 100;
    const std::size_t n_test = n * static_cast<std::size_t>(ratios.test) / 100;
    n_train += n - (n_train + n_val + n_test);  // remainder to train

    DatasetSplit s;
    s.seed = seed;
    s.train.assign(blocks.begin(), blocks.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(blocks.begin() + static_cast<std::ptrdiff_t>(n_train),
                 blocks.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(blocks.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), blocks.end());
    return s;
}

void write_blocks(const std::string& path, std::span<const FeatureBlock> blocks) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write block file: " + path);
    out.write(kBlockMagic.data(), kBlockMagic.size());
    std::array<char, kRecordBytes> rec{};
    for (const auto& b : blocks) {
        std::memcpy(rec.data(), b.data.data(), kBlockBytes);
        rec[kBlockBytes] = static_cast<char>(b.label);
        put_u64_le(b.window_start, rec.data() + kBlockBytes + 1);
        out.write(rec.data(), rec.size());
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<FeatureBlock> read_blocks(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open block file: " + path);

    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (in.gcount() != 8 || std::memcmp(magic.data(), kBlockMagic.data(), 4) != 0)
        throw std::runtime_error(path + ": not a block file");
    if (magic[4] != kBlockMagic[4]) throw std::runtime_error(path + ": unsupported block file version");

    std::vector<FeatureBlock> out;
    std::array<char, kRecordBytes> rec{};
    while (in.read(rec.data(), rec.size())) {
        FeatureBlock b;
        std::memcpy(b.data.data(), rec.data(), kBlockBytes);
        auto lab = static_cast<std::uint8_t>(rec[kBlockBytes]);
        if (lab >= kNumClasses) throw std::runtime_error(path + ": bad label byte in record");
        b.label = static_cast<Label>(lab);
        b.window_start = get_u64_le(rec.data() + kBlockBytes + 1);
        out.push_back(b);
    }
    if (in.gcount() != 0) throw std::runtime_error(path + ": truncated record");
    return out;
}

}  // namespace canids
