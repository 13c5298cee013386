#include "canids/feature.hpp"
#include "canids/rng.hpp"
#include "canids/traffic_sim.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace canids;

namespace {

CanFrame frame_at(double t, std::uint16_t id, std::array<std::uint8_t, 8> payload, Label label = Label::Benign) {
    CanFrame f;
    f.timestamp = t;
    f.can_id = id;
    f.dlc = 8;
    f.payload = payload;
    f.label = label;
    return f;
}

}  // namespace

TEST_CASE("encode_frame splits the id big-endian and appends the payload") {
    CanFrame f = frame_at(0, 0x316, {0x05, 0x21, 0x68, 0x09, 0x21, 0x21, 0x00, 0x6f});
    CHECK(encode_frame(f) == EncodedMessage{0x03, 0x16, 0x05, 0x21, 0x68, 0x09, 0x21, 0x21, 0x00, 0x6f});

    CHECK(encode_frame(frame_at(0, 0, {})) == EncodedMessage{});

    EncodedMessage top = encode_frame(frame_at(0, 0x7ff, {}));
    CHECK(top[0] == 0x07);
    CHECK(top[1] == 0xff);
    CHECK(top[0] < 8);
}

TEST_CASE("encode_frame is injective over id and payload") {
    Rng rng(3);
    std::set<EncodedMessage> seen;
    std::set<std::pair<std::uint16_t, std::array<std::uint8_t, 8>>> keys;
    for (int i = 0; i < 2000; ++i) {
        CanFrame f;
        f.can_id = static_cast<std::uint16_t>(rng.below(0x800));
        f.dlc = 8;
        for (auto& b : f.payload) b = rng.byte();
        if (keys.insert({f.can_id, f.payload}).second) CHECK(seen.insert(encode_frame(f)).second);
    }
}

TEST_CASE("block bytes are the two's-complement reinterpretation") {
    CanFrame f = frame_at(0, 0x7ff, {0xff, 0x80, 0x7f, 0, 0, 0, 0, 0});
    auto blocks = build_blocks(std::vector<CanFrame>{f, f, f, f});
    REQUIRE(blocks.size() == 1);
    const auto& d = blocks[0].data;
    CHECK(d[0] == 7);
    CHECK(d[1] == -1);    // 0xff
    CHECK(d[2] == -1);    // payload 0xff
    CHECK(d[3] == -128);  // 0x80
    CHECK(d[4] == 127);   // 0x7f
}

TEST_CASE("window and stride arithmetic") {
    std::vector<CanFrame> frames;
    for (int i = 0; i < 8; ++i) frames.push_back(frame_at(i * 0.1, static_cast<std::uint16_t>(i), {}));

    CHECK(build_blocks(frames, 4, 4).size() == 2);
    CHECK(build_blocks(frames, 4, 1).size() == 5);
    CHECK(build_blocks(std::vector<CanFrame>(frames.begin(), frames.begin() + 3)).empty());

    auto blocks = build_blocks(frames, 4, 4);
    for (std::size_t w = 0; w < blocks.size(); ++w) {
        CHECK(blocks[w].window_start == w * 4);
        for (int k = 0; k < kWindow; ++k) {
            EncodedMessage e = encode_frame(frames[w * 4 + static_cast<std::size_t>(k)]);
            for (int j = 0; j < kMsgBytes; ++j)
                CHECK(static_cast<std::uint8_t>(blocks[w].data[static_cast<std::size_t>(k * kMsgBytes + j)]) ==
                      e[static_cast<std::size_t>(j)]);
        }
    }
}

TEST_CASE("stride-1 window membership counts") {
    const int N = 12;
    std::vector<CanFrame> frames;
    for (int i = 0; i < N; ++i) frames.push_back(frame_at(i * 0.1, 1, {}));
    auto blocks = build_blocks(frames, 4, 1);
    REQUIRE(blocks.size() == static_cast<std::size_t>(N - 3));
    std::vector<int> member(N, 0);
    for (const auto& b : blocks)
        for (int k = 0; k < 4; ++k) member[static_cast<std::size_t>(b.window_start) + static_cast<std::size_t>(k)]++;
    for (int i = 0; i < N; ++i) CHECK(member[static_cast<std::size_t>(i)] == std::min({i + 1, 4, N - i}));
}

TEST_CASE("block labelling takes the earliest attack frame") {
    using L = Label;
    CHECK(label_block(std::vector<L>{L::Benign, L::Benign, L::Benign, L::Benign}) == L::Benign);
    CHECK(label_block(std::vector<L>{L::Benign, L::Benign, L::DoS, L::Benign}) == L::DoS);
    CHECK(label_block(std::vector<L>{L::Benign, L::Fuzzing, L::DoS, L::Benign}) == L::Fuzzing);
    CHECK_THROWS_AS(label_block({}), std::runtime_error);
}

TEST_CASE("a block is benign iff its window holds no attack frame") {
    auto stream = gen_benign(default_profile(12), 4.0);
    AttackSchedule s;
    s.attack = Label::Fuzzing;
    s.start_s = 1.0;
    s.stop_s = 3.0;
    s.rate_per_s = 300.0;
    s.seed = 4;
    auto res = inject_fuzzing(std::move(stream), s);
    auto blocks = build_blocks(res.frames, 4, 1);
    REQUIRE(blocks.size() == res.frames.size() - 3);
    for (const auto& b : blocks) {
        bool any_attack = false;
        for (std::size_t k = 0; k < kWindow; ++k)
            any_attack = any_attack || res.frames[b.window_start + k].label != Label::Benign;
        CHECK((b.label != Label::Benign) == any_attack);
    }
}

TEST_CASE("split sizes follow the floor-then-train-remainder rule") {
    std::vector<FeatureBlock> blocks(1000);
    auto s = split_dataset(blocks, SplitRatios{}, 4);
    CHECK(s.train.size() == 850);
    CHECK(s.val.size() == 100);
    CHECK(s.test.size() == 50);

    std::vector<FeatureBlock> few(20);
    auto t = split_dataset(few, SplitRatios{}, 4);
    CHECK(t.train.size() == 17);
    CHECK(t.val.size() == 2);
    CHECK(t.test.size() == 1);
}

TEST_CASE("split is a seeded deterministic partition") {
    Rng rng(31);
    std::vector<FeatureBlock> blocks(257);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        blocks[i].window_start = i;
        for (auto& v : blocks[i].data) v = static_cast<std::int8_t>(static_cast<int>(rng.below(256)) - 128);
    }

    auto a = split_dataset(blocks, SplitRatios{}, 11);
    auto b = split_dataset(blocks, SplitRatios{}, 11);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);

    auto c = split_dataset(blocks, SplitRatios{}, 12);
    CHECK(a.train != c.train);

    std::multiset<std::uint64_t> all;
    for (const auto& part : {a.train, a.val, a.test})
        for (const auto& blk : part) all.insert(blk.window_start);
    CHECK(all.size() == blocks.size());
    std::multiset<std::uint64_t> expect;
    for (const auto& blk : blocks) expect.insert(blk.window_start);
    CHECK(all == expect);
}

TEST_CASE("split ratio validation") {
    std::vector<FeatureBlock> blocks(10);
    CHECK_THROWS_AS(split_dataset(blocks, SplitRatios{80, 10, 5}, 1), std::runtime_error);
    CHECK_THROWS_AS(split_dataset({}, SplitRatios{}, 1), std::runtime_error);
}

TEST_CASE("block files round trip and reject corruption") {
    testutil::TempDir dir("feat");
    const auto path = dir.file("x.blk");
    Rng rng(8);
    std::vector<FeatureBlock> blocks(137);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        for (auto& v : blocks[i].data) v = static_cast<std::int8_t>(static_cast<int>(rng.below(256)) - 128);
        blocks[i].label = static_cast<Label>(rng.below(4));
        blocks[i].window_start = rng.next_u64() % 100000;
    }
    write_blocks(path, blocks);
    CHECK(read_blocks(path) == blocks);

    SUBCASE("bad magic") {
        auto bytes = testutil::slurp(path);
        bytes[0] = 'X';
        testutil::spit(path, bytes);
        CHECK_THROWS_AS(read_blocks(path), std::runtime_error);
    }
    SUBCASE("truncated record") {
        auto bytes = testutil::slurp(path);
        bytes.resize(bytes.size() - 3);
        testutil::spit(path, bytes);
        CHECK_THROWS_AS(read_blocks(path), std::runtime_error);
    }
    SUBCASE("bad label byte") {
        auto bytes = testutil::slurp(path);
        bytes[8 + 40] = 9;  // first record's label
        testutil::spit(path, bytes);
        CHECK_THROWS_AS(read_blocks(path), std::runtime_error);
    }
    SUBCASE("empty block list round trips") {
        write_blocks(path, {});
        CHECK(read_blocks(path).empty());
    }
}
