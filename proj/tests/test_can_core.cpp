#include "canids/can_frame.hpp"
#include "canids/rng.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <string>

using namespace canids;

TEST_CASE("parse well-formed capture lines") {
    CanFrame f = parse_capture_line("1478198376.389427,0316,8,05,21,68,09,21,21,00,6f,R", Label::Fuzzing);
    CHECK(f.can_id == 0x316);
    CHECK(f.dlc == 8);
    CHECK(f.payload == std::array<std::uint8_t, 8>{0x05, 0x21, 0x68, 0x09, 0x21, 0x21, 0x00, 0x6f});
    CHECK(f.label == Label::Benign);
    CHECK(f.timestamp == doctest::Approx(1478198376.389427));

    CanFrame dos = parse_capture_line("0.0,0000,8,00,00,00,00,00,00,00,00,T", Label::DoS);
    CHECK(dos.can_id == 0);
    CHECK(dos.payload == std::array<std::uint8_t, 8>{});
    CHECK(dos.label == Label::DoS);

    CanFrame shortpay = parse_capture_line("1.0,018f,2,fe,5b,T", Label::Fuzzing);
    CHECK(shortpay.dlc == 2);
    CHECK(shortpay.payload == std::array<std::uint8_t, 8>{0xfe, 0x5b, 0, 0, 0, 0, 0, 0});
    CHECK(shortpay.label == Label::Fuzzing);
}

TEST_CASE("zero padding beyond dlc") {
    for (int dlc = 0; dlc <= 8; ++dlc) {
        std::string line = "2.5,01aa," + std::to_string(dlc);
        for (int i = 0; i < dlc; ++i) line += ",ff";
        line += ",R";
        CanFrame f = parse_capture_line(line, Label::DoS);
        CHECK(f.dlc == dlc);
        for (int i = 0; i < 8; ++i) CHECK(f.payload[static_cast<std::size_t>(i)] == (i < dlc ? 0xff : 0x00));
    }
}

TEST_CASE("parse errors name the line number") {
    auto expect_error = [](const char* line, const char* what) {
        CAPTURE(line);
        CAPTURE(what);
        CHECK_THROWS_WITH_AS(parse_capture_line(line, Label::DoS, 17), doctest::Contains("line 17"),
                             std::runtime_error);
    };
    expect_error("1.0,0123", "too few fields");
    expect_error("1.0,0123,2,aa,R", "field count vs dlc");
    expect_error("1.0,0123,2,aa,bb,cc,R", "extra data field");
    expect_error("1.0,zz23,2,aa,bb,R", "non-hex id");
    expect_error("1.0,0123,9,aa,bb,cc,dd,ee,ff,00,11,22,R", "dlc > 8");
    expect_error("1.0,0800,1,aa,R", "id out of 11-bit range");
    expect_error("1.0,0123,1,aa,X", "unknown flag");
    expect_error("1.0,0123,1,a,R", "one-digit data byte");
    expect_error("abc,0123,1,aa,R", "bad timestamp");
}

TEST_CASE("injected flag in a benign-class file is rejected") {
    CHECK_NOTHROW(parse_capture_line("1.0,0123,1,aa,R", Label::Benign));
    CHECK_THROWS_AS(parse_capture_line("1.0,0123,1,aa,T", Label::Benign), std::runtime_error);
}

TEST_CASE("format and reparse round trip") {
    Rng rng(99);
    for (int i = 0; i < 500; ++i) {
        CanFrame f;
        f.timestamp = rng.uniform(0.0, 1e6);
        f.timestamp = std::round(f.timestamp * 1e6) / 1e6;  // format keeps 6 decimals
        f.can_id = static_cast<std::uint16_t>(rng.below(0x800));
        f.dlc = static_cast<std::uint8_t>(rng.below(9));
        for (int j = 0; j < f.dlc; ++j) f.payload[static_cast<std::size_t>(j)] = rng.byte();
        f.label = rng.uniform() < 0.5 ? Label::Benign : Label::SpoofRPM;
        CanFrame back = parse_capture_line(format_capture_line(f), Label::SpoofRPM);
        CHECK(back == f);
    }
}

TEST_CASE("read_capture basics") {
    testutil::TempDir dir("cancore");
    const auto path = dir.file("cap.csv");

    SUBCASE("three well-formed lines") {
        testutil::spit(path, "0.1,0100,2,aa,bb,R\n0.2,0200,1,cc,T\n0.3,0300,0,R\n");
        Capture cap = read_capture(path, Label::DoS);
        CHECK(cap.frames.size() == 3);
        CHECK(cap.stats.total == 3);
        CHECK(cap.stats.per_label[0] == 2);
        CHECK(cap.stats.per_label[static_cast<std::size_t>(Label::DoS)] == 1);
        CHECK(cap.skipped_lines == 0);
    }

    SUBCASE("strict mode fails on a bad line, lenient skips it") {
        testutil::spit(path, "0.1,0100,2,aa,bb,R\nnot a record\n0.3,0300,0,R\n");
        CHECK_THROWS_WITH_AS(read_capture(path, Label::DoS), doctest::Contains("line 2"), std::runtime_error);
        Capture cap = read_capture(path, Label::DoS, ParseMode::Lenient);
        CHECK(cap.frames.size() == 2);
        CHECK(cap.skipped_lines == 1);
    }

    SUBCASE("timestamps must not decrease in strict mode") {
        testutil::spit(path, "0.2,0100,0,R\n0.1,0100,0,R\n");
        CHECK_THROWS_AS(read_capture(path, Label::DoS), std::runtime_error);
        Capture cap = read_capture(path, Label::DoS, ParseMode::Lenient);
        CHECK(cap.frames.size() == 2);
        CHECK(!cap.warnings.empty());
    }

    SUBCASE("empty file warns") {
        testutil::spit(path, "");
        Capture cap = read_capture(path, Label::DoS);
        CHECK(cap.frames.empty());
        CHECK(!cap.warnings.empty());
    }

    SUBCASE("missing file errors") { CHECK_THROWS_AS(read_capture(dir.file("nope.csv"), Label::DoS), std::runtime_error); }
}

TEST_CASE("write_capture then read_capture round trips") {
    testutil::TempDir dir("cancore");
    const auto path = dir.file("cap.csv");
    Rng rng(7);
    std::vector<CanFrame> frames;
    double t = 0.0;
    for (int i = 0; i < 200; ++i) {
        CanFrame f;
        t += rng.uniform(0.0, 0.01);
        f.timestamp = std::round(t * 1e6) / 1e6;
        f.can_id = static_cast<std::uint16_t>(rng.below(0x800));
        f.dlc = static_cast<std::uint8_t>(rng.below(9));
        for (int j = 0; j < f.dlc; ++j) f.payload[static_cast<std::size_t>(j)] = rng.byte();
        f.label = rng.uniform() < 0.2 ? Label::Fuzzing : Label::Benign;
        frames.push_back(f);
    }
    std::sort(frames.begin(), frames.end(), [](const CanFrame& a, const CanFrame& b) { return a.timestamp < b.timestamp; });
    write_capture(path, frames);
    Capture cap = read_capture(path, Label::Fuzzing);
    CHECK(cap.frames == frames);
}

TEST_CASE("capture stats totals") {
    std::vector<CanFrame> frames;
    for (int i = 0; i < 10; ++i) {
        CanFrame f;
        f.timestamp = 0.5 * i;
        f.label = i % 3 == 0 ? Label::DoS : Label::Benign;
        frames.push_back(f);
    }
    CaptureStats st = capture_stats(frames);
    CHECK(st.total == 10);
    std::uint64_t s = 0;
    for (auto v : st.per_label) s += v;
    CHECK(s == st.total);
    CHECK(st.duration_s == doctest::Approx(4.5));
    CHECK(st.frames_per_s == doctest::Approx(10.0 / 4.5));
}

TEST_CASE("label names round trip") {
    for (int c = 0; c < kNumClasses; ++c) {
        auto l = static_cast<Label>(c);
        CHECK(label_from_name(label_name(l)) == l);
    }
    CHECK_THROWS_AS(label_from_name("gear"), std::runtime_error);
}
