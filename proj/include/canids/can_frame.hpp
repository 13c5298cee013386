#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace canids {

enum class Label : std::uint8_t { Benign = 0, DoS = 1, Fuzzing = 2, SpoofRPM = 3 };

inline constexpr int kNumClasses = 4;

const char* label_name(Label l);
Label label_from_name(std::string_view name);  // throws on unknown name

struct CanFrame {
    double timestamp = 0.0;                  // seconds
    std::uint16_t can_id = 0;                // 11-bit identifier, < 0x800
    std::uint8_t dlc = 0;                    // 0..8
    std::array<std::uint8_t, 8> payload{};   // zero-padded beyond dlc
    Label label = Label::Benign;

    bool operator==(const CanFrame&) const = default;
};

struct CaptureStats {
    std::uint64_t total = 0;
    std::array<std::uint64_t, kNumClasses> per_label{};
    double duration_s = 0.0;
    double frames_per_s = 0.0;
};

enum class ParseMode { Strict, Lenient };

// One capture record: "timestamp,ID_hex,DLC,D0..D{DLC-1},flag". Flag R marks
// benign traffic and T an injected frame. The attack class of injected frames
// is a property of the capture file, so the caller supplies it.
CanFrame parse_capture_line(std::string_view line, Label attack_class, std::size_t line_no = 0);

std::string format_capture_line(const CanFrame& frame);

struct Capture {
    std::vector<CanFrame> frames;
    CaptureStats stats;
    std::uint64_t skipped_lines = 0;  // lenient mode only
    std::vector<std::string> warnings;
};

Capture read_capture(const std::string& path, Label attack_class, ParseMode mode = ParseMode::Strict);
void write_capture(const std::string& path, const std::vector<CanFrame>& frames);
CaptureStats capture_stats(const std::vector<CanFrame>& frames);

}  // namespace canids
