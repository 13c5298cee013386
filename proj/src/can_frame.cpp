#include "canids/can_frame.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace canids {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

bool parse_hex(std::string_view s, std::uint32_t& out) {
    if (s.empty()) return false;
    std::uint32_t v = 0;
    for (char c : s) {
        int d = hex_digit(c);
        if (d < 0) return false;
        v = v * 16 + static_cast<std::uint32_t>(d);
    }
    out = v;
    return true;
}

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

const char* label_name(Label l) {
    switch (l) {
        case Label::Benign: return "Benign";
        case Label::DoS: return "DoS";
        case Label::Fuzzing: return "Fuzzing";
        case Label::SpoofRPM: return "SpoofRPM";
    }
    return "?";
}

Label label_from_name(std::string_view name) {
    if (name == "Benign" || name == "benign" || name == "normal") return Label::Benign;
    if (name == "DoS" || name == "dos" || name == "DOS") return Label::DoS;
    if (name == "Fuzzing" || name == "fuzzing" || name == "fuzzy") return Label::Fuzzing;
    if (name == "SpoofRPM" || name == "spoof-rpm" || name == "spoof" || name == "rpm") return Label::SpoofRPM;
    throw std::runtime_error("unknown class name: " + std::string(name));
}

CanFrame parse_capture_line(std::string_view line, Label attack_class, std::size_t line_no) {
    const auto fields = split_fields(line);
    if (fields.size() < 4) fail(line_no, "expected at least 4 comma-separated fields");

    CanFrame f;

    {
        std::string_view ts = fields[0];
        const char* first = ts.data();
        const char* last = ts.data() + ts.size();
        auto [ptr, ec] = std::from_chars(first, last, f.timestamp);
        if (ec != std::errc() || ptr != last || ts.empty()) fail(line_no, "bad timestamp field");
    }

    {
        std::uint32_t id = 0;
        if (fields[1].size() > 4 || !parse_hex(fields[1], id)) fail(line_no, "bad ID field");
        if (id >= 0x800) fail(line_no, "ID out of 11-bit range");
        f.can_id = static_cast<std::uint16_t>(id);
    }

    {
        std::string_view d = fields[2];
        unsigned dlc = 0;
        auto [ptr, ec] = std::from_chars(d.data(), d.data() + d.size(), dlc);
        if (ec != std::errc() || ptr != d.data() + d.size() || d.empty()) fail(line_no, "bad DLC field");
        if (dlc > 8) fail(line_no, "DLC > 8");
        f.dlc = static_cast<std::uint8_t>(dlc);
    }

    if (fields.size() != 4u + f.dlc)
        fail(line_no, "field count does not match DLC (" + std::to_string(fields.size()) + " fields for DLC " +
                          std::to_string(f.dlc) + ")");

    for (int i = 0; i < f.dlc; ++i) {
        std::uint32_t b = 0;
        if (fields[3 + i].size() != 2 || !parse_hex(fields[3 + i], b)) fail(line_no, "bad data byte");
        f.payload[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(b);
    }

    {
        std::string_view flag = fields[3 + f.dlc];
        if (flag == "R") {
            f.label = Label::Benign;
        } else if (flag == "T") {
            if (attack_class == Label::Benign) fail(line_no, "injected frame in benign-class capture");
            f.label = attack_class;
        } else {
            fail(line_no, "bad flag field (expected R or T)");
        }
    }
    return f;
}

std::string format_capture_line(const CanFrame& frame) {
    char buf[128];
    int n = std::snprintf(buf, sizeof buf, "%.6f,%04x,%u", frame.timestamp, frame.can_id, frame.dlc);
    std::string out(buf, static_cast<std::size_t>(n));
    for (int i = 0; i < frame.dlc; ++i) {
        std::snprintf(buf, sizeof buf, ",%02x", frame.payload[static_cast<std::size_t>(i)]);
        out += buf;
    }
    out += frame.label == Label::Benign ? ",R" : ",T";
    return out;
}

CaptureStats capture_stats(const std::vector<CanFrame>& frames) {
    CaptureStats s;
    s.total = frames.size();
    for (const auto& f : frames) s.per_label[static_cast<std::size_t>(f.label)]++;
    if (frames.size() >= 2) {
        s.duration_s = frames.back().timestamp - frames.front().timestamp;
        if (s.duration_s > 0) s.frames_per_s = static_cast<double>(s.total) / s.duration_s;
    }
    return s;
}

Capture read_capture(const std::string& path, Label attack_class, ParseMode mode) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open capture: " + path);

    Capture cap;
    std::string line;
    std::size_t line_no = 0;
    double prev_ts = 0.0;
    bool have_prev = false;
    bool warned_order = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            if (mode == ParseMode::Strict) throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": empty record");
            ++cap.skipped_lines;
            continue;
        }
        CanFrame f;
        try {
            f = parse_capture_line(line, attack_class, line_no);
        } catch (const std::exception& e) {
            if (mode == ParseMode::Strict) throw std::runtime_error(path + ": " + e.what());
            ++cap.skipped_lines;
            continue;
        }
        if (have_prev && f.timestamp < prev_ts) {
            if (mode == ParseMode::Strict)
                throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": timestamp decreases");
            if (!warned_order) {
                cap.warnings.push_back(path + ": line " + std::to_string(line_no) + ": timestamps not monotonic");
                warned_order = true;
            }
        }
        prev_ts = f.timestamp;
        have_prev = true;
        cap.frames.push_back(f);
    }
    if (cap.frames.empty()) cap.warnings.push_back(path + ": empty capture");
    cap.stats = capture_stats(cap.frames);
    return cap;
}

void write_capture(const std::string& path, const std::vector<CanFrame>& frames) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write capture: " + path);
    for (const auto& f : frames) {
        out << format_capture_line(f) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace canids
