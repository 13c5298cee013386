#include "textio.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace canids::textio {

std::string double_hex(double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(bits));
    return std::string(buf, 16);
}

double hex_double(const std::string& s) {
    if (s.size() != 16) throw std::runtime_error("bad hex real: " + s);
    std::uint64_t bits = 0;
    for (char c : s) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else throw std::runtime_error("bad hex real: " + s);
        bits = (bits << 4) | static_cast<std::uint64_t>(d);
    }
    double v = 0;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

std::uint32_t payload_crc(const std::string& payload) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size()));
    return static_cast<std::uint32_t>(crc);
}

void write_checksummed(const std::string& path, const std::string& payload) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    char line[32];
    std::snprintf(line, sizeof line, "checksum %08x\n", payload_crc(payload));
    out << payload << line;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_checksummed(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string all = ss.str();

    // The checksum line is the final line of the file.
    std::size_t end = all.size();
    if (end > 0 && all[end - 1] == '\n') --end;
    std::size_t nl = all.rfind('\n', end == 0 ? 0 : end - 1);
    std::size_t line_start = (nl == std::string::npos) ? 0 : nl + 1;
    std::string last = all.substr(line_start, end - line_start);

    unsigned long stored = 0;
    if (std::sscanf(last.c_str(), "checksum %8lx", &stored) != 1)
        throw std::runtime_error(path + ": missing checksum line");
    std::string payload = all.substr(0, line_start);
    if (payload_crc(payload) != static_cast<std::uint32_t>(stored))
        throw std::runtime_error(path + ": checksum mismatch");
    return payload;
}

}  // namespace canids::textio
