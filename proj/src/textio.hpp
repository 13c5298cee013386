#pragma once

#include <cstdint>
#include <string>

// Shared helpers for the checksummed text file formats (model and pipeline
// files): hex-encoded IEEE-754 reals and a CRC-32 over the payload.
namespace canids::textio {

std::string double_hex(double v);
double hex_double(const std::string& s);

std::uint32_t payload_crc(const std::string& payload);

// Writes payload followed by a final "checksum %08x" line.
void write_checksummed(const std::string& path, const std::string& payload);

// Reads a file written by write_checksummed, verifies the checksum and
// returns the payload without the checksum line.
std::string read_checksummed(const std::string& path);

}  // namespace canids::textio
