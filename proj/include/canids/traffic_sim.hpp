#pragma once

#include "canids/can_frame.hpp"
#include "canids/rng.hpp"

#include <array>
#include <string>
#include <vector>

namespace canids {

// Role of one payload byte in a periodic benign message. Counter bytes
// increment once per transmission, sensor bytes do a bounded random walk,
// fixed bytes keep their initial value.
enum class ByteKind : std::uint8_t { Fixed = 0, Counter = 1, Sensor = 2 };

struct PeriodicMessage {
    std::uint16_t can_id = 0;
    double period_s = 0.010;
    std::uint8_t dlc = 8;
    std::array<ByteKind, 8> kinds{};
    std::array<std::uint8_t, 8> initial{};
    std::uint8_t sensor_step = 3;  // max walk step per transmission
};

struct BenignProfile {
    std::vector<PeriodicMessage> messages;
    std::uint64_t seed = 1;
};

// A small bus with periodic IDs, counters and slowly moving sensor values.
BenignProfile default_profile(std::uint64_t seed);

struct AttackSchedule {
    Label attack = Label::DoS;
    double start_s = 0.0;
    double stop_s = 0.0;
    double rate_per_s = 0.0;  // injected frames per second
    std::uint64_t seed = 0;   // randomness for fuzzing draws
    std::uint16_t dos_id = 0x000;
    std::uint16_t spoof_target_id = 0x316;
    std::array<std::uint8_t, 8> spoof_payload{};
};

struct SimResult {
    std::vector<CanFrame> frames;
    std::vector<std::string> warnings;
};

// Benign stream over [0, duration). (seed, profile) determine the stream
// exactly; messages get a phase offset so transmissions do not all align at 0.
std::vector<CanFrame> gen_benign(const BenignProfile& profile, double duration_s);

// Flood of dos_id frames with an all-zero payload at a fixed period 1/rate.
SimResult inject_dos(std::vector<CanFrame> stream, const AttackSchedule& sched);

// Uniformly random IDs and payloads at exponential inter-arrival times.
SimResult inject_fuzzing(std::vector<CanFrame> stream, const AttackSchedule& sched);

// Legitimate target ID carrying a fixed attacker payload at period 1/rate.
// The target ID must already appear in the stream.
SimResult inject_spoof(std::vector<CanFrame> stream, const AttackSchedule& sched);

}  // namespace canids
