#include "canids/traffic_sim.hpp"

#include <algorithm>
#include <stdexcept>

namespace canids {

namespace {

void validate_schedule(const AttackSchedule& s, Label expected) {
    if (s.attack != expected) throw std::runtime_error("schedule attack class does not match injector");
    if (!(s.rate_per_s > 0)) throw std::runtime_error("injection rate must be positive");
    if (!(s.stop_s > s.start_s)) throw std::runtime_error("schedule stop must be after start");
}

// Clip an attack window to the span of a nonempty benign stream. An empty
// stream keeps the schedule as-is (pure attack stream).
struct Window {
    double start, stop;
    bool clipped = false;
};

Window effective_window(const std::vector<CanFrame>& stream, const AttackSchedule& s) {
    Window w{s.start_s, s.stop_s, false};
    if (stream.empty()) return w;
    double lo = stream.front().timestamp;
    double hi = stream.back().timestamp;
    if (w.start < lo) { w.start = lo; w.clipped = true; }
    if (w.stop > hi) { w.stop = hi; w.clipped = true; }
    return w;
}

// Merge keeps the benign frame first on timestamp ties.
std::vector<CanFrame> merge_streams(std::vector<CanFrame> benign, std::vector<CanFrame> injected) {
    std::vector<CanFrame> out;
    out.reserve(benign.size() + injected.size());
    std::merge(benign.begin(), benign.end(), injected.begin(), injected.end(), std::back_inserter(out),
               [](const CanFrame& a, const CanFrame& b) { return a.timestamp < b.timestamp; });
    return out;
}

}  // namespace

BenignProfile default_profile(std::uint64_t seed) {
    BenignProfile p;
    p.seed = seed;
    auto msg = [](std::uint16_t id, double period, std::array<ByteKind, 8> kinds,
                  std::array<std::uint8_t, 8> init) {
        PeriodicMessage m;
        m.can_id = id;
        m.period_s = period;
        m.kinds = kinds;
        m.initial = init;
        return m;
    };
    using K = ByteKind;
    // Rough mix of powertrain-style fast IDs and slower body IDs, ~440 fps.
    p.messages.push_back(msg(0x130, 0.010,
                             {K::Counter, K::Sensor, K::Sensor, K::Fixed, K::Fixed, K::Fixed, K::Fixed, K::Counter},
                             {0x00, 0x40, 0x80, 0x22, 0x00, 0x00, 0x00, 0x00}));
    p.messages.push_back(msg(0x131, 0.010,
                             {K::Sensor, K::Sensor, K::Fixed, K::Fixed, K::Counter, K::Fixed, K::Fixed, K::Fixed},
                             {0x60, 0x60, 0x05, 0x00, 0x00, 0x00, 0x00, 0x00}));
    p.messages.push_back(msg(0x316, 0.010,
                             {K::Counter, K::Sensor, K::Sensor, K::Fixed, K::Fixed, K::Fixed, K::Fixed, K::Fixed},
                             {0x00, 0x80, 0x80, 0x10, 0x00, 0x00, 0x00, 0x00}));
    p.messages.push_back(msg(0x1f1, 0.020,
                             {K::Fixed, K::Sensor, K::Counter, K::Fixed, K::Fixed, K::Sensor, K::Fixed, K::Fixed},
                             {0x01, 0x30, 0x00, 0x00, 0x00, 0xa0, 0x00, 0x00}));
    p.messages.push_back(msg(0x260, 0.020,
                             {K::Sensor, K::Fixed, K::Fixed, K::Counter, K::Sensor, K::Fixed, K::Fixed, K::Fixed},
                             {0x90, 0x12, 0x34, 0x00, 0x50, 0x00, 0x00, 0x00}));
    p.messages.push_back(msg(0x2c0, 0.050,
                             {K::Counter, K::Fixed, K::Sensor, K::Fixed, K::Fixed, K::Fixed, K::Sensor, K::Fixed},
                             {0x00, 0x7f, 0x20, 0x00, 0x00, 0x11, 0x66, 0x00}));
    p.messages.push_back(msg(0x43f, 0.100,
                             {K::Fixed, K::Counter, K::Fixed, K::Sensor, K::Fixed, K::Fixed, K::Fixed, K::Fixed},
                             {0x08, 0x00, 0x44, 0x70, 0x00, 0x00, 0x00, 0x00}));
    p.messages.push_back(msg(0x545, 0.100,
                             {K::Sensor, K::Fixed, K::Counter, K::Fixed, K::Sensor, K::Fixed, K::Fixed, K::Fixed},
                             {0x3c, 0x00, 0x00, 0x09, 0xc8, 0x00, 0x00, 0x00}));
    return p;
}

std::vector<CanFrame> gen_benign(const BenignProfile& profile, double duration_s) {
    if (profile.messages.empty()) throw std::runtime_error("benign profile has no messages");
    if (!(duration_s > 0)) throw std::runtime_error("duration must be positive");
    for (const auto& m : profile.messages) {
        if (m.can_id >= 0x800) throw std::runtime_error("profile ID out of 11-bit range");
        if (!(m.period_s > 0)) throw std::runtime_error("profile period must be positive");
        if (m.dlc > 8) throw std::runtime_error("profile DLC > 8");
    }

    std::vector<CanFrame> out;
    for (std::size_t mi = 0; mi < profile.messages.size(); ++mi) {
        const auto& m = profile.messages[mi];
        // Per-message stream so one message's draw count cannot shift another's.
        Rng rng(profile.seed + 0x9e3779b97f4a7c15ULL * (mi + 1));
        double phase = rng.uniform(0.0, m.period_s);
        std::array<std::uint8_t, 8> cur = m.initial;
        for (double t = phase; t < duration_s; t += m.period_s) {
            CanFrame f;
            f.timestamp = t;
            f.can_id = m.can_id;
            f.dlc = m.dlc;
            f.label = Label::Benign;
            for (int i = 0; i < m.dlc; ++i) {
                f.payload[static_cast<std::size_t>(i)] = cur[static_cast<std::size_t>(i)];
            }
            out.push_back(f);
            // Advance generators after emitting.
            for (int i = 0; i < 8; ++i) {
                auto idx = static_cast<std::size_t>(i);
                switch (m.kinds[idx]) {
                    case ByteKind::Counter:
                        cur[idx] = static_cast<std::uint8_t>(cur[idx] + 1);
                        break;
                    case ByteKind::Sensor: {
                        int step = static_cast<int>(rng.range(-m.sensor_step, m.sensor_step));
                        int v = static_cast<int>(cur[idx]) + step;
                        cur[idx] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
                        break;
                    }
                    case ByteKind::Fixed:
                        break;
                }
            }
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const CanFrame& a, const CanFrame& b) { return a.timestamp < b.timestamp; });
    return out;
}

SimResult inject_dos(std::vector<CanFrame> stream, const AttackSchedule& sched) {
    validate_schedule(sched, Label::DoS);
    SimResult r;
    Window w = effective_window(stream, sched);
    if (w.clipped) r.warnings.push_back("attack window clipped to stream span; partial injection");

    std::vector<CanFrame> inj;
    const double period = 1.0 / sched.rate_per_s;
    // Flood phase stays anchored at the scheduled start.
    for (std::uint64_t k = 0;; ++k) {
        double t = sched.start_s + static_cast<double>(k) * period;
        if (t >= w.stop) break;
        if (t < w.start) continue;
        CanFrame f;
        f.timestamp = t;
        f.can_id = sched.dos_id;
        f.dlc = 8;
        f.label = Label::DoS;
        inj.push_back(f);
    }
    r.frames = merge_streams(std::move(stream), std::move(inj));
    return r;
}

SimResult inject_fuzzing(std::vector<CanFrame> stream, const AttackSchedule& sched) {
    validate_schedule(sched, Label::Fuzzing);
    SimResult r;
    Window w = effective_window(stream, sched);
    if (w.clipped) r.warnings.push_back("attack window clipped to stream span; partial injection");

    Rng rng(sched.seed);
    std::vector<CanFrame> inj;
    const double mean = 1.0 / sched.rate_per_s;
    for (double t = sched.start_s + rng.exponential(mean); t < w.stop; t += rng.exponential(mean)) {
        CanFrame f;
        f.timestamp = t;
        f.can_id = static_cast<std::uint16_t>(rng.below(0x800));
        f.dlc = 8;
        for (auto& b : f.payload) b = rng.byte();
        f.label = Label::Fuzzing;
        if (t >= w.start) inj.push_back(f);
    }
    r.frames = merge_streams(std::move(stream), std::move(inj));
    return r;
}

SimResult inject_spoof(std::vector<CanFrame> stream, const AttackSchedule& sched) {
    validate_schedule(sched, Label::SpoofRPM);
    bool known = std::any_of(stream.begin(), stream.end(),
                             [&](const CanFrame& f) { return f.can_id == sched.spoof_target_id; });
    if (!known) throw std::runtime_error("spoof target ID not present in benign stream");

    SimResult r;
    Window w = effective_window(stream, sched);
    if (w.clipped) r.warnings.push_back("attack window clipped to stream span; partial injection");

    std::vector<CanFrame> inj;
    const double period = 1.0 / sched.rate_per_s;
    for (std::uint64_t k = 0;; ++k) {
        double t = sched.start_s + static_cast<double>(k) * period;
        if (t >= w.stop) break;
        if (t < w.start) continue;
        CanFrame f;
        f.timestamp = t;
        f.can_id = sched.spoof_target_id;
        f.dlc = 8;
        f.payload = sched.spoof_payload;
        f.label = Label::SpoofRPM;
        inj.push_back(f);
    }
    r.frames = merge_streams(std::move(stream), std::move(inj));
    return r;
}

}  // namespace canids
