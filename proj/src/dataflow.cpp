#include "canids/dataflow.hpp"

#include "canids/rng.hpp"
#include "textio.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace canids {

namespace {

// Reference channel function of the fake-quant forward pass: activation level
// as a function of the (unmirrored) integer accumulator z. Uses the same
// scalar kernels as forward_infer, so agreement at integer points is exact.
struct ChannelRef {
    double sws, bias, a, b, s_act;
    int hi;

    int level_at(double z) const { return quant_relu_level(infer_preact(sws, bias, a, b, z), s_act, hi); }
};

}  // namespace

ThresholdPipeline streamline(const CqmlpModel& m) {
    if (m.linear.back().out != 4) throw std::runtime_error("model output width must be 4");
    ThresholdPipeline p;
    p.bits = m.bits;
    p.dims = m.dims;
    const int hi = m.act_hi();
    const int n_thresh = hi;  // levels 1..hi each get one threshold

    double max_abs_in = 128.0;  // input bytes are signed 8-bit
    for (int h = 0; h < m.hidden_count(); ++h) {
        auto hidx = static_cast<std::size_t>(h);
        const auto& lin = m.linear[hidx];
        const auto& bn = m.bn[hidx];
        QuantSpec ws = m.weight_spec(h);
        const double sws = m.combined_scale(h);
        std::vector<double> A, B;
        m.bn_affine(h, A, B);

        PipelineLayer layer;
        layer.in = lin.in;
        layer.out = lin.out;
        layer.w.resize(lin.w.size());
        layer.thresholds.assign(static_cast<std::size_t>(lin.out) * static_cast<std::size_t>(n_thresh), 0);

        for (int c = 0; c < lin.out; ++c) {
            auto ci = static_cast<std::size_t>(c);
            if (bn.gamma[ci] == 0.0)
                throw std::runtime_error("streamline: zero batch-norm gamma in layer " + std::to_string(h) +
                                         " channel " + std::to_string(c));
            if (!(bn.running_var[ci] > 0.0))
                throw std::runtime_error("streamline: non-positive running variance in layer " + std::to_string(h) +
                                         " channel " + std::to_string(c));

            // Quantised weight row; a negative folded slope (gamma < 0) is
            // mirrored by negating the row so thresholds stay ascending in z.
            const bool mirror = A[ci] < 0.0;
            long long wsum_abs = 0;
            for (int j = 0; j < lin.in; ++j) {
                int q = quantize_value(lin.w[ci * static_cast<std::size_t>(lin.in) + static_cast<std::size_t>(j)], ws);
                layer.w[ci * static_cast<std::size_t>(lin.in) + static_cast<std::size_t>(j)] =
                    static_cast<std::int32_t>(mirror ? -q : q);
                wsum_abs += std::abs(q);
            }

            // Accumulator domain bound for this channel.
            const long long M = wsum_abs * static_cast<long long>(std::llround(max_abs_in));
            const double slope = std::abs(A[ci]) * sws;
            const double d = A[ci] * lin.b[ci] + B[ci];
            ChannelRef ref{sws, lin.b[ci], A[ci], B[ci], m.act_scale[hidx], hi};

            // g(t) = activation level as a function of the (possibly
            // mirrored) accumulator t; non-decreasing by construction.
            auto g = [&](long long t) { return ref.level_at(static_cast<double>(mirror ? -t : t)); };

            for (int k = 1; k <= n_thresh; ++k) {
                long long T;
                if (g(M) < k) {
                    T = M + 1;  // level k unreachable on this channel
                } else if (g(-M) >= k) {
                    T = -M;  // whole domain already at or above level k
                } else {
                    // Analytic solution of slope*t + d >= s_act*(k - 0.5),
                    // then verified (and if needed repaired) against g.
                    double arg = (m.act_scale[hidx] * (static_cast<double>(k) - 0.5) - d) / slope;
                    long long guess = 0;
                    bool have_guess = false;
                    if (std::isfinite(arg) && std::abs(arg) <= static_cast<double>(M)) {
                        guess = static_cast<long long>(std::ceil(arg));
                        for (int step = 0; step < 2 && guess > -M && g(guess - 1) >= k; ++step) --guess;
                        for (int step = 0; step < 2 && guess <= M && g(guess) < k; ++step) ++guess;
                        have_guess = true;
                    }
                    if (have_guess && guess > -M && guess <= M && g(guess) >= k && g(guess - 1) < k) {
                        T = guess;
                    } else {
                        // Monotone bisection: g(lo) < k <= g(hi).
                        long long lo = -M, hi_t = M;
                        while (hi_t - lo > 1) {
                            long long mid = lo + (hi_t - lo) / 2;
                            if (g(mid) >= k) hi_t = mid;
                            else lo = mid;
                        }
                        T = hi_t;
                    }
                }
                layer.thresholds[ci * static_cast<std::size_t>(n_thresh) + static_cast<std::size_t>(k - 1)] =
                    static_cast<std::int32_t>(std::clamp<long long>(T, INT32_MIN, INT32_MAX));
            }
        }
        p.hidden.push_back(std::move(layer));
        max_abs_in = static_cast<double>(hi);
    }

    const auto& lin = m.linear.back();
    const auto ol = static_cast<int>(m.linear.size() - 1);
    QuantSpec ws = m.weight_spec(ol);
    p.output.in = lin.in;
    p.output.out = lin.out;
    p.output.scale = m.combined_scale(ol);
    p.output.offset = lin.b;
    p.output.w.resize(lin.w.size());
    for (std::size_t k = 0; k < lin.w.size(); ++k)
        p.output.w[k] = static_cast<std::int32_t>(quantize_value(lin.w[k], ws));
    return p;
}

Label run_int(const ThresholdPipeline& p, std::span<const std::int8_t> block, IntTrace* trace) {
    if (block.size() != static_cast<std::size_t>(p.dims.front()))
        throw std::runtime_error("block length does not match pipeline input width");
    const int n_thresh = p.levels_per_channel();

    std::vector<std::int32_t> lev(block.begin(), block.end());
    std::vector<std::int32_t> nxt;
    if (trace) trace->levels.assign(p.hidden.size(), {});

    for (std::size_t h = 0; h < p.hidden.size(); ++h) {
        const auto& layer = p.hidden[h];
        const auto in = static_cast<std::size_t>(layer.in);
        nxt.assign(static_cast<std::size_t>(layer.out), 0);
        for (int c = 0; c < layer.out; ++c) {
            const std::int32_t* wrow = layer.w.data() + static_cast<std::size_t>(c) * in;
            std::int32_t acc = 0;
            for (std::size_t j = 0; j < in; ++j) acc += wrow[j] * lev[j];
            const std::int32_t* th =
                layer.thresholds.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(n_thresh);
            // Number of thresholds <= acc (thresholds ascend).
            int level = static_cast<int>(std::upper_bound(th, th + n_thresh, acc) - th);
            nxt[static_cast<std::size_t>(c)] = level;
        }
        lev.swap(nxt);
        if (trace) {
            trace->levels[h].assign(lev.begin(), lev.end());
        }
    }

    std::array<double, 4> logits{};
    const auto in = static_cast<std::size_t>(p.output.in);
    for (int c = 0; c < p.output.out; ++c) {
        const std::int32_t* wrow = p.output.w.data() + static_cast<std::size_t>(c) * in;
        std::int32_t acc = 0;
        for (std::size_t j = 0; j < in; ++j) acc += wrow[j] * lev[j];
        logits[static_cast<std::size_t>(c)] =
            output_logit(p.output.scale, p.output.offset[static_cast<std::size_t>(c)], static_cast<double>(acc));
    }
    if (trace) trace->logits = logits;
    return static_cast<Label>(argmax4(logits));
}

EquivalenceReport check_equivalence(const CqmlpModel& m, const ThresholdPipeline& p, std::uint64_t n_blocks,
                                    std::uint64_t seed) {
    EquivalenceReport rep;
    Rng rng(seed);
    std::vector<std::int8_t> block(static_cast<std::size_t>(m.dims.front()));
    IntTrace trace;
    for (std::uint64_t i = 0; i < n_blocks; ++i) {
        for (auto& v : block) v = static_cast<std::int8_t>(static_cast<int>(rng.below(256)) - 128);
        InferResult ref = forward_infer(m, block, RunMode::FakeQuant);
        Label got = run_int(p, block, &trace);
        ++rep.checked;

        bool ok = got == ref.predicted;
        std::string why;
        for (std::size_t h = 0; ok && h < trace.levels.size(); ++h) {
            for (std::size_t c = 0; c < trace.levels[h].size(); ++c) {
                if (trace.levels[h][c] != ref.act_levels[h][c]) {
                    ok = false;
                    why = "layer " + std::to_string(h) + " channel " + std::to_string(c) + ": pipeline level " +
                          std::to_string(trace.levels[h][c]) + " vs forward level " +
                          std::to_string(ref.act_levels[h][c]);
                    break;
                }
            }
        }
        if (!ok) {
            if (rep.mismatches == 0) {
                rep.first_bad_block.assign(block.begin(), block.end());
                rep.detail = why.empty() ? std::string("predicted class differs: pipeline ") +
                                               label_name(got) + " vs forward " + label_name(ref.predicted)
                                         : why;
            }
            ++rep.mismatches;
        }
    }
    return rep;
}

namespace {

BenchReport summarize(BenchMode mode, std::vector<double>& lat_us, double wall_s) {
    BenchReport r;
    r.mode = mode;
    r.items = lat_us.size();
    r.wall_s = wall_s;
    if (lat_us.empty()) return r;
    double sum = 0.0;
    for (double v : lat_us) sum += v;
    r.mean_us = sum / static_cast<double>(lat_us.size());
    std::sort(lat_us.begin(), lat_us.end());
    auto at_quantile = [&](double q) {
        auto idx = static_cast<std::size_t>(std::llround(q * static_cast<double>(lat_us.size() - 1)));
        return lat_us[std::min(idx, lat_us.size() - 1)];
    };
    r.median_us = at_quantile(0.5);
    r.p99_us = at_quantile(0.99);
    if (wall_s > 0) r.throughput_per_s = static_cast<double>(r.items) / wall_s;
    return r;
}

}  // namespace

BenchReport bench_blocks(const ThresholdPipeline& p, std::span<const FeatureBlock> blocks) {
    using clock = std::chrono::steady_clock;
    std::vector<double> lat_us;
    lat_us.reserve(blocks.size());
    const auto t0 = clock::now();
    for (const auto& b : blocks) {
        const auto s = clock::now();
        volatile Label l = run_int(p, b.data);
        (void)l;
        const auto e = clock::now();
        lat_us.push_back(std::chrono::duration<double, std::micro>(e - s).count());
    }
    const auto t1 = clock::now();
    return summarize(BenchMode::PerBlock, lat_us, std::chrono::duration<double>(t1 - t0).count());
}

BenchReport bench_stream(const ThresholdPipeline& p, std::span<const CanFrame> frames) {
    using clock = std::chrono::steady_clock;
    if (p.dims.front() != kBlockBytes)
        throw std::runtime_error("sliding-window bench needs a 40-byte-input pipeline");

    std::array<EncodedMessage, kWindow> ring{};
    std::array<std::int8_t, kBlockBytes> block{};
    std::size_t filled = 0;
    std::vector<double> lat_us;
    if (frames.size() >= kWindow) lat_us.reserve(frames.size() - (kWindow - 1));

    const auto t0 = clock::now();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto s = clock::now();
        ring[i % kWindow] = encode_frame(frames[i]);
        if (filled < kWindow) ++filled;
        if (filled == kWindow) {
            // Oldest message first: window covers frames [i-3, i].
            for (std::size_t k = 0; k < kWindow; ++k) {
                const auto& e = ring[(i + 1 + k) % kWindow];
                for (int j = 0; j < kMsgBytes; ++j)
                    block[k * kMsgBytes + static_cast<std::size_t>(j)] = static_cast<std::int8_t>(e[static_cast<std::size_t>(j)]);
            }
            volatile Label l = run_int(p, block);
            (void)l;
            const auto e = clock::now();
            lat_us.push_back(std::chrono::duration<double, std::micro>(e - s).count());
        }
    }
    const auto t1 = clock::now();
    return summarize(BenchMode::PerMessageSliding, lat_us, std::chrono::duration<double>(t1 - t0).count());
}

void save_pipeline(const ThresholdPipeline& p, const std::string& path) {
    std::ostringstream out;
    out << "canids-pipeline v1\n";
    out << "bits " << p.bits << '\n';
    out << "dims";
    for (int d : p.dims) out << ' ' << d;
    out << '\n';
    const int n_thresh = p.levels_per_channel();
    for (std::size_t h = 0; h < p.hidden.size(); ++h) {
        const auto& layer = p.hidden[h];
        out << "layer " << h << ' ' << layer.in << ' ' << layer.out << '\n';
        out << "w\n";
        for (int c = 0; c < layer.out; ++c) {
            for (int j = 0; j < layer.in; ++j) {
                if (j) out << ' ';
                out << layer.w[static_cast<std::size_t>(c) * static_cast<std::size_t>(layer.in) + static_cast<std::size_t>(j)];
            }
            out << '\n';
        }
        out << "thresholds\n";
        for (int c = 0; c < layer.out; ++c) {
            for (int k = 0; k < n_thresh; ++k) {
                if (k) out << ' ';
                out << layer.thresholds[static_cast<std::size_t>(c) * static_cast<std::size_t>(n_thresh) + static_cast<std::size_t>(k)];
            }
            out << '\n';
        }
    }
    out << "output " << p.output.in << ' ' << p.output.out << '\n';
    out << "scale " << textio::double_hex(p.output.scale) << '\n';
    out << "offset";
    for (double v : p.output.offset) out << ' ' << textio::double_hex(v);
    out << '\n';
    out << "w\n";
    for (int c = 0; c < p.output.out; ++c) {
        for (int j = 0; j < p.output.in; ++j) {
            if (j) out << ' ';
            out << p.output.w[static_cast<std::size_t>(c) * static_cast<std::size_t>(p.output.in) + static_cast<std::size_t>(j)];
        }
        out << '\n';
    }
    textio::write_checksummed(path, out.str());
}

ThresholdPipeline load_pipeline(const std::string& path) {
    const std::string payload = textio::read_checksummed(path);
    std::istringstream in(payload);
    auto word = [&in, &path]() {
        std::string t;
        if (!(in >> t)) throw std::runtime_error(path + ": pipeline file truncated");
        return t;
    };
    auto expect = [&](const char* kw) {
        std::string t = word();
        if (t != kw) throw std::runtime_error(path + ": expected '" + kw + "', got '" + t + "'");
    };
    auto integer = [&]() {
        std::string t = word();
        try {
            std::size_t pos = 0;
            long long v = std::stoll(t, &pos);
            if (pos != t.size()) throw std::invalid_argument(t);
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error(path + ": bad integer '" + t + "'");
        }
    };

    ThresholdPipeline p;
    expect("canids-pipeline");
    expect("v1");
    expect("bits");
    p.bits = static_cast<int>(integer());
    if (p.bits < 2 || p.bits > 8) throw std::runtime_error(path + ": bad bits");
    expect("dims");
    std::string tok;
    for (;;) {
        tok = word();
        if (tok == "layer" || tok == "output") break;
        try {
            std::size_t pos = 0;
            int v = std::stoi(tok, &pos);
            if (pos != tok.size()) throw std::invalid_argument(tok);
            p.dims.push_back(v);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ": bad dim '" + tok + "'");
        }
    }
    if (p.dims.size() < 2) throw std::runtime_error(path + ": missing dims");

    const int n_thresh = p.levels_per_channel();
    while (tok == "layer") {
        auto idx = integer();
        if (idx != static_cast<long long>(p.hidden.size())) throw std::runtime_error(path + ": layer index mismatch");
        PipelineLayer layer;
        layer.in = static_cast<int>(integer());
        layer.out = static_cast<int>(integer());
        if (layer.in <= 0 || layer.out <= 0) throw std::runtime_error(path + ": bad layer shape");
        expect("w");
        layer.w.resize(static_cast<std::size_t>(layer.in) * static_cast<std::size_t>(layer.out));
        for (auto& v : layer.w) v = static_cast<std::int32_t>(integer());
        expect("thresholds");
        layer.thresholds.resize(static_cast<std::size_t>(layer.out) * static_cast<std::size_t>(n_thresh));
        for (auto& v : layer.thresholds) v = static_cast<std::int32_t>(integer());
        for (int c = 0; c < layer.out; ++c) {
            const auto* th = layer.thresholds.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(n_thresh);
            if (!std::is_sorted(th, th + n_thresh)) throw std::runtime_error(path + ": thresholds not ascending");
        }
        p.hidden.push_back(std::move(layer));
        tok = word();
    }
    if (tok != "output") throw std::runtime_error(path + ": missing output layer");
    p.output.in = static_cast<int>(integer());
    p.output.out = static_cast<int>(integer());
    if (p.output.in <= 0 || p.output.out != 4) throw std::runtime_error(path + ": bad output shape");
    expect("scale");
    p.output.scale = textio::hex_double(word());
    expect("offset");
    p.output.offset.resize(static_cast<std::size_t>(p.output.out));
    for (auto& v : p.output.offset) v = textio::hex_double(word());
    expect("w");
    p.output.w.resize(static_cast<std::size_t>(p.output.in) * static_cast<std::size_t>(p.output.out));
    for (auto& v : p.output.w) v = static_cast<std::int32_t>(integer());
    return p;
}

}  // namespace canids
