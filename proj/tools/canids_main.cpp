// Command line front end: synthetic capture generation, capture ingestion,
// training, evaluation, threshold-pipeline export, benchmarking and the
// arithmetic cost model. Every produced file gets a JSON manifest sidecar.

#include "canids/can_frame.hpp"
#include "canids/cqmlp.hpp"
#include "canids/dataflow.hpp"
#include "canids/evalkit.hpp"
#include "canids/feature.hpp"
#include "canids/manifest.hpp"
#include "canids/traffic_sim.hpp"
#include "canids/training.hpp"
#include "canids/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

using canids::Label;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::vector<std::string> g_argv;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Settings precedence: command-line flag, then config file value, then the
// built-in default the variable already holds.
json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    json j = json::parse(in, nullptr, true, true);  // allow comments
    if (!j.is_object()) throw std::runtime_error(path + ": config must be a JSON object");
    return j;
}

template <class T>
void from_cfg(const json& cfg, const CLI::Option* opt, const char* key, T& value) {
    if (opt != nullptr && opt->count() > 0) return;
    auto it = cfg.find(key);
    if (it == cfg.end()) return;
    try {
        value = it->get<T>();
    } catch (const json::exception&) {
        throw std::runtime_error(std::string("config key '") + key + "' has the wrong type");
    }
}

std::uint16_t parse_can_id(const std::string& s) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
        v = std::stoul(s, &pos, 0);  // 0x..=hex, 0..=octal, else decimal
    } catch (const std::exception&) {
        throw std::runtime_error("bad CAN id '" + s + "'");
    }
    if (pos != s.size() || v >= 0x800) throw std::runtime_error("bad CAN id '" + s + "' (need value below 0x800)");
    return static_cast<std::uint16_t>(v);
}

std::array<std::uint8_t, 8> parse_payload_hex(const std::string& s) {
    if (s.size() != 16) throw std::runtime_error("payload must be 16 hex digits, got '" + s + "'");
    std::array<std::uint8_t, 8> out{};
    for (int i = 0; i < 8; ++i) {
        auto nib = [&](char c) -> int {
            if (c >= '0' && c <= '9') return c - '0';
            if (c >= 'a' && c <= 'f') return c - 'a' + 10;
            if (c >= 'A' && c <= 'F') return c - 'A' + 10;
            throw std::runtime_error("payload must be 16 hex digits, got '" + s + "'");
        };
        out[static_cast<std::size_t>(i)] =
            static_cast<std::uint8_t>(nib(s[static_cast<std::size_t>(2 * i)]) * 16 + nib(s[static_cast<std::size_t>(2 * i + 1)]));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& s, const char* what) {
    std::vector<int> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stoi(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw std::runtime_error(std::string("bad ") + what + " list '" + s + "'");
        }
    }
    if (out.empty()) throw std::runtime_error(std::string("empty ") + what + " list");
    return out;
}

std::vector<double> parse_double_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw std::runtime_error(std::string("bad ") + what + " list '" + s + "'");
        }
    }
    if (out.empty()) throw std::runtime_error(std::string("empty ") + what + " list");
    return out;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

void emit_manifest(const std::string& command, const json& config, std::uint64_t seed,
                   std::vector<std::string> inputs, std::vector<std::string> outputs, double wall_s) {
    canids::RunManifest m;
    m.command = command;
    m.argv = g_argv;
    m.config_json = config.dump();
    m.seed = seed;
    m.inputs = std::move(inputs);
    m.outputs = std::move(outputs);
    m.tool_version = canids::kToolVersion;
    m.wall_s = wall_s;
    for (const auto& out : m.outputs) canids::write_manifest(m, canids::manifest_path_for(out));
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

// ---- simulate --------------------------------------------------------------

struct SimulateOpts {
    std::string out, config;
    double duration = 60.0;
    std::uint64_t seed = 1;
    std::string attack = "benign";
    double attack_start = 10.0, attack_stop = 30.0, rate = 100.0;
    std::uint64_t attack_seed = 2;
    std::string dos_id = "0x000";
    std::string spoof_target = "0x316";
    std::string spoof_payload = "0521687f21210000";
};

void run_simulate(const SimulateOpts& o, Clock::time_point t0) {
    canids::BenignProfile profile = canids::default_profile(o.seed);
    std::vector<canids::CanFrame> frames = canids::gen_benign(profile, o.duration);

    if (o.attack != "benign") {
        canids::AttackSchedule sched;
        sched.attack = canids::label_from_name(o.attack);
        sched.start_s = o.attack_start;
        sched.stop_s = o.attack_stop;
        sched.rate_per_s = o.rate;
        sched.seed = o.attack_seed;
        sched.dos_id = parse_can_id(o.dos_id);
        sched.spoof_target_id = parse_can_id(o.spoof_target);
        sched.spoof_payload = parse_payload_hex(o.spoof_payload);

        canids::SimResult res;
        switch (sched.attack) {
            case Label::DoS: res = canids::inject_dos(std::move(frames), sched); break;
            case Label::Fuzzing: res = canids::inject_fuzzing(std::move(frames), sched); break;
            case Label::SpoofRPM: res = canids::inject_spoof(std::move(frames), sched); break;
            default: throw std::runtime_error("unknown attack '" + o.attack + "'");
        }
        print_warnings(res.warnings);
        frames = std::move(res.frames);
    }

    canids::write_capture(o.out, frames);
    canids::CaptureStats st = canids::capture_stats(frames);
    std::printf("wrote %s: %llu frames (%.3f s, %.1f frames/s)\n", o.out.c_str(),
                static_cast<unsigned long long>(st.total), st.duration_s, st.frames_per_s);
    for (int c = 0; c < canids::kNumClasses; ++c) {
        auto n = st.per_label[static_cast<std::size_t>(c)];
        if (n > 0)
            std::printf("  %s: %llu\n", canids::label_name(static_cast<Label>(c)), static_cast<unsigned long long>(n));
    }

    json cfg{{"duration", o.duration}, {"seed", o.seed}, {"attack", o.attack}};
    if (o.attack != "benign") {
        cfg["attack_start"] = o.attack_start;
        cfg["attack_stop"] = o.attack_stop;
        cfg["rate"] = o.rate;
        cfg["attack_seed"] = o.attack_seed;
        if (o.attack == "dos") cfg["dos_id"] = o.dos_id;
        if (o.attack == "spoof-rpm") {
            cfg["spoof_target"] = o.spoof_target;
            cfg["spoof_payload"] = o.spoof_payload;
        }
    }
    emit_manifest("simulate", cfg, o.seed, {}, {o.out}, seconds_since(t0));
}

// ---- ingest ----------------------------------------------------------------

struct IngestOpts {
    std::vector<std::string> inputs;
    std::vector<std::string> classes;
    std::string config;
    bool lenient = false;
    int stride = canids::kWindow;
    std::string blocks_out, split_prefix, ratios = "85,10,5";
    std::uint64_t split_seed = 1;
};

void run_ingest(const IngestOpts& o, Clock::time_point t0) {
    if (o.blocks_out.empty() && o.split_prefix.empty())
        throw std::runtime_error("ingest needs --blocks-out and/or --split-prefix");
    std::vector<Label> classes;
    if (o.classes.empty()) {
        classes.assign(o.inputs.size(), Label::Benign);
    } else if (o.classes.size() == 1) {
        classes.assign(o.inputs.size(), canids::label_from_name(o.classes.front()));
    } else if (o.classes.size() == o.inputs.size()) {
        for (const auto& c : o.classes) classes.push_back(canids::label_from_name(c));
    } else {
        throw std::runtime_error("--class count must be 1 or match --in count");
    }

    std::vector<canids::FeatureBlock> blocks;
    const auto mode = o.lenient ? canids::ParseMode::Lenient : canids::ParseMode::Strict;
    for (std::size_t i = 0; i < o.inputs.size(); ++i) {
        canids::Capture cap = canids::read_capture(o.inputs[i], classes[i], mode);
        print_warnings(cap.warnings);
        auto file_blocks = canids::build_blocks(cap.frames, canids::kWindow, o.stride);
        std::printf("%s: %zu frames -> %zu blocks\n", o.inputs[i].c_str(), cap.frames.size(), file_blocks.size());
        blocks.insert(blocks.end(), file_blocks.begin(), file_blocks.end());
    }
    std::printf("total blocks: %zu\n", blocks.size());

    std::vector<std::string> outputs;
    if (!o.blocks_out.empty()) {
        canids::write_blocks(o.blocks_out, blocks);
        outputs.push_back(o.blocks_out);
    }
    if (!o.split_prefix.empty()) {
        auto r = parse_int_list(o.ratios, "ratio");
        if (r.size() != 3) throw std::runtime_error("--ratios needs three comma-separated percentages");
        canids::SplitRatios ratios{r[0], r[1], r[2]};
        canids::DatasetSplit split = canids::split_dataset(blocks, ratios, o.split_seed);
        const std::string tr = o.split_prefix + ".train.blk";
        const std::string va = o.split_prefix + ".val.blk";
        const std::string te = o.split_prefix + ".test.blk";
        canids::write_blocks(tr, split.train);
        canids::write_blocks(va, split.val);
        canids::write_blocks(te, split.test);
        std::printf("split %zu/%zu/%zu -> %s {train,val,test}.blk\n", split.train.size(), split.val.size(),
                    split.test.size(), o.split_prefix.c_str());
        outputs.insert(outputs.end(), {tr, va, te});
    }

    json cfg{{"inputs", o.inputs},
             {"classes", o.classes},
             {"lenient", o.lenient},
             {"stride", o.stride},
             {"ratios", o.ratios},
             {"split_seed", o.split_seed}};
    emit_manifest("ingest", cfg, o.split_seed, o.inputs, outputs, seconds_since(t0));
}

// ---- train -----------------------------------------------------------------

struct TrainOpts {
    std::string train_path, val_path, out, loss_csv, config;
    std::string dims = "40,256,128,64,32,4";
    int bits = 2;
    int epochs = 50;
    int batch = 128;
    double lr = 1e-4;
    std::uint64_t seed = 1;
};

void run_train(const TrainOpts& o, Clock::time_point t0) {
    canids::TrainConfig cfg;
    cfg.dims = parse_int_list(o.dims, "dims");
    cfg.bits = o.bits;
    cfg.epochs = o.epochs;
    cfg.batch = o.batch;
    cfg.lr = o.lr;
    cfg.seed = o.seed;

    canids::DatasetSplit data;
    data.train = canids::read_blocks(o.train_path);
    data.val = canids::read_blocks(o.val_path);
    data.seed = o.seed;
    std::printf("training on %zu blocks, validating on %zu (bits=%d, epochs=%d)\n", data.train.size(),
                data.val.size(), cfg.bits, cfg.epochs);

    canids::TrainResult res = canids::train_qat(cfg, data);
    canids::save_model(res.model, o.out);
    std::vector<std::string> outputs{o.out};
    if (!o.loss_csv.empty()) {
        canids::export_loss_csv(res.curve, o.loss_csv);
        outputs.push_back(o.loss_csv);
    }
    std::printf("wrote %s: %lld parameters, best epoch %d, best val loss %.6g\n", o.out.c_str(),
                canids::count_params(res.model), res.best_epoch, res.best_val_loss);

    json j{{"dims", o.dims}, {"bits", o.bits},       {"epochs", o.epochs}, {"batch", o.batch},
           {"lr", o.lr},     {"seed", o.seed},       {"train", o.train_path}, {"val", o.val_path}};
    emit_manifest("train", j, o.seed, {o.train_path, o.val_path}, outputs, seconds_since(t0));
}

// ---- eval ------------------------------------------------------------------

struct EvalOpts {
    std::string model, pipeline, data, from_confusion;
    std::string confusion_out, metrics_out, config;
};

void warn_undefined(const canids::MetricsReport& rep) {
    for (const auto& m : rep.per_class) {
        if (!m.precision_defined)
            std::cerr << "warning: precision undefined for " << canids::label_name(m.cls) << " (no predictions)\n";
        if (!m.recall_defined)
            std::cerr << "warning: recall undefined for " << canids::label_name(m.cls) << " (no instances)\n";
    }
    if (!rep.fpr_defined) std::cerr << "warning: false-positive rate undefined (no benign instances)\n";
}

void run_eval(const EvalOpts& o, Clock::time_point t0) {
    const int sources = int(!o.model.empty()) + int(!o.pipeline.empty()) + int(!o.from_confusion.empty());
    if (sources != 1) throw std::runtime_error("eval needs exactly one of --model, --pipeline, --from-confusion");
    if (!o.from_confusion.empty() && !o.data.empty())
        throw std::runtime_error("--from-confusion does not take --data");

    canids::ConfusionMatrix cm;
    std::vector<std::string> inputs;
    if (!o.from_confusion.empty()) {
        std::ifstream in(o.from_confusion, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + o.from_confusion);
        std::stringstream buf;
        buf << in.rdbuf();
        cm = canids::parse_confusion_csv(buf.str());
        inputs.push_back(o.from_confusion);
    } else {
        if (o.data.empty()) throw std::runtime_error("eval needs --data with --model or --pipeline");
        std::vector<canids::FeatureBlock> blocks = canids::read_blocks(o.data);
        if (blocks.empty()) throw std::runtime_error(o.data + ": no blocks");
        std::vector<Label> truth, pred;
        truth.reserve(blocks.size());
        for (const auto& b : blocks) truth.push_back(b.label);
        if (!o.model.empty()) {
            canids::CqmlpModel m = canids::load_model(o.model);
            pred = canids::predict(m, blocks, canids::RunMode::FakeQuant);
            inputs.push_back(o.model);
        } else {
            canids::ThresholdPipeline p = canids::load_pipeline(o.pipeline);
            pred.reserve(blocks.size());
            for (const auto& b : blocks) pred.push_back(canids::run_int(p, b.data));
            inputs.push_back(o.pipeline);
        }
        inputs.push_back(o.data);
        cm = canids::confusion(truth, pred);
    }

    canids::MetricsReport rep = canids::compute_metrics(cm);
    std::fputs(canids::metrics_table(rep).c_str(), stdout);
    warn_undefined(rep);

    std::vector<std::string> outputs;
    if (!o.confusion_out.empty()) {
        write_text_file(o.confusion_out, canids::confusion_csv(cm));
        outputs.push_back(o.confusion_out);
    }
    if (!o.metrics_out.empty()) {
        write_text_file(o.metrics_out, canids::metrics_csv(rep));
        outputs.push_back(o.metrics_out);
    }

    json cfg{{"model", o.model},
             {"pipeline", o.pipeline},
             {"data", o.data},
             {"from_confusion", o.from_confusion}};
    emit_manifest("eval", cfg, 0, inputs, outputs, seconds_since(t0));
}

// ---- streamline ------------------------------------------------------------

struct StreamlineOpts {
    std::string model, out, config;
    std::uint64_t check_blocks = 1000;
    std::uint64_t check_seed = 7;
};

void run_streamline(const StreamlineOpts& o, Clock::time_point t0) {
    canids::CqmlpModel m = canids::load_model(o.model);
    canids::ThresholdPipeline p = canids::streamline(m);

    canids::EquivalenceReport rep = canids::check_equivalence(m, p, o.check_blocks, o.check_seed);
    if (rep.mismatches != 0) {
        std::cerr << "error: pipeline disagrees with the reference forward pass on " << rep.mismatches << " of "
                  << rep.checked << " random blocks\n";
        std::cerr << "  " << rep.detail << '\n';
        std::cerr << "  first failing block:";
        char buf[8];
        for (auto v : rep.first_bad_block) {
            std::snprintf(buf, sizeof buf, " %02x", static_cast<unsigned>(static_cast<std::uint8_t>(v)));
            std::cerr << buf;
        }
        std::cerr << "\nno output written\n";
        throw std::runtime_error("streamline self-check failed");
    }

    canids::save_pipeline(p, o.out);
    std::size_t thresholds = 0;
    for (const auto& layer : p.hidden) thresholds += layer.thresholds.size();
    std::printf("wrote %s: %zu hidden layers, %zu thresholds, self-check %llu/%llu blocks exact\n", o.out.c_str(),
                p.hidden.size(), thresholds, static_cast<unsigned long long>(rep.checked - rep.mismatches),
                static_cast<unsigned long long>(rep.checked));

    json cfg{{"model", o.model}, {"check_blocks", o.check_blocks}, {"check_seed", o.check_seed}};
    emit_manifest("streamline", cfg, o.check_seed, {o.model}, {o.out}, seconds_since(t0));
}

// ---- bench -----------------------------------------------------------------

struct BenchOpts {
    std::string pipeline, blocks, capture, cls = "benign", out, config;
    bool lenient = false;
};

void run_bench(const BenchOpts& o, Clock::time_point t0) {
    if (o.blocks.empty() == o.capture.empty())
        throw std::runtime_error("bench needs exactly one of --blocks or --capture");
    canids::ThresholdPipeline p = canids::load_pipeline(o.pipeline);

    canids::BenchReport r;
    std::vector<std::string> inputs{o.pipeline};
    if (!o.blocks.empty()) {
        std::vector<canids::FeatureBlock> blocks = canids::read_blocks(o.blocks);
        if (blocks.empty()) throw std::runtime_error(o.blocks + ": no blocks");
        r = canids::bench_blocks(p, blocks);
        inputs.push_back(o.blocks);
    } else {
        const auto mode = o.lenient ? canids::ParseMode::Lenient : canids::ParseMode::Strict;
        canids::Capture cap = canids::read_capture(o.capture, canids::label_from_name(o.cls), mode);
        print_warnings(cap.warnings);
        r = canids::bench_stream(p, cap.frames);
        inputs.push_back(o.capture);
    }

    const char* mode_name = r.mode == canids::BenchMode::PerBlock ? "per-block" : "per-message sliding";
    std::printf("%s: %zu classifications in %.3f s\n", mode_name, r.items, r.wall_s);
    std::printf("latency: mean %.2f us, median %.2f us, p99 %.2f us\n", r.mean_us, r.median_us, r.p99_us);
    std::printf("throughput: %.0f classifications/s\n", r.throughput_per_s);

    std::vector<std::string> outputs;
    if (!o.out.empty()) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "mode,items,wall_s,mean_us,median_us,p99_us,throughput_per_s\n%s,%zu,%.6f,%.3f,%.3f,%.3f,%.1f\n",
                      r.mode == canids::BenchMode::PerBlock ? "per_block" : "per_message_sliding", r.items, r.wall_s,
                      r.mean_us, r.median_us, r.p99_us, r.throughput_per_s);
        write_text_file(o.out, buf);
        outputs.push_back(o.out);
    }

    json cfg{{"pipeline", o.pipeline}, {"blocks", o.blocks}, {"capture", o.capture}, {"class", o.cls}};
    emit_manifest("bench", cfg, 0, inputs, outputs, seconds_since(t0));
}

// ---- cost ------------------------------------------------------------------

struct CostOpts {
    std::string dims = "40,256,128,64,32,4";
    int bits = 2;
    int input_bits = 8;
    int baseline_bits = 4;
    std::string nonzero, out, config;
};

void run_cost(const CostOpts& o, Clock::time_point t0) {
    std::vector<int> dims = parse_int_list(o.dims, "dims");
    canids::InferenceCost dense = canids::inference_cost(dims, o.bits, o.input_bits, o.baseline_bits);
    std::fputs(canids::cost_table(dense).c_str(), stdout);

    std::string csv = canids::cost_csv(dense);
    if (!o.nonzero.empty()) {
        std::vector<double> nz = parse_double_list(o.nonzero, "nonzero");
        canids::InferenceCost sparse = canids::inference_cost_sparse(dims, o.bits, nz, o.input_bits, o.baseline_bits);
        std::printf("with sparsity discount (nonzero fractions %s):\n", o.nonzero.c_str());
        std::fputs(canids::cost_table(sparse).c_str(), stdout);
        csv += "sparsity_discounted\n" + canids::cost_csv(sparse);
    }

    std::vector<std::string> outputs;
    if (!o.out.empty()) {
        write_text_file(o.out, csv);
        outputs.push_back(o.out);
    }
    json cfg{{"dims", o.dims},
             {"bits", o.bits},
             {"input_bits", o.input_bits},
             {"baseline_bits", o.baseline_bits},
             {"nonzero", o.nonzero}};
    emit_manifest("cost", cfg, 0, {}, outputs, seconds_since(t0));
}

}  // namespace

int main(int argc, char** argv) {
    g_argv.assign(argv, argv + argc);
    CLI::App app{"Quantised-MLP intrusion detection for CAN traffic"};
    app.set_version_flag("--version", canids::kToolVersion);
    app.require_subcommand(1);

    const auto t0 = Clock::now();

    // simulate
    SimulateOpts sim;
    auto* c_sim = app.add_subcommand("simulate", "Generate a synthetic capture, optionally with injected attack frames");
    c_sim->add_option("--config", sim.config, "JSON config file (flags override it)");
    auto* s_out = c_sim->add_option("-o,--out", sim.out, "capture file to write");
    auto* s_dur = c_sim->add_option("--duration", sim.duration, "benign stream length in seconds");
    auto* s_seed = c_sim->add_option("--seed", sim.seed, "benign traffic seed");
    auto* s_atk = c_sim->add_option("--attack", sim.attack, "benign, dos, fuzzing or spoof-rpm")
                      ->check(CLI::IsMember({"benign", "dos", "fuzzing", "spoof-rpm"}))
                      ->multi_option_policy(CLI::MultiOptionPolicy::Throw);
    auto* s_ast = c_sim->add_option("--attack-start", sim.attack_start, "injection window start, seconds");
    auto* s_asp = c_sim->add_option("--attack-stop", sim.attack_stop, "injection window end, seconds");
    auto* s_rate = c_sim->add_option("--rate", sim.rate, "injected frames per second");
    auto* s_asd = c_sim->add_option("--attack-seed", sim.attack_seed, "attack randomness seed");
    auto* s_did = c_sim->add_option("--dos-id", sim.dos_id, "flood id (0x-prefixed hex or decimal)");
    auto* s_tgt = c_sim->add_option("--spoof-target", sim.spoof_target, "spoofed id, must exist in the benign stream");
    auto* s_pay = c_sim->add_option("--spoof-payload", sim.spoof_payload, "fixed payload, 16 hex digits");
    c_sim->callback([&, t0] {
        json cfg = load_config(sim.config);
        from_cfg(cfg, s_out, "out", sim.out);
        from_cfg(cfg, s_dur, "duration", sim.duration);
        from_cfg(cfg, s_seed, "seed", sim.seed);
        from_cfg(cfg, s_atk, "attack", sim.attack);
        from_cfg(cfg, s_ast, "attack_start", sim.attack_start);
        from_cfg(cfg, s_asp, "attack_stop", sim.attack_stop);
        from_cfg(cfg, s_rate, "rate", sim.rate);
        from_cfg(cfg, s_asd, "attack_seed", sim.attack_seed);
        from_cfg(cfg, s_did, "dos_id", sim.dos_id);
        from_cfg(cfg, s_tgt, "spoof_target", sim.spoof_target);
        from_cfg(cfg, s_pay, "spoof_payload", sim.spoof_payload);
        if (sim.out.empty()) throw std::runtime_error("simulate needs --out (flag or config)");
        run_simulate(sim, t0);
    });

    // ingest
    IngestOpts ing;
    auto* c_ing = app.add_subcommand("ingest", "Turn captures into feature blocks, optionally split train/val/test");
    c_ing->add_option("--config", ing.config, "JSON config file (flags override it)");
    auto* i_in = c_ing->add_option("--in", ing.inputs, "capture files");
    auto* i_cls = c_ing->add_option("--class", ing.classes, "attack class per capture (one value applies to all)");
    auto* i_len = c_ing->add_flag("--lenient", ing.lenient, "skip malformed lines instead of failing");
    auto* i_str = c_ing->add_option("--stride", ing.stride, "window stride in frames")->check(CLI::PositiveNumber);
    auto* i_blk = c_ing->add_option("--blocks-out", ing.blocks_out, "write all blocks to this file");
    auto* i_pre = c_ing->add_option("--split-prefix", ing.split_prefix, "write <prefix>.{train,val,test}.blk");
    auto* i_rat = c_ing->add_option("--ratios", ing.ratios, "train,val,test percentages");
    auto* i_ssd = c_ing->add_option("--split-seed", ing.split_seed, "shuffle seed for the split");
    c_ing->callback([&, t0] {
        json cfg = load_config(ing.config);
        from_cfg(cfg, i_in, "in", ing.inputs);
        from_cfg(cfg, i_cls, "class", ing.classes);
        from_cfg(cfg, i_len, "lenient", ing.lenient);
        from_cfg(cfg, i_str, "stride", ing.stride);
        from_cfg(cfg, i_blk, "blocks_out", ing.blocks_out);
        from_cfg(cfg, i_pre, "split_prefix", ing.split_prefix);
        from_cfg(cfg, i_rat, "ratios", ing.ratios);
        from_cfg(cfg, i_ssd, "split_seed", ing.split_seed);
        if (ing.inputs.empty()) throw std::runtime_error("ingest needs --in (flag or config)");
        run_ingest(ing, t0);
    });

    // train
    TrainOpts tr;
    auto* c_tr = app.add_subcommand("train", "Train the quantised classifier on feature blocks");
    c_tr->add_option("--config", tr.config, "JSON config file (flags override it)");
    auto* t_tr = c_tr->add_option("--train", tr.train_path, "training block file");
    auto* t_va = c_tr->add_option("--val", tr.val_path, "validation block file");
    auto* t_out = c_tr->add_option("-o,--out", tr.out, "model file to write");
    auto* t_csv = c_tr->add_option("--loss-csv", tr.loss_csv, "write per-epoch losses here");
    auto* t_dims = c_tr->add_option("--dims", tr.dims, "layer widths, comma separated");
    auto* t_bits = c_tr->add_option("--bits", tr.bits, "weight/activation width")->check(CLI::IsMember({2, 3, 4, 8}));
    auto* t_ep = c_tr->add_option("--epochs", tr.epochs, "training epochs")->check(CLI::NonNegativeNumber);
    auto* t_ba = c_tr->add_option("--batch", tr.batch, "batch size")->check(CLI::PositiveNumber);
    auto* t_lr = c_tr->add_option("--lr", tr.lr, "learning rate");
    auto* t_sd = c_tr->add_option("--seed", tr.seed, "initialisation and shuffle seed");
    c_tr->callback([&, t0] {
        json cfg = load_config(tr.config);
        from_cfg(cfg, t_tr, "train", tr.train_path);
        from_cfg(cfg, t_va, "val", tr.val_path);
        from_cfg(cfg, t_out, "out", tr.out);
        from_cfg(cfg, t_csv, "loss_csv", tr.loss_csv);
        from_cfg(cfg, t_dims, "dims", tr.dims);
        from_cfg(cfg, t_bits, "bits", tr.bits);
        from_cfg(cfg, t_ep, "epochs", tr.epochs);
        from_cfg(cfg, t_ba, "batch", tr.batch);
        from_cfg(cfg, t_lr, "lr", tr.lr);
        from_cfg(cfg, t_sd, "seed", tr.seed);
        if (tr.train_path.empty() || tr.val_path.empty() || tr.out.empty())
            throw std::runtime_error("train needs --train, --val and --out (flags or config)");
        run_train(tr, t0);
    });

    // eval
    EvalOpts ev;
    auto* c_ev = app.add_subcommand("eval", "Evaluate a model or pipeline on labelled blocks");
    c_ev->add_option("--config", ev.config, "JSON config file (flags override it)");
    auto* e_mo = c_ev->add_option("--model", ev.model, "model file");
    auto* e_pi = c_ev->add_option("--pipeline", ev.pipeline, "threshold pipeline file");
    auto* e_da = c_ev->add_option("--data", ev.data, "labelled block file");
    auto* e_fc = c_ev->add_option("--from-confusion", ev.from_confusion, "recompute metrics from a confusion CSV");
    auto* e_co = c_ev->add_option("--confusion-out", ev.confusion_out, "write the confusion matrix CSV here");
    auto* e_me = c_ev->add_option("--metrics-out", ev.metrics_out, "write the metrics CSV here");
    c_ev->callback([&, t0] {
        json cfg = load_config(ev.config);
        from_cfg(cfg, e_mo, "model", ev.model);
        from_cfg(cfg, e_pi, "pipeline", ev.pipeline);
        from_cfg(cfg, e_da, "data", ev.data);
        from_cfg(cfg, e_fc, "from_confusion", ev.from_confusion);
        from_cfg(cfg, e_co, "confusion_out", ev.confusion_out);
        from_cfg(cfg, e_me, "metrics_out", ev.metrics_out);
        run_eval(ev, t0);
    });

    // streamline
    StreamlineOpts st;
    auto* c_st = app.add_subcommand("streamline", "Fold a trained model into an integer threshold pipeline");
    c_st->add_option("--config", st.config, "JSON config file (flags override it)");
    auto* st_mo = c_st->add_option("--model", st.model, "model file");
    auto* st_out = c_st->add_option("-o,--out", st.out, "pipeline file to write");
    auto* st_cb = c_st->add_option("--check-blocks", st.check_blocks, "random blocks for the equivalence self-check");
    auto* st_cs = c_st->add_option("--check-seed", st.check_seed, "seed for the self-check blocks");
    c_st->callback([&, t0] {
        json cfg = load_config(st.config);
        from_cfg(cfg, st_mo, "model", st.model);
        from_cfg(cfg, st_out, "out", st.out);
        from_cfg(cfg, st_cb, "check_blocks", st.check_blocks);
        from_cfg(cfg, st_cs, "check_seed", st.check_seed);
        if (st.model.empty() || st.out.empty())
            throw std::runtime_error("streamline needs --model and --out (flags or config)");
        run_streamline(st, t0);
    });

    // bench
    BenchOpts be;
    auto* c_be = app.add_subcommand("bench", "Measure pipeline latency per block or per message");
    c_be->add_option("--config", be.config, "JSON config file (flags override it)");
    auto* b_pi = c_be->add_option("--pipeline", be.pipeline, "threshold pipeline file");
    auto* b_bl = c_be->add_option("--blocks", be.blocks, "block file, one classification per block");
    auto* b_ca = c_be->add_option("--capture", be.capture, "capture file, sliding one-frame stride");
    auto* b_cl = c_be->add_option("--class", be.cls, "attack class of the capture");
    auto* b_le = c_be->add_flag("--lenient", be.lenient, "skip malformed capture lines");
    auto* b_out = c_be->add_option("-o,--out", be.out, "write the report CSV here");
    c_be->callback([&, t0] {
        json cfg = load_config(be.config);
        from_cfg(cfg, b_pi, "pipeline", be.pipeline);
        from_cfg(cfg, b_bl, "blocks", be.blocks);
        from_cfg(cfg, b_ca, "capture", be.capture);
        from_cfg(cfg, b_cl, "class", be.cls);
        from_cfg(cfg, b_le, "lenient", be.lenient);
        from_cfg(cfg, b_out, "out", be.out);
        if (be.pipeline.empty()) throw std::runtime_error("bench needs --pipeline (flag or config)");
        run_bench(be, t0);
    });

    // cost
    CostOpts co;
    auto* c_co = app.add_subcommand("cost", "Arithmetic cost of one forward pass");
    c_co->add_option("--config", co.config, "JSON config file (flags override it)");
    auto* co_di = c_co->add_option("--dims", co.dims, "layer widths, comma separated");
    auto* co_bi = c_co->add_option("--bits", co.bits, "weight/activation width")->check(CLI::Range(2, 8));
    auto* co_ib = c_co->add_option("--input-bits", co.input_bits, "first-layer input width");
    auto* co_bb = c_co->add_option("--baseline-bits", co.baseline_bits, "width of the normalisation baseline");
    auto* co_nz = c_co->add_option("--nonzero", co.nonzero, "per-layer nonzero weight fractions, comma separated");
    auto* co_out = c_co->add_option("-o,--out", co.out, "write the cost CSV here");
    c_co->callback([&, t0] {
        json cfg = load_config(co.config);
        from_cfg(cfg, co_di, "dims", co.dims);
        from_cfg(cfg, co_bi, "bits", co.bits);
        from_cfg(cfg, co_ib, "input_bits", co.input_bits);
        from_cfg(cfg, co_bb, "baseline_bits", co.baseline_bits);
        from_cfg(cfg, co_nz, "nonzero", co.nonzero);
        from_cfg(cfg, co_out, "out", co.out);
        run_cost(co, t0);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
