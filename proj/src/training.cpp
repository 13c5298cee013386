#include "canids/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace canids {

double bce_one_hot(std::span<const double> probs, int target) {
    if (target < 0 || target >= static_cast<int>(probs.size()))
        throw std::runtime_error("loss target out of range");
    double loss = 0.0;
    for (int c = 0; c < static_cast<int>(probs.size()); ++c) {
        double p = std::clamp(probs[static_cast<std::size_t>(c)], kProbClip, 1.0 - kProbClip);
        loss += c == target ? -std::log(p) : -std::log1p(-p);
    }
    return loss / static_cast<double>(probs.size());
}

void bce_softmax_dlogits(std::span<const double> probs, int target, double scale, std::span<double> out) {
    const int k = static_cast<int>(probs.size());
    const double inv_k = 1.0 / static_cast<double>(k);
    double dot = 0.0;
    std::vector<double> dldp(static_cast<std::size_t>(k), 0.0);
    for (int c = 0; c < k; ++c) {
        double p = probs[static_cast<std::size_t>(c)];
        if (p < kProbClip || p > 1.0 - kProbClip) continue;  // clipped region, flat loss
        double y = c == target ? 1.0 : 0.0;
        dldp[static_cast<std::size_t>(c)] = -inv_k * (y / p - (1.0 - y) / (1.0 - p));
        dot += dldp[static_cast<std::size_t>(c)] * p;
    }
    for (int j = 0; j < k; ++j) {
        auto ji = static_cast<std::size_t>(j);
        out[ji] = scale * probs[ji] * (dldp[ji] - dot);
    }
}

void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
    if (grads.size() != params.size()) throw std::runtime_error("adam: gradient size mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) throw std::runtime_error("adam: state size mismatch");

    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        double mhat = state.m[i] / bc1;
        double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

namespace {

struct Optimiser {
    std::vector<std::vector<double>*> params;
    std::vector<std::vector<double>*> grads;
    std::vector<AdamState> states;

    Optimiser(CqmlpModel& m, Gradients& g) {
        for (std::size_t l = 0; l < m.linear.size(); ++l) {
            params.push_back(&m.linear[l].w);
            grads.push_back(&g.w[l]);
            params.push_back(&m.linear[l].b);
            grads.push_back(&g.b[l]);
        }
        for (std::size_t h = 0; h < m.bn.size(); ++h) {
            params.push_back(&m.bn[h].gamma);
            grads.push_back(&g.gamma[h]);
            params.push_back(&m.bn[h].beta);
            grads.push_back(&g.beta[h]);
        }
        params.push_back(&m.act_scale);
        grads.push_back(&g.act_scale);
        states.resize(params.size());
    }

    void step(double lr) {
        for (std::size_t i = 0; i < params.size(); ++i) adam_step(*params[i], *grads[i], states[i], lr);
    }
};

void fill_batch(std::span<const FeatureBlock> blocks, std::span<const std::size_t> order, std::size_t begin,
                std::size_t count, std::vector<std::int8_t>& data, std::vector<int>& targets) {
    const auto width = blocks.front().data.size();
    data.resize(count * width);
    targets.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto& b = blocks[order[begin + i]];
        std::copy(b.data.begin(), b.data.end(), data.begin() + static_cast<std::ptrdiff_t>(i * width));
        targets[i] = static_cast<int>(b.label);
    }
}

double batch_mean_loss(const BatchCache& cache, std::span<const int> targets) {
    double sum = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        sum += bce_one_hot(std::span<const double>(cache.probs.data() + i * 4, 4), targets[i]);
    }
    return sum / static_cast<double>(targets.size());
}

// Activation scales start from real-valued pre-quantisation statistics of one
// batch: scale = max(relu output) / hi per hidden layer, on a throwaway copy
// of the model so running stats stay untouched.
void init_act_scales(CqmlpModel& m, std::span<const FeatureBlock> train, int batch) {
    CqmlpModel probe = m;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(batch), train.size());
    std::vector<std::int8_t> data;
    std::vector<int> targets;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    fill_batch(train, order, 0, n, data, targets);

    BatchCache cache;
    forward_batch(probe, data.data(), static_cast<int>(n), RunMode::Real, Phase::Train, cache);
    const double hi = m.act_hi();
    for (int h = 0; h < m.hidden_count(); ++h) {
        auto hidx = static_cast<std::size_t>(h);
        double mx = 0.0;
        for (double a : cache.act[hidx]) mx = std::max(mx, a);
        m.act_scale[hidx] = mx > 0.0 ? mx / hi : 1.0;
    }
}

}  // namespace

double eval_loss(const CqmlpModel& m, std::span<const FeatureBlock> blocks, int batch) {
    if (blocks.empty()) throw std::runtime_error("cannot evaluate loss on an empty set");
    CqmlpModel scratch = m;  // infer phase does not touch stats, copy anyway
    std::vector<std::size_t> order(blocks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<std::int8_t> data;
    std::vector<int> targets;
    BatchCache cache;

    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < blocks.size(); begin += static_cast<std::size_t>(batch)) {
        std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(batch), blocks.size() - begin);
        fill_batch(blocks, order, begin, count, data, targets);
        forward_batch(scratch, data.data(), static_cast<int>(count), RunMode::FakeQuant, Phase::Infer, cache);
        sum += batch_mean_loss(cache, targets);
        ++batches;
    }
    return sum / static_cast<double>(batches);
}

TrainResult train_qat(const TrainConfig& cfg, const DatasetSplit& data) {
    if (data.train.empty()) throw std::runtime_error("training set is empty");
    if (data.val.empty()) throw std::runtime_error("validation set is empty");
    if (cfg.batch < 1) throw std::runtime_error("batch size must be >= 1");
    if (cfg.epochs < 0) throw std::runtime_error("epochs must be >= 0");
    if (cfg.loss != LossKind::BceOneHot) throw std::runtime_error("unsupported loss kind");
    if (cfg.dims.front() != static_cast<int>(data.train.front().data.size()))
        throw std::runtime_error("model input width does not match block size");

    Rng rng(cfg.seed);
    CqmlpModel model = make_model(cfg.dims, cfg.bits);
    init_params(model, rng);
    init_act_scales(model, data.train, cfg.batch);
    model.seed = cfg.seed;

    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();

    Gradients grads = Gradients::zeros_like(model);
    Optimiser opt(model, grads);
    CqmlpModel best = model;
    int best_epoch = 0;

    std::vector<std::size_t> order(data.train.size());
    std::vector<std::int8_t> bdata;
    std::vector<int> targets;
    std::vector<double> dlogits;
    BatchCache cache;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng erng(cfg.seed + static_cast<std::uint64_t>(epoch));
        erng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch)) {
            std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), order.size() - begin);
            fill_batch(data.train, order, begin, count, bdata, targets);
            forward_batch(model, bdata.data(), static_cast<int>(count), RunMode::FakeQuant, Phase::Train, cache);
            loss_sum += batch_mean_loss(cache, targets);
            ++batches;

            dlogits.assign(count * 4, 0.0);
            for (std::size_t i = 0; i < count; ++i) {
                bce_softmax_dlogits(std::span<const double>(cache.probs.data() + i * 4, 4), targets[i],
                                    1.0 / static_cast<double>(count),
                                    std::span<double>(dlogits.data() + i * 4, 4));
            }
            backward_batch(model, cache, dlogits, grads);
            opt.step(cfg.lr);
            for (auto& s : model.act_scale) s = std::max(s, 1e-8);  // keep quantiser scales valid
        }

        double val = eval_loss(model, data.val, cfg.batch);
        result.curve.train_loss.push_back(loss_sum / static_cast<double>(batches));
        result.curve.val_loss.push_back(val);
        if (val < result.best_val_loss) {
            result.best_val_loss = val;
            best = model;
            best_epoch = epoch;
        }
    }

    if (cfg.epochs == 0) {
        best = model;
        result.best_val_loss = std::numeric_limits<double>::quiet_NaN();
    }
    best.seed = cfg.seed;
    best.epochs_trained = cfg.epochs;
    best.best_val_loss = result.best_val_loss;
    result.model = std::move(best);
    result.best_epoch = best_epoch;
    return result;
}

void export_loss_csv(const LossCurve& curve, const std::string& path) {
    if (curve.train_loss.size() != curve.val_loss.size())
        throw std::runtime_error("loss curve arrays differ in length");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write loss csv: " + path);
    out << "epoch,train_loss,val_loss\n";
    char buf[96];
    for (std::size_t i = 0; i < curve.train_loss.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g\n", i + 1, curve.train_loss[i], curve.val_loss[i]);
        out << buf;
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace canids
