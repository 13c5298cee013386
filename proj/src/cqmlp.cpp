#include "canids/cqmlp.hpp"

#include "textio.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace canids {

namespace {

void check_dims(std::span<const int> dims) {
    if (dims.size() < 2) throw std::runtime_error("model needs at least input and output dims");
    for (int d : dims) {
        if (d <= 0) throw std::runtime_error("model dims must be positive");
    }
}

void check_bits(int bits) {
    if (bits != 2 && bits != 3 && bits != 4 && bits != 8)
        throw std::runtime_error("model bits must be one of 2, 3, 4, 8");
}

}  // namespace

QuantSpec CqmlpModel::weight_spec(int layer) const {
    const auto& w = linear[static_cast<std::size_t>(layer)].w;
    QuantSpec spec{bits, true, true, 1.0};
    spec.scale = calibrate_scale(w, spec, CalibrationMode::MaxAbs).scale;
    return spec;
}

QuantSpec CqmlpModel::act_spec(int h) const {
    return QuantSpec{bits, false, false, act_scale[static_cast<std::size_t>(h)]};
}

void CqmlpModel::bn_affine(int h, std::vector<double>& a, std::vector<double>& b) const {
    const auto& layer = bn[static_cast<std::size_t>(h)];
    a.resize(static_cast<std::size_t>(layer.ch));
    b.resize(static_cast<std::size_t>(layer.ch));
    for (int c = 0; c < layer.ch; ++c) {
        auto i = static_cast<std::size_t>(c);
        double ac = layer.gamma[i] / std::sqrt(layer.running_var[i] + layer.eps);
        a[i] = ac;
        b[i] = layer.beta[i] - ac * layer.running_mean[i];
    }
}

double CqmlpModel::combined_scale(int layer) const {
    double s_in = layer == 0 ? kInputScale : act_scale[static_cast<std::size_t>(layer - 1)];
    return weight_spec(layer).scale * s_in;
}

CqmlpModel make_model(std::span<const int> dims, int bits) {
    check_dims(dims);
    check_bits(bits);
    CqmlpModel m;
    m.dims.assign(dims.begin(), dims.end());
    m.bits = bits;
    const auto layers = dims.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        LinearLayer lin;
        lin.in = dims[l];
        lin.out = dims[l + 1];
        lin.w.assign(static_cast<std::size_t>(lin.in) * static_cast<std::size_t>(lin.out), 0.0);
        lin.b.assign(static_cast<std::size_t>(lin.out), 0.0);
        m.linear.push_back(std::move(lin));
        if (l + 1 < layers) {
            BatchNormLayer bn;
            bn.ch = dims[l + 1];
            bn.gamma.assign(static_cast<std::size_t>(bn.ch), 1.0);
            bn.beta.assign(static_cast<std::size_t>(bn.ch), 0.0);
            bn.running_mean.assign(static_cast<std::size_t>(bn.ch), 0.0);
            bn.running_var.assign(static_cast<std::size_t>(bn.ch), 1.0);
            m.bn.push_back(std::move(bn));
            m.act_scale.push_back(1.0);
        }
    }
    return m;
}

void init_params(CqmlpModel& m, Rng& rng) {
    for (auto& lin : m.linear) {
        double bound = std::sqrt(6.0 / static_cast<double>(lin.in));
        for (auto& w : lin.w) w = rng.uniform(-bound, bound);
        std::fill(lin.b.begin(), lin.b.end(), 0.0);
    }
    for (auto& bn : m.bn) {
        std::fill(bn.gamma.begin(), bn.gamma.end(), 1.0);
        std::fill(bn.beta.begin(), bn.beta.end(), 0.0);
        std::fill(bn.running_mean.begin(), bn.running_mean.end(), 0.0);
        std::fill(bn.running_var.begin(), bn.running_var.end(), 1.0);
    }
    std::fill(m.act_scale.begin(), m.act_scale.end(), 1.0);
}

long long count_params(const CqmlpModel& m) {
    long long n = 0;
    for (const auto& lin : m.linear) n += static_cast<long long>(lin.w.size() + lin.b.size());
    for (const auto& bn : m.bn) n += static_cast<long long>(bn.gamma.size() + bn.beta.size());
    n += static_cast<long long>(m.act_scale.size());
    return n;
}

void softmax_inplace(std::span<double> v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    double sum = 0.0;
    for (auto& x : v) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (auto& x : v) x /= sum;
}

// ---- single-block inference ------------------------------------------------

namespace {

// Exact-arithmetic evaluator for the fake-quant inference path: linear layers
// accumulate integer levels and are rescaled once per channel, which keeps
// every hidden activation an exactly reproducible integer level.
struct PreparedInfer {
    const CqmlpModel& m;
    std::vector<std::vector<long long>> wq;  // per layer, row-major levels
    std::vector<double> sws;                 // combined scale per layer
    std::vector<std::vector<double>> bn_a, bn_b;

    explicit PreparedInfer(const CqmlpModel& model) : m(model) {
        const auto layers = m.linear.size();
        wq.resize(layers);
        sws.resize(layers);
        bn_a.resize(m.bn.size());
        bn_b.resize(m.bn.size());
        for (std::size_t l = 0; l < layers; ++l) {
            const auto& lin = m.linear[l];
            QuantSpec ws = m.weight_spec(static_cast<int>(l));
            wq[l].reserve(lin.w.size());
            for (double w : lin.w) wq[l].push_back(quantize_value(w, ws));
            sws[l] = m.combined_scale(static_cast<int>(l));
        }
        for (std::size_t h = 0; h < m.bn.size(); ++h) m.bn_affine(static_cast<int>(h), bn_a[h], bn_b[h]);
    }

    InferResult run(std::span<const std::int8_t> block) const {
        InferResult res;
        const int H = m.hidden_count();
        const int hi = m.act_hi();
        res.act_levels.resize(static_cast<std::size_t>(H));
        res.preact.resize(static_cast<std::size_t>(H));

        std::vector<long long> lev(block.begin(), block.end());
        std::vector<long long> nxt;
        for (int h = 0; h < H; ++h) {
            auto hidx = static_cast<std::size_t>(h);
            const auto& lin = m.linear[hidx];
            const double s_act = m.act_scale[hidx];
            nxt.assign(static_cast<std::size_t>(lin.out), 0);
            res.preact[hidx].resize(static_cast<std::size_t>(lin.out));
            res.act_levels[hidx].resize(static_cast<std::size_t>(lin.out));
            for (int o = 0; o < lin.out; ++o) {
                const long long* wrow = wq[hidx].data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(lin.in);
                long long acc = 0;
                for (int j = 0; j < lin.in; ++j) acc += wrow[j] * lev[static_cast<std::size_t>(j)];
                auto oi = static_cast<std::size_t>(o);
                double u = infer_preact(sws[hidx], lin.b[oi], bn_a[hidx][oi], bn_b[hidx][oi], static_cast<double>(acc));
                int q = quant_relu_level(u, s_act, hi);
                res.preact[hidx][oi] = u;
                res.act_levels[hidx][oi] = q;
                nxt[oi] = q;
            }
            lev.swap(nxt);
        }

        const auto& out = m.linear.back();
        const std::size_t ol = m.linear.size() - 1;
        for (int o = 0; o < out.out; ++o) {
            const long long* wrow = wq[ol].data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(out.in);
            long long acc = 0;
            for (int j = 0; j < out.in; ++j) acc += wrow[j] * lev[static_cast<std::size_t>(j)];
            res.logits[static_cast<std::size_t>(o)] = output_logit(sws[ol], out.b[static_cast<std::size_t>(o)], static_cast<double>(acc));
        }
        res.probs = res.logits;
        softmax_inplace(res.probs);
        res.predicted = static_cast<Label>(argmax4(res.logits));
        return res;
    }
};

}  // namespace

InferResult forward_infer(const CqmlpModel& m, std::span<const std::int8_t> block, RunMode mode) {
    if (block.size() != static_cast<std::size_t>(m.dims.front()))
        throw std::runtime_error("block length does not match model input width");
    if (m.linear.back().out != 4) throw std::runtime_error("model output width must be 4");

    if (mode == RunMode::FakeQuant) return PreparedInfer(m).run(block);

    const int H = m.hidden_count();
    std::vector<double> x(block.size());
    for (std::size_t i = 0; i < block.size(); ++i) x[i] = static_cast<double>(block[i]) * kInputScale;

    std::vector<double> a, b, y;
    for (int h = 0; h < H; ++h) {
        auto hidx = static_cast<std::size_t>(h);
        const auto& lin = m.linear[hidx];
        m.bn_affine(h, a, b);
        y.assign(static_cast<std::size_t>(lin.out), 0.0);
        for (int o = 0; o < lin.out; ++o) {
            auto oi = static_cast<std::size_t>(o);
            double acc = lin.b[oi];
            const double* wrow = lin.w.data() + oi * static_cast<std::size_t>(lin.in);
            for (int j = 0; j < lin.in; ++j) acc += wrow[j] * x[static_cast<std::size_t>(j)];
            double u = a[oi] * acc + b[oi];
            y[oi] = u > 0.0 ? u : 0.0;
        }
        x.swap(y);
    }

    InferResult res;
    const auto& out = m.linear.back();
    for (int o = 0; o < out.out; ++o) {
        auto oi = static_cast<std::size_t>(o);
        double acc = out.b[oi];
        const double* wrow = out.w.data() + oi * static_cast<std::size_t>(out.in);
        for (int j = 0; j < out.in; ++j) acc += wrow[j] * x[static_cast<std::size_t>(j)];
        res.logits[oi] = acc;
    }
    res.probs = res.logits;
    softmax_inplace(res.probs);
    res.predicted = static_cast<Label>(argmax4(res.logits));
    return res;
}

std::vector<Label> predict(const CqmlpModel& m, std::span<const FeatureBlock> blocks, RunMode mode) {
    if (m.dims.front() != kBlockBytes) throw std::runtime_error("model input width does not match feature blocks");
    if (m.linear.back().out != 4) throw std::runtime_error("model output width must be 4");
    std::vector<Label> out;
    out.reserve(blocks.size());
    if (mode == RunMode::FakeQuant) {
        PreparedInfer prep(m);
        for (const auto& b : blocks) out.push_back(prep.run(b.data).predicted);
    } else {
        for (const auto& b : blocks) out.push_back(forward_infer(m, b.data, mode).predicted);
    }
    return out;
}

// ---- batch training path ---------------------------------------------------

void forward_batch(CqmlpModel& m, const std::int8_t* data, int n, RunMode mode, Phase phase, BatchCache& c) {
    if (n < 1) throw std::runtime_error("batch size must be >= 1");
    const auto L = m.linear.size();
    const auto H = static_cast<std::size_t>(m.hidden_count());

    c = BatchCache{};
    c.mode = mode;
    c.phase = phase;
    c.n = n;
    c.x.resize(L);
    c.w_eff.resize(L);
    c.w_scale.assign(L, 1.0);
    c.w_pass.resize(L);
    c.y.resize(L);
    c.mean.resize(H);
    c.var.resize(H);
    c.xhat.resize(H);
    c.u.resize(H);
    c.act.resize(H);
    c.q.resize(H);
    c.pass.resize(H);

    const auto nn = static_cast<std::size_t>(n);
    c.x[0].resize(nn * static_cast<std::size_t>(m.dims[0]));
    for (std::size_t i = 0; i < c.x[0].size(); ++i) c.x[0][i] = static_cast<double>(data[i]) * kInputScale;

    for (std::size_t l = 0; l < L; ++l) {
        const auto& lin = m.linear[l];
        const auto in = static_cast<std::size_t>(lin.in);
        const auto out = static_cast<std::size_t>(lin.out);

        if (mode == RunMode::FakeQuant) {
            QuantSpec ws = m.weight_spec(static_cast<int>(l));
            c.w_scale[l] = ws.scale;
            c.w_eff[l].resize(lin.w.size());
            c.w_pass[l].resize(lin.w.size());
            const double lo = ws.lo(), hi = ws.hi();
            for (std::size_t k = 0; k < lin.w.size(); ++k) {
                double r = std::round(lin.w[k] / ws.scale);
                bool pass = r >= lo && r <= hi;
                if (r < lo) r = lo;
                if (r > hi) r = hi;
                c.w_eff[l][k] = ws.scale * r;
                c.w_pass[l][k] = pass ? 1 : 0;
            }
        } else {
            c.w_eff[l] = lin.w;
            c.w_pass[l].assign(lin.w.size(), 1);
        }

        c.y[l].assign(nn * out, 0.0);
        for (std::size_t i = 0; i < nn; ++i) {
            const double* xi = c.x[l].data() + i * in;
            double* yi = c.y[l].data() + i * out;
            for (std::size_t o = 0; o < out; ++o) {
                const double* wrow = c.w_eff[l].data() + o * in;
                double acc = lin.b[o];
                for (std::size_t j = 0; j < in; ++j) acc += wrow[j] * xi[j];
                yi[o] = acc;
            }
        }

        if (l == L - 1) break;

        auto& bn = m.bn[l];
        c.mean[l].assign(out, 0.0);
        c.var[l].assign(out, 0.0);
        if (phase == Phase::Train) {
            for (std::size_t i = 0; i < nn; ++i) {
                const double* yi = c.y[l].data() + i * out;
                for (std::size_t o = 0; o < out; ++o) c.mean[l][o] += yi[o];
            }
            for (std::size_t o = 0; o < out; ++o) c.mean[l][o] /= static_cast<double>(n);
            for (std::size_t i = 0; i < nn; ++i) {
                const double* yi = c.y[l].data() + i * out;
                for (std::size_t o = 0; o < out; ++o) {
                    double d = yi[o] - c.mean[l][o];
                    c.var[l][o] += d * d;
                }
            }
            for (std::size_t o = 0; o < out; ++o) c.var[l][o] /= static_cast<double>(n);
            for (std::size_t o = 0; o < out; ++o) {
                bn.running_mean[o] = (1.0 - bn.momentum) * bn.running_mean[o] + bn.momentum * c.mean[l][o];
                bn.running_var[o] = (1.0 - bn.momentum) * bn.running_var[o] + bn.momentum * c.var[l][o];
            }
        } else {
            c.mean[l] = bn.running_mean;
            c.var[l] = bn.running_var;
        }

        c.xhat[l].resize(nn * out);
        c.u[l].resize(nn * out);
        for (std::size_t o = 0; o < out; ++o) {
            double inv = 1.0 / std::sqrt(c.var[l][o] + bn.eps);
            for (std::size_t i = 0; i < nn; ++i) {
                double xh = (c.y[l][i * out + o] - c.mean[l][o]) * inv;
                c.xhat[l][i * out + o] = xh;
                c.u[l][i * out + o] = bn.gamma[o] * xh + bn.beta[o];
            }
        }

        c.act[l].resize(nn * out);
        c.pass[l].resize(nn * out);
        if (mode == RunMode::FakeQuant) {
            c.q[l].resize(nn * out);
            const double s = m.act_scale[l];
            const double hi = m.act_hi();
            for (std::size_t e = 0; e < nn * out; ++e) {
                double r = std::round(c.u[l][e] / s);
                bool pass = r >= 0.0 && r <= hi;
                if (r < 0.0) r = 0.0;
                if (r > hi) r = hi;
                c.q[l][e] = r;
                c.pass[l][e] = pass ? 1 : 0;
                c.act[l][e] = s * r;
            }
        } else {
            for (std::size_t e = 0; e < nn * out; ++e) {
                bool pos = c.u[l][e] > 0.0;
                c.pass[l][e] = pos ? 1 : 0;
                c.act[l][e] = pos ? c.u[l][e] : 0.0;
            }
        }
        c.x[l + 1] = c.act[l];
    }

    c.probs = c.y[L - 1];
    const auto out_dim = static_cast<std::size_t>(m.dims.back());
    for (std::size_t i = 0; i < nn; ++i) {
        softmax_inplace(std::span<double>(c.probs.data() + i * out_dim, out_dim));
    }
    c.valid = true;
}

Gradients Gradients::zeros_like(const CqmlpModel& m) {
    Gradients g;
    for (const auto& lin : m.linear) {
        g.w.emplace_back(lin.w.size(), 0.0);
        g.b.emplace_back(lin.b.size(), 0.0);
    }
    for (const auto& bn : m.bn) {
        g.gamma.emplace_back(bn.gamma.size(), 0.0);
        g.beta.emplace_back(bn.beta.size(), 0.0);
    }
    g.act_scale.assign(m.act_scale.size(), 0.0);
    return g;
}

void backward_batch(const CqmlpModel& m, const BatchCache& c, std::span<const double> dlogits, Gradients& g) {
    if (!c.valid) throw std::runtime_error("backward called before forward");
    if (c.phase != Phase::Train) throw std::runtime_error("backward needs a train-phase forward cache");
    const auto nn = static_cast<std::size_t>(c.n);
    const auto L = m.linear.size();
    if (dlogits.size() != nn * static_cast<std::size_t>(m.dims.back()))
        throw std::runtime_error("dlogits size does not match cache");

    // Zero in place: optimisers keep pointers to these buffers across steps.
    g.w.resize(L);
    g.b.resize(L);
    g.gamma.resize(m.bn.size());
    g.beta.resize(m.bn.size());
    for (std::size_t l = 0; l < L; ++l) {
        g.w[l].assign(m.linear[l].w.size(), 0.0);
        g.b[l].assign(m.linear[l].b.size(), 0.0);
    }
    for (std::size_t h = 0; h < m.bn.size(); ++h) {
        g.gamma[h].assign(m.bn[h].gamma.size(), 0.0);
        g.beta[h].assign(m.bn[h].beta.size(), 0.0);
    }
    g.act_scale.assign(m.act_scale.size(), 0.0);

    std::vector<double> dy(dlogits.begin(), dlogits.end());
    std::vector<double> dx, du, dy_prev;

    for (std::size_t l = L; l-- > 0;) {
        const auto& lin = m.linear[l];
        const auto in = static_cast<std::size_t>(lin.in);
        const auto out = static_cast<std::size_t>(lin.out);

        for (std::size_t i = 0; i < nn; ++i) {
            const double* xi = c.x[l].data() + i * in;
            const double* dyi = dy.data() + i * out;
            for (std::size_t o = 0; o < out; ++o) {
                double d = dyi[o];
                g.b[l][o] += d;
                double* grow = g.w[l].data() + o * in;
                for (std::size_t j = 0; j < in; ++j) grow[j] += d * xi[j];
            }
        }
        for (std::size_t k = 0; k < lin.w.size(); ++k) {
            if (!c.w_pass[l][k]) g.w[l][k] = 0.0;
        }

        if (l == 0) break;

        dx.assign(nn * in, 0.0);
        for (std::size_t i = 0; i < nn; ++i) {
            const double* dyi = dy.data() + i * out;
            double* dxi = dx.data() + i * in;
            for (std::size_t o = 0; o < out; ++o) {
                double d = dyi[o];
                const double* wrow = c.w_eff[l].data() + o * in;
                for (std::size_t j = 0; j < in; ++j) dxi[j] += d * wrow[j];
            }
        }

        // dx is the gradient at hidden layer h's activation output.
        const std::size_t h = l - 1;
        const auto& bn = m.bn[h];
        const auto ch = static_cast<std::size_t>(bn.ch);

        du.assign(nn * ch, 0.0);
        if (c.mode == RunMode::FakeQuant) {
            const double s = m.act_scale[h];
            const double hi = m.act_hi();
            double ds = 0.0;
            for (std::size_t e = 0; e < nn * ch; ++e) {
                double da = dx[e];
                if (c.pass[h][e]) {
                    du[e] = da;
                    ds += da * (c.q[h][e] - c.u[h][e] / s);
                } else {
                    // Clamped: the level saturates at 0 or hi.
                    double r = std::round(c.u[h][e] / s);
                    ds += da * (r > hi ? hi : 0.0);
                }
            }
            g.act_scale[h] += ds;
        } else {
            for (std::size_t e = 0; e < nn * ch; ++e) du[e] = c.pass[h][e] ? dx[e] : 0.0;
        }

        dy_prev.assign(nn * ch, 0.0);
        for (std::size_t o = 0; o < ch; ++o) {
            const double inv = 1.0 / std::sqrt(c.var[h][o] + bn.eps);
            double sum_du = 0.0, sum_du_xhat = 0.0;
            for (std::size_t i = 0; i < nn; ++i) {
                double d = du[i * ch + o];
                sum_du += d;
                sum_du_xhat += d * c.xhat[h][i * ch + o];
            }
            g.gamma[h][o] += sum_du_xhat;
            g.beta[h][o] += sum_du;

            double dvar = 0.0, sum_dev = 0.0;
            for (std::size_t i = 0; i < nn; ++i) {
                double dxhat = du[i * ch + o] * bn.gamma[o];
                double dev = c.y[h][i * ch + o] - c.mean[h][o];
                dvar += dxhat * dev;
                sum_dev += dev;
            }
            dvar *= -0.5 * inv * inv * inv;
            double dmean = -inv * sum_du * bn.gamma[o] + dvar * (-2.0 / static_cast<double>(c.n)) * sum_dev;
            for (std::size_t i = 0; i < nn; ++i) {
                double dxhat = du[i * ch + o] * bn.gamma[o];
                double dev = c.y[h][i * ch + o] - c.mean[h][o];
                dy_prev[i * ch + o] = dxhat * inv + dvar * 2.0 * dev / static_cast<double>(c.n) +
                                      dmean / static_cast<double>(c.n);
            }
        }
        dy.swap(dy_prev);
    }
}

// ---- model file ------------------------------------------------------------

namespace {

void put_vec(std::ostringstream& out, const char* name, const std::vector<double>& v) {
    out << name << '\n';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ' ';
        out << textio::double_hex(v[i]);
    }
    out << '\n';
}

void put_rows(std::ostringstream& out, const char* name, const std::vector<double>& v, std::size_t rows,
              std::size_t cols) {
    out << name << '\n';
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < cols; ++j) {
            if (j) out << ' ';
            out << textio::double_hex(v[r * cols + j]);
        }
        out << '\n';
    }
}

class TokenReader {
public:
    explicit TokenReader(const std::string& text) : in_(text) {}

    std::string word() {
        std::string t;
        if (!(in_ >> t)) throw std::runtime_error("model file truncated");
        return t;
    }
    void expect(const char* kw) {
        std::string t = word();
        if (t != kw) throw std::runtime_error(std::string("model file: expected '") + kw + "', got '" + t + "'");
    }
    long long integer() {
        std::string t = word();
        try {
            std::size_t pos = 0;
            long long v = std::stoll(t, &pos);
            if (pos != t.size()) throw std::invalid_argument(t);
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error("model file: bad integer '" + t + "'");
        }
    }
    double real() { return textio::hex_double(word()); }
    void read_vec(std::vector<double>& v, std::size_t count) {
        v.resize(count);
        for (auto& x : v) x = real();
    }

private:
    std::istringstream in_;
};

}  // namespace

void save_model(const CqmlpModel& m, const std::string& path) {
    std::ostringstream out;
    out << "canids-model v1\n";
    out << "bits " << m.bits << '\n';
    out << "dims";
    for (int d : m.dims) out << ' ' << d;
    out << '\n';
    out << "seed " << m.seed << '\n';
    out << "epochs " << m.epochs_trained << '\n';
    out << "best_val_loss " << textio::double_hex(m.best_val_loss) << '\n';
    for (std::size_t l = 0; l < m.linear.size(); ++l) {
        const auto& lin = m.linear[l];
        out << "linear " << l << ' ' << lin.in << ' ' << lin.out << '\n';
        put_rows(out, "w", lin.w, static_cast<std::size_t>(lin.out), static_cast<std::size_t>(lin.in));
        put_vec(out, "b", lin.b);
    }
    for (std::size_t h = 0; h < m.bn.size(); ++h) {
        const auto& bn = m.bn[h];
        out << "bn " << h << ' ' << bn.ch << '\n';
        put_vec(out, "gamma", bn.gamma);
        put_vec(out, "beta", bn.beta);
        put_vec(out, "running_mean", bn.running_mean);
        put_vec(out, "running_var", bn.running_var);
    }
    put_vec(out, "act_scale", m.act_scale);
    textio::write_checksummed(path, out.str());
}

CqmlpModel load_model(const std::string& path) {
    const std::string payload = textio::read_checksummed(path);
    TokenReader r(payload);
    r.expect("canids-model");
    r.expect("v1");
    r.expect("bits");
    int bits = static_cast<int>(r.integer());
    r.expect("dims");

    // dims run until the "seed" keyword.
    std::vector<int> dims;
    std::string tok;
    for (;;) {
        tok = r.word();
        if (tok == "seed") break;
        try {
            std::size_t pos = 0;
            int v = std::stoi(tok, &pos);
            if (pos != tok.size()) throw std::invalid_argument(tok);
            dims.push_back(v);
        } catch (const std::exception&) {
            throw std::runtime_error("model file: bad dim '" + tok + "'");
        }
    }
    CqmlpModel m = make_model(dims, bits);
    m.seed = static_cast<std::uint64_t>(r.integer());
    r.expect("epochs");
    m.epochs_trained = static_cast<int>(r.integer());
    r.expect("best_val_loss");
    m.best_val_loss = r.real();

    for (std::size_t l = 0; l < m.linear.size(); ++l) {
        auto& lin = m.linear[l];
        r.expect("linear");
        if (r.integer() != static_cast<long long>(l)) throw std::runtime_error("model file: layer index mismatch");
        if (r.integer() != lin.in || r.integer() != lin.out)
            throw std::runtime_error("model file: layer shape mismatch");
        r.expect("w");
        r.read_vec(lin.w, static_cast<std::size_t>(lin.in) * static_cast<std::size_t>(lin.out));
        r.expect("b");
        r.read_vec(lin.b, static_cast<std::size_t>(lin.out));
    }
    for (std::size_t h = 0; h < m.bn.size(); ++h) {
        auto& bn = m.bn[h];
        r.expect("bn");
        if (r.integer() != static_cast<long long>(h)) throw std::runtime_error("model file: bn index mismatch");
        if (r.integer() != bn.ch) throw std::runtime_error("model file: bn shape mismatch");
        r.expect("gamma");
        r.read_vec(bn.gamma, static_cast<std::size_t>(bn.ch));
        r.expect("beta");
        r.read_vec(bn.beta, static_cast<std::size_t>(bn.ch));
        r.expect("running_mean");
        r.read_vec(bn.running_mean, static_cast<std::size_t>(bn.ch));
        r.expect("running_var");
        r.read_vec(bn.running_var, static_cast<std::size_t>(bn.ch));
    }
    r.expect("act_scale");
    for (auto& s : m.act_scale) s = r.real();
    return m;
}

}  // namespace canids
