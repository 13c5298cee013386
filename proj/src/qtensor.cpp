#include "canids/qtensor.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace canids {

int QuantSpec::lo() const {
    if (!is_signed) return 0;
    int half = 1 << (bits - 1);
    return narrow ? -(half - 1) : -half;
}

int QuantSpec::hi() const {
    if (!is_signed) return (1 << bits) - 1;
    return (1 << (bits - 1)) - 1;
}

void QuantSpec::validate() const {
    if (bits < 2 || bits > 8) throw std::runtime_error("quantiser bits must be in [2, 8]");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw std::runtime_error("quantiser scale must be positive and finite");
}

int quantize_value(double x, const QuantSpec& spec) {
    spec.validate();
    if (!std::isfinite(x)) throw std::runtime_error("cannot quantize non-finite value");
    double r = std::round(x / spec.scale);  // half away from zero
    double lo = spec.lo(), hi = spec.hi();
    if (r < lo) r = lo;
    if (r > hi) r = hi;
    return static_cast<int>(r);
}

double fake_quant_value(double x, const QuantSpec& spec) {
    return spec.scale * static_cast<double>(quantize_value(x, spec));
}

bool quant_in_range(double x, const QuantSpec& spec) {
    spec.validate();
    if (!std::isfinite(x)) throw std::runtime_error("cannot quantize non-finite value");
    double r = std::round(x / spec.scale);
    return r >= spec.lo() && r <= spec.hi();
}

double ste_grad_x(double x, const QuantSpec& spec) {
    return quant_in_range(x, spec) ? 1.0 : 0.0;
}

double ste_grad_scale(double x, const QuantSpec& spec) {
    spec.validate();
    if (!std::isfinite(x)) throw std::runtime_error("cannot quantize non-finite value");
    double ratio = x / spec.scale;
    double r = std::round(ratio);
    if (r < spec.lo()) return spec.lo();
    if (r > spec.hi()) return spec.hi();
    return r - ratio;
}

QTensor quantize(std::span<const double> x, std::span<const int> shape, const QuantSpec& spec) {
    spec.validate();
    std::size_t count = 1;
    for (int d : shape) {
        if (d <= 0) throw std::runtime_error("tensor shape dims must be positive");
        count *= static_cast<std::size_t>(d);
    }
    if (count != x.size()) throw std::runtime_error("tensor shape does not match value count");

    QTensor t;
    t.shape.assign(shape.begin(), shape.end());
    t.spec = spec;
    t.values.reserve(x.size());
    for (double v : x) t.values.push_back(quantize_value(v, spec));
    return t;
}

std::vector<double> dequantize(const QTensor& t) {
    t.spec.validate();
    std::vector<double> out;
    out.reserve(t.values.size());
    for (int q : t.values) out.push_back(t.spec.scale * static_cast<double>(q));
    return out;
}

std::vector<double> fake_quant(std::span<const double> x, const QuantSpec& spec) {
    std::vector<double> out;
    out.reserve(x.size());
    for (double v : x) out.push_back(fake_quant_value(v, spec));
    return out;
}

CalibrationResult calibrate_scale(std::span<const double> x, const QuantSpec& spec, CalibrationMode) {
    if (spec.bits < 2 || spec.bits > 8) throw std::runtime_error("quantiser bits must be in [2, 8]");
    if (x.empty()) throw std::runtime_error("cannot calibrate on an empty tensor");
    double max_abs = 0.0;
    for (double v : x) {
        if (!std::isfinite(v)) throw std::runtime_error("cannot calibrate on non-finite values");
        max_abs = std::max(max_abs, std::abs(v));
    }
    if (max_abs == 0.0) return {1.0, true};
    return {max_abs / static_cast<double>(spec.hi()), false};
}

}  // namespace canids
