#pragma once

#include <span>
#include <vector>

namespace canids {

// Symmetric uniform quantiser description. Signed specs use the narrow range
// [-(2^(b-1)-1), 2^(b-1)-1] by default, so 2-bit signed is ternary. Unsigned
// specs cover [0, 2^b - 1].
struct QuantSpec {
    int bits = 2;
    bool is_signed = true;
    bool narrow = true;  // only meaningful for signed specs
    double scale = 1.0;

    int lo() const;
    int hi() const;
    void validate() const;  // throws on bits outside [2,8] or scale <= 0
};

// clamp(round_half_away_from_zero(x / scale), lo, hi)
int quantize_value(double x, const QuantSpec& spec);

// scale * q(x)
double fake_quant_value(double x, const QuantSpec& spec);

// True when rounding x/scale lands inside [lo, hi], i.e. the clamp is
// inactive. Straight-through gradients pass exactly there.
bool quant_in_range(double x, const QuantSpec& spec);

// d(fake_quant)/dx under the saturating straight-through estimator.
double ste_grad_x(double x, const QuantSpec& spec);

// d(fake_quant)/dscale: q - x/scale where the clamp is inactive, and the
// saturated level (lo or hi) where it clamps.
double ste_grad_scale(double x, const QuantSpec& spec);

struct QTensor {
    std::vector<int> values;
    std::vector<int> shape;
    QuantSpec spec;
};

QTensor quantize(std::span<const double> x, std::span<const int> shape, const QuantSpec& spec);
std::vector<double> dequantize(const QTensor& t);
std::vector<double> fake_quant(std::span<const double> x, const QuantSpec& spec);

enum class CalibrationMode {
    MaxAbs,       // per-tensor scale from the max-abs rule
    LearnedInit,  // same formula, used once to seed a trainable scale
};

struct CalibrationResult {
    double scale = 1.0;
    bool all_zero_fallback = false;
};

// scale = max|x| / hi. An all-zero tensor falls back to scale 1.
CalibrationResult calibrate_scale(std::span<const double> x, const QuantSpec& spec, CalibrationMode mode);

}  // namespace canids
