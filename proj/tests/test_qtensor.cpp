#include "canids/qtensor.hpp"
#include "canids/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace canids;

namespace {

QuantSpec spec(int bits, bool is_signed, bool narrow, double scale) {
    QuantSpec s;
    s.bits = bits;
    s.is_signed = is_signed;
    s.narrow = narrow;
    s.scale = scale;
    return s;
}

}  // namespace

TEST_CASE("level ranges") {
    CHECK(spec(2, true, true, 1).lo() == -1);
    CHECK(spec(2, true, true, 1).hi() == 1);
    CHECK(spec(2, true, false, 1).lo() == -2);
    CHECK(spec(4, true, true, 1).lo() == -7);
    CHECK(spec(4, true, true, 1).hi() == 7);
    CHECK(spec(3, false, false, 1).lo() == 0);
    CHECK(spec(3, false, false, 1).hi() == 7);
    CHECK(spec(8, false, false, 1).hi() == 255);
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(spec(1, true, true, 1).validate(), std::runtime_error);
    CHECK_THROWS_AS(spec(9, true, true, 1).validate(), std::runtime_error);
    CHECK_THROWS_AS(spec(2, true, true, 0.0).validate(), std::runtime_error);
    CHECK_THROWS_AS(spec(2, true, true, -0.5).validate(), std::runtime_error);
    CHECK_THROWS_AS(spec(2, true, true, std::numeric_limits<double>::infinity()).validate(), std::runtime_error);
    CHECK_NOTHROW(spec(2, true, true, 0.5).validate());
}

TEST_CASE("quantize worked values") {
    auto t = spec(2, true, true, 0.5);
    CHECK(quantize_value(0.6, t) == 1);
    CHECK(quantize_value(-10.0, t) == -1);
    CHECK(quantize_value(0.0, t) == 0);

    auto w4 = spec(4, true, true, 1.0);
    CHECK(quantize_value(7.4, w4) == 7);
    CHECK(quantize_value(7.6, w4) == 7);

    auto u3 = spec(3, false, false, 2.0);
    CHECK(quantize_value(9.0, u3) == 5);  // 4.5 rounds away from zero
    CHECK(quantize_value(20.0, u3) == 7);
}

TEST_CASE("round half away from zero") {
    auto s = spec(4, true, true, 1.0);
    CHECK(quantize_value(0.5, s) == 1);
    CHECK(quantize_value(-0.5, s) == -1);
    CHECK(quantize_value(1.5, s) == 2);
    CHECK(quantize_value(-1.5, s) == -2);
    CHECK(quantize_value(2.5, s) == 3);
}

TEST_CASE("non-finite input is rejected") {
    auto s = spec(2, true, true, 0.5);
    CHECK_THROWS_AS(quantize_value(std::numeric_limits<double>::quiet_NaN(), s), std::runtime_error);
    CHECK_THROWS_AS(quantize_value(std::numeric_limits<double>::infinity(), s), std::runtime_error);
}

TEST_CASE("dequantize and idempotence") {
    auto s = spec(2, true, true, 0.5);
    CHECK(fake_quant_value(0.6, s) == doctest::Approx(0.5));
    CHECK(fake_quant_value(0.0, s) == 0.0);

    Rng rng(21);
    for (int i = 0; i < 1000; ++i) {
        double x = rng.uniform(-3.0, 3.0);
        double once = fake_quant_value(x, s);
        CHECK(fake_quant_value(once, s) == once);
    }
}

TEST_CASE("ste gradient mask") {
    auto s = spec(2, true, true, 0.5);
    CHECK(ste_grad_x(0.6, s) == 1.0);
    CHECK(ste_grad_x(-10.0, s) == 0.0);
    CHECK(quant_in_range(0.3, s));
    CHECK(!quant_in_range(0.9, s));  // rounds to 2, clamped to 1
}

TEST_CASE("scale gradient follows the learned-scale rule") {
    auto s = spec(2, false, false, 0.5);  // levels 0..3
    // In range: d(s*q)/ds = q - x/s.
    CHECK(ste_grad_scale(0.6, s) == doctest::Approx(1.0 - 0.6 / 0.5));
    // Above the top level the output saturates at s*hi.
    CHECK(ste_grad_scale(10.0, s) == doctest::Approx(3.0));
    // Below zero the output saturates at s*lo = 0.
    CHECK(ste_grad_scale(-4.0, s) == doctest::Approx(0.0));
}

TEST_CASE("quantize respects range, monotonicity, symmetry, and error bound") {
    Rng rng(5);
    const int bit_choices[] = {2, 3, 4, 8};
    for (int bi = 0; bi < 4; ++bi) {
        for (int trial = 0; trial < 200; ++trial) {
            bool is_signed = rng.uniform() < 0.5;
            auto s = spec(bit_choices[bi], is_signed, is_signed, rng.uniform(0.05, 2.0));
            double x = rng.uniform(-20.0, 20.0);
            double y = rng.uniform(-20.0, 20.0);
            int qx = quantize_value(x, s);
            int qy = quantize_value(y, s);
            CHECK(qx >= s.lo());
            CHECK(qx <= s.hi());
            if (x <= y) CHECK(qx <= qy);
            if (is_signed) CHECK(quantize_value(-x, s) == -qx);

            if (x >= s.lo() * s.scale && x <= s.hi() * s.scale)
                CHECK(std::abs(fake_quant_value(x, s) - x) <= s.scale / 2 + 1e-12);
        }
    }
}

TEST_CASE("tensor quantize round trips through its levels") {
    Rng rng(6);
    auto s = spec(3, true, true, 0.25);
    std::vector<double> xs(500);
    for (auto& x : xs) x = rng.uniform(-2.0, 2.0);
    QTensor q = quantize(xs, {static_cast<int>(xs.size())}, s);
    for (auto v : q.values) {
        CHECK(v >= s.lo());
        CHECK(v <= s.hi());
    }
    auto back = dequantize(q);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(back[i] == fake_quant_value(xs[i], s));
}

TEST_CASE("max-abs calibration") {
    auto s2 = spec(2, true, true, 1.0);
    auto r = calibrate_scale(std::vector<double>{0.1, -0.3, 0.2}, s2, CalibrationMode::MaxAbs);
    CHECK(r.scale == doctest::Approx(0.3));
    CHECK(!r.all_zero_fallback);

    auto s4 = spec(4, true, true, 1.0);
    auto r2 = calibrate_scale(std::vector<double>{14.0, -3.0}, s4, CalibrationMode::MaxAbs);
    CHECK(r2.scale == doctest::Approx(2.0));

    auto rz = calibrate_scale(std::vector<double>{0.0, 0.0}, s2, CalibrationMode::MaxAbs);
    CHECK(rz.scale == 1.0);
    CHECK(rz.all_zero_fallback);

    CHECK_THROWS_AS(calibrate_scale({}, s2, CalibrationMode::MaxAbs), std::runtime_error);
}
