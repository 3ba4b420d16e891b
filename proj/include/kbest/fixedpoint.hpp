#pragma once

// Signed complex fixed-point arithmetic with saturation.
//
// Values are held as scaled integers (value * 2^fraction_bits). Every
// operation rounds to nearest with ties away from zero and saturates to the
// format range; nothing ever wraps.

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kbest {

/// Signed Q-format: one sign bit, `integer_bits`, `fraction_bits`.
struct QFormat {
    int integer_bits = 7;
    int fraction_bits = 8;

    static constexpr int kMaxTotalBits = 32;

    constexpr int total_bits() const { return 1 + integer_bits + fraction_bits; }
    constexpr std::int64_t max_raw() const { return (std::int64_t{1} << (integer_bits + fraction_bits)) - 1; }
    constexpr std::int64_t min_raw() const { return -(std::int64_t{1} << (integer_bits + fraction_bits)); }
    constexpr double scale() const { return static_cast<double>(std::int64_t{1} << fraction_bits); }
    constexpr double resolution() const { return 1.0 / scale(); }
    double max_value() const { return static_cast<double>(max_raw()) / scale(); }
    double min_value() const { return static_cast<double>(min_raw()) / scale(); }

    constexpr bool valid() const {
        return integer_bits >= 0 && fraction_bits >= 0 && total_bits() <= kMaxTotalBits;
    }

    friend constexpr bool operator==(const QFormat&, const QFormat&) = default;

    /// "sN.I.F", e.g. "s1.7.8". N must be 1.
    static QFormat parse(std::string_view text);
    std::string to_string() const {
        return "s1." + std::to_string(integer_bits) + "." + std::to_string(fraction_bits);
    }
};

inline QFormat QFormat::parse(std::string_view text) {
    auto fail = [&]() -> QFormat {
        throw std::invalid_argument("bad Q-format '" + std::string(text) + "' (expected sN.I.F, e.g. s1.7.8)");
    };
    if (text.size() < 2 || text.front() != 's') return fail();
    int fields[3] = {0, 0, 0};
    int idx = 0;
    bool have_digit = false;
    for (std::size_t i = 1; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '.') {
            if (!have_digit || idx == 2) return fail();
            ++idx;
            have_digit = false;
        } else if (c >= '0' && c <= '9') {
            if (fields[idx] > 1000) return fail();
            fields[idx] = fields[idx] * 10 + (c - '0');
            have_digit = true;
        } else {
            return fail();
        }
    }
    if (idx != 2 || !have_digit || fields[0] != 1) return fail();
    QFormat fmt{fields[1], fields[2]};
    if (!fmt.valid()) return fail();
    return fmt;
}

namespace fx {

inline std::int64_t saturate(__int128 v, const QFormat& fmt) {
    if (v > fmt.max_raw()) return fmt.max_raw();
    if (v < fmt.min_raw()) return fmt.min_raw();
    return static_cast<std::int64_t>(v);
}

/// v / 2^shift rounded to nearest, ties away from zero.
inline __int128 round_shift(__int128 v, int shift) {
    if (shift == 0) return v;
    const __int128 half = __int128{1} << (shift - 1);
    if (v >= 0) return (v + half) >> shift;
    return -((-v + half) >> shift);
}

/// Real value to saturated raw integer.
inline std::int64_t to_raw(double x, const QFormat& fmt) {
    if (x != x) throw std::invalid_argument("cannot quantize NaN");
    const double scaled = x * fmt.scale();
    // Clamp before converting; anything beyond the range saturates anyway.
    if (scaled >= static_cast<double>(fmt.max_raw())) return fmt.max_raw();
    if (scaled <= static_cast<double>(fmt.min_raw())) return fmt.min_raw();
    return saturate(std::llround(scaled), fmt);
}

inline double from_raw(std::int64_t raw, const QFormat& fmt) { return static_cast<double>(raw) / fmt.scale(); }

/// Quantize a real to the nearest representable value of `fmt`.
inline double quantize(double x, const QFormat& fmt) { return from_raw(to_raw(x, fmt), fmt); }

}  // namespace fx

/// Complex fixed-point value. `re`/`im` are raw scaled integers.
struct CFix {
    std::int64_t re = 0;
    std::int64_t im = 0;
    QFormat fmt{};

    static CFix from_raw(std::int64_t re, std::int64_t im, const QFormat& fmt) {
        return CFix{fx::saturate(re, fmt), fx::saturate(im, fmt), fmt};
    }
    static CFix quantize(std::complex<double> z, const QFormat& fmt) {
        return CFix{fx::to_raw(z.real(), fmt), fx::to_raw(z.imag(), fmt), fmt};
    }
    static CFix from_int(std::int64_t re, std::int64_t im, const QFormat& fmt) {
        const __int128 s = __int128{1} << fmt.fraction_bits;
        return CFix{fx::saturate(re * s, fmt), fx::saturate(im * s, fmt), fmt};
    }

    std::complex<double> to_complex() const { return {fx::from_raw(re, fmt), fx::from_raw(im, fmt)}; }

    friend bool operator==(const CFix&, const CFix&) = default;
};

namespace fx {

inline void require_same_format(const CFix& a, const CFix& b) {
    if (!(a.fmt == b.fmt))
        throw std::logic_error("fixed-point format mismatch: " + a.fmt.to_string() + " vs " + b.fmt.to_string());
}

inline CFix add(const CFix& a, const CFix& b) {
    require_same_format(a, b);
    return CFix{saturate(__int128{a.re} + b.re, a.fmt), saturate(__int128{a.im} + b.im, a.fmt), a.fmt};
}

inline CFix sub(const CFix& a, const CFix& b) {
    require_same_format(a, b);
    return CFix{saturate(__int128{a.re} - b.re, a.fmt), saturate(__int128{a.im} - b.im, a.fmt), a.fmt};
}

/// Full-precision complex product, one rounding per component, then saturation.
inline CFix mul(const CFix& a, const CFix& b) {
    require_same_format(a, b);
    const __int128 re = __int128{a.re} * b.re - __int128{a.im} * b.im;
    const __int128 im = __int128{a.re} * b.im + __int128{a.im} * b.re;
    const int f = a.fmt.fraction_bits;
    return CFix{saturate(round_shift(re, f), a.fmt), saturate(round_shift(im, f), a.fmt), a.fmt};
}

/// Product with a Gaussian integer; exact apart from saturation.
inline CFix mul_int(const CFix& a, std::int64_t zr, std::int64_t zi) {
    const __int128 re = __int128{a.re} * zr - __int128{a.im} * zi;
    const __int128 im = __int128{a.re} * zi + __int128{a.im} * zr;
    return CFix{saturate(re, a.fmt), saturate(im, a.fmt), a.fmt};
}

/// |a|^2 as a raw real in the same format.
inline std::int64_t norm(const CFix& a) {
    const __int128 sq = __int128{a.re} * a.re + __int128{a.im} * a.im;
    return saturate(round_shift(sq, a.fmt.fraction_bits), a.fmt);
}

inline std::int64_t add_real(std::int64_t a, std::int64_t b, const QFormat& fmt) {
    return saturate(__int128{a} + b, fmt);
}

}  // namespace fx

}  // namespace kbest
