#pragma once

// Bit-exact fixed-point arithmetic for the simulator: signed Q-format reals
// (default Q16.16 in a 32-bit word) and packed complex values with two
// 16-bit components (default Q8.8 each, real part in the high half).
//
// All operations round to nearest-even and saturate instead of wrapping.
// Saturation events are tallied in a thread-local counter so a run can
// assert it never clipped.

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace epochsim {

struct QFormat {
    uint8_t total_bits = 32;
    uint8_t frac_bits = 16;

    friend bool operator==(const QFormat&, const QFormat&) = default;
};

inline void validate_format(const QFormat& f) {
    if (f.total_bits != 8 && f.total_bits != 16 && f.total_bits != 32)
        throw std::invalid_argument("QFormat: total_bits must be 8, 16 or 32");
    if (f.frac_bits == 0 || f.frac_bits >= f.total_bits)
        throw std::invalid_argument("QFormat: need 0 < frac_bits < total_bits");
}

constexpr int64_t q_max_raw(const QFormat& f) {
    return (int64_t{1} << (f.total_bits - 1)) - 1;
}
constexpr int64_t q_min_raw(const QFormat& f) {
    return -(int64_t{1} << (f.total_bits - 1));
}

// One counter per thread; a simulation run is single-threaded, so the tally
// is deterministic. Sweep workers each see their own counter.
inline thread_local uint64_t tl_saturation_count = 0;

inline uint64_t saturation_count() { return tl_saturation_count; }
inline void reset_saturation_count() { tl_saturation_count = 0; }

inline int64_t saturate_raw(int64_t v, const QFormat& f) {
    const int64_t hi = q_max_raw(f);
    const int64_t lo = q_min_raw(f);
    if (v > hi) { ++tl_saturation_count; return hi; }
    if (v < lo) { ++tl_saturation_count; return lo; }
    return v;
}

// Arithmetic shift right by `s` with round-to-nearest, ties to even.
// `v >> s` floors on two's complement, so the dropped remainder is in
// [0, 2^s) and the tie test is exact.
inline int64_t rne_shift(int64_t v, int s) {
    if (s <= 0) return v;
    const int64_t q = v >> s;
    const int64_t rem = v - (q << s);
    const int64_t half = int64_t{1} << (s - 1);
    if (rem > half || (rem == half && (q & 1)))
        return q + 1;
    return q;
}

struct QReal {
    int32_t raw = 0;
    QFormat fmt{};
};

inline QReal q_from_float(double x, const QFormat& fmt) {
    if (std::isnan(x)) return {0, fmt};
    const double scaled = std::ldexp(x, fmt.frac_bits);
    int64_t raw;
    if (scaled >= static_cast<double>(q_max_raw(fmt))) {
        ++tl_saturation_count;
        raw = q_max_raw(fmt);
    } else if (scaled <= static_cast<double>(q_min_raw(fmt))) {
        ++tl_saturation_count;
        raw = q_min_raw(fmt);
    } else {
        // nearbyint honours the default FE_TONEAREST mode: ties to even.
        raw = static_cast<int64_t>(std::nearbyint(scaled));
    }
    return {static_cast<int32_t>(raw), fmt};
}

inline double q_to_float(const QReal& a) {
    return std::ldexp(static_cast<double>(a.raw), -a.fmt.frac_bits);
}

inline QReal q_add(const QReal& a, const QReal& b) {
    const int64_t s = int64_t{a.raw} + int64_t{b.raw};
    return {static_cast<int32_t>(saturate_raw(s, a.fmt)), a.fmt};
}

inline QReal q_mul(const QReal& a, const QReal& b) {
    const int64_t wide = int64_t{a.raw} * int64_t{b.raw};
    const int64_t r = rne_shift(wide, a.fmt.frac_bits);
    return {static_cast<int32_t>(saturate_raw(r, a.fmt)), a.fmt};
}

// Packed complex word: real part in bits 31..16, imaginary in 15..0, both
// two's complement. This layout is normative for dump files.
struct QComplex {
    uint32_t packed = 0;
    QFormat comp_fmt{16, 8};
};

inline uint32_t pack_complex(int32_t re_raw, int32_t im_raw) {
    return (static_cast<uint32_t>(static_cast<uint16_t>(re_raw)) << 16) |
           static_cast<uint32_t>(static_cast<uint16_t>(im_raw));
}

inline int32_t unpack_re(uint32_t packed) {
    return static_cast<int16_t>(packed >> 16);
}
inline int32_t unpack_im(uint32_t packed) {
    return static_cast<int16_t>(packed & 0xFFFFu);
}

inline QComplex c_from_parts(const QReal& re, const QReal& im) {
    return {pack_complex(re.raw, im.raw), re.fmt};
}

inline QReal c_re(const QComplex& a) { return {unpack_re(a.packed), a.comp_fmt}; }
inline QReal c_im(const QComplex& a) { return {unpack_im(a.packed), a.comp_fmt}; }

inline QComplex c_from_float(std::complex<double> z, const QFormat& comp_fmt) {
    return c_from_parts(q_from_float(z.real(), comp_fmt),
                        q_from_float(z.imag(), comp_fmt));
}

inline std::complex<double> c_to_float(const QComplex& a) {
    return {q_to_float(c_re(a)), q_to_float(c_im(a))};
}

inline QComplex c_add(const QComplex& a, const QComplex& b) {
    return c_from_parts(q_add(c_re(a), c_re(b)), q_add(c_im(a), c_im(b)));
}

// Schoolbook complex product. Each result component is formed exactly in a
// 64-bit intermediate and rounded once, so no precision is lost to the
// inner sums.
inline QComplex c_mul(const QComplex& a, const QComplex& b) {
    const QFormat f = a.comp_fmt;
    const int64_t ar = unpack_re(a.packed), ai = unpack_im(a.packed);
    const int64_t br = unpack_re(b.packed), bi = unpack_im(b.packed);
    const int64_t re_wide = ar * br - ai * bi;
    const int64_t im_wide = ar * bi + ai * br;
    const int32_t re = static_cast<int32_t>(saturate_raw(rne_shift(re_wide, f.frac_bits), f));
    const int32_t im = static_cast<int32_t>(saturate_raw(rne_shift(im_wide, f.frac_bits), f));
    return {pack_complex(re, im), f};
}

// ---------------------------------------------------------------------------
// ScalarValue: the word a PE port carries. Either a Q16.16-style real or a
// packed 16+16 complex, per the run's precision flag.

enum class Precision : uint8_t { Real32, Complex16 };

inline const char* precision_name(Precision p) {
    return p == Precision::Real32 ? "real32" : "complex16";
}

struct NumericEnv {
    QFormat real_fmt{32, 16};
    QFormat cplx_fmt{16, 8};
};

struct ScalarValue {
    int32_t bits = 0;
    Precision prec = Precision::Real32;

    friend bool operator==(const ScalarValue&, const ScalarValue&) = default;
};

inline ScalarValue sv_zero(Precision p) { return {0, p}; }

inline ScalarValue sv_from_real(double x, const NumericEnv& env, Precision p) {
    if (p == Precision::Real32)
        return {q_from_float(x, env.real_fmt).raw, p};
    return {static_cast<int32_t>(c_from_float({x, 0.0}, env.cplx_fmt).packed), p};
}

inline ScalarValue sv_from_complex(std::complex<double> z, const NumericEnv& env,
                                   Precision p) {
    if (p == Precision::Real32) {
        // Real mode cannot carry an imaginary part; callers validate upstream.
        return {q_from_float(z.real(), env.real_fmt).raw, p};
    }
    return {static_cast<int32_t>(c_from_float(z, env.cplx_fmt).packed), p};
}

inline std::complex<double> sv_to_complex(const ScalarValue& v, const NumericEnv& env) {
    if (v.prec == Precision::Real32)
        return {q_to_float({v.bits, env.real_fmt}), 0.0};
    return c_to_float({static_cast<uint32_t>(v.bits), env.cplx_fmt});
}

inline ScalarValue sv_add(const ScalarValue& a, const ScalarValue& b,
                          const NumericEnv& env) {
    if (a.prec == Precision::Real32) {
        const QReal r = q_add({a.bits, env.real_fmt}, {b.bits, env.real_fmt});
        return {r.raw, a.prec};
    }
    const QComplex r = c_add({static_cast<uint32_t>(a.bits), env.cplx_fmt},
                             {static_cast<uint32_t>(b.bits), env.cplx_fmt});
    return {static_cast<int32_t>(r.packed), a.prec};
}

inline ScalarValue sv_mul(const ScalarValue& a, const ScalarValue& b,
                          const NumericEnv& env) {
    if (a.prec == Precision::Real32) {
        const QReal r = q_mul({a.bits, env.real_fmt}, {b.bits, env.real_fmt});
        return {r.raw, a.prec};
    }
    const QComplex r = c_mul({static_cast<uint32_t>(a.bits), env.cplx_fmt},
                             {static_cast<uint32_t>(b.bits), env.cplx_fmt});
    return {static_cast<int32_t>(r.packed), a.prec};
}

}  // namespace epochsim
