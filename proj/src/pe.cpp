#include "epochsim/pe.hpp"

#include <string>

namespace epochsim {

namespace {
constexpr std::array<const char*, kNumModes> kModeNames = {
    "FRI", "TRI", "BWS", "TOS", "WS", "IS", "PassThrough", "Sleep"};

// Table of per-mode power draw, mW. Index: sleep, pass-through, accumulation.
constexpr double kPowerFp32[3] = {3.8, 6.7, 11.5};
constexpr double kPowerInt8[3] = {0.54, 0.73, 0.89};
}  // namespace

const char* mode_name(PEMode m) { return kModeNames[static_cast<size_t>(m)]; }

PEMode mode_from_name(const std::string& name) {
    for (int i = 0; i < kNumModes; ++i)
        if (name == kModeNames[static_cast<size_t>(i)]) return static_cast<PEMode>(i);
    throw std::invalid_argument("unknown PE mode name: " + name);
}

uint32_t encode_control(const PEControl& c) {
    return static_cast<uint32_t>(c.mode) | (c.complex_flag ? 0x8u : 0x0u);
}

PEControl decode_control(uint32_t word) {
    if (word & ~0xFu)
        throw InvalidControlError("control word has reserved bits set: 0x" +
                                  [](uint32_t w) {
                                      char buf[9];
                                      std::snprintf(buf, sizeof buf, "%08X", w);
                                      return std::string(buf);
                                  }(word));
    PEControl c;
    c.mode = static_cast<PEMode>(word & 0x7u);
    c.complex_flag = (word & 0x8u) != 0;
    c.clock = ClockEnable::Off;
    return c;
}

PreloadWord preload_step(PEState& pe, const PreloadWord& in) {
    const PreloadWord old{pe.stationary, encode_control(pe.control)};
    pe.stationary = in.stationary;
    pe.control = decode_control(in.control_word);
    pe.control.clock = ClockEnable::Load;
    return old;
}

PortsOut compute_step(PEState& pe, const PortsIn& in, const NumericEnv& env) {
    const Precision p = pe.control.complex_flag ? Precision::Complex16 : Precision::Real32;
    const ScalarValue zero = sv_zero(p);
    PortsOut out{zero, zero, zero};

    const uint64_t sat_before = saturation_count();

    switch (pe.control.mode) {
        case PEMode::FRI: {
            // state <- stationary * state + north; scaled input is consumed.
            pe.accum = sv_add(sv_mul(pe.stationary, pe.accum, env), in.north, env);
            out.diag = pe.accum;
            break;
        }
        case PEMode::TRI: {
            // state <- (stationary + north) * state + north.
            const ScalarValue coeff = sv_add(pe.stationary, in.north, env);
            pe.accum = sv_add(sv_mul(coeff, pe.accum, env), in.north, env);
            out.diag = pe.accum;
            break;
        }
        case PEMode::BWS: {
            // Banded WS: operand arrives diagonally, partials move south.
            out.south = sv_add(in.north, sv_mul(pe.stationary, in.diag, env), env);
            out.diag = in.diag;
            break;
        }
        case PEMode::TOS: {
            pe.accum = sv_add(pe.accum, sv_mul(in.north, in.west, env), env);
            out.south = in.north;
            out.east = in.west;
            break;
        }
        case PEMode::WS:
        case PEMode::IS: {
            out.south = sv_add(in.north, sv_mul(pe.stationary, in.west, env), env);
            out.east = in.west;
            break;
        }
        case PEMode::PassThrough: {
            out.south = in.north;
            out.east = in.west;
            out.diag = in.diag;
            break;
        }
        case PEMode::Sleep:
            break;
    }

    pe.saturations += saturation_count() - sat_before;
    return out;
}

double power_of(PEMode mode, PowerTable table) {
    const double* row = (table == PowerTable::Fp32) ? kPowerFp32 : kPowerInt8;
    if (mode == PEMode::Sleep) return row[0];
    if (mode == PEMode::PassThrough) return row[1];
    return row[2];
}

}  // namespace epochsim
