#pragma once

// One LIMA-PE: eight operating modes, six directional ports, two internal
// buffers (stationary and state/partial), and the mode power table.
//
// Control word layout (normative for dump files):
//   bits 2..0  mode code     bits 31..4  reserved, must be zero
//   bit  3     complex flag
//
// Mode codes: 000 FRI, 001 TRI, 010 BWS, 011 TOS, 100 WS, 101 IS,
// 110 PassThrough, 111 Sleep.

#include <array>
#include <cstdint>
#include <stdexcept>

#include "epochsim/numerics.hpp"

namespace epochsim {

enum class PEMode : uint8_t {
    FRI = 0,
    TRI = 1,
    BWS = 2,
    TOS = 3,
    WS = 4,
    IS = 5,
    PassThrough = 6,
    Sleep = 7,
};

constexpr int kNumModes = 8;

const char* mode_name(PEMode m);
PEMode mode_from_name(const std::string& name);

inline bool is_mac_mode(PEMode m) {
    return m != PEMode::PassThrough && m != PEMode::Sleep;
}

enum class ClockEnable : uint8_t { Load, Compute, Off };

struct PEControl {
    PEMode mode = PEMode::Sleep;
    bool complex_flag = false;
    ClockEnable clock = ClockEnable::Off;
};

struct InvalidControlError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

uint32_t encode_control(const PEControl& c);

// Throws InvalidControlError when any reserved bit (31..4) is set.
PEControl decode_control(uint32_t word);

struct PortsIn {
    ScalarValue north;
    ScalarValue west;
    ScalarValue diag;  // from the northeast neighbour
};

struct PortsOut {
    ScalarValue south;
    ScalarValue east;
    ScalarValue diag;  // toward the southwest neighbour
};

struct PEState {
    ScalarValue stationary;
    ScalarValue accum;       // state-map or partial-sum buffer
    PEControl control;
    // Occupied cycles billed per mode: compute cycles land on the configured
    // mode, preload/readout on PassThrough, reset on Sleep.
    std::array<uint64_t, kNumModes> energy_cycles{};
    uint64_t saturations = 0;
};

// Pre-Load Phase: latch the incoming stationary/control pair and hand the
// previously held pair east, shift-register style. The accum buffer is
// untouched.
struct PreloadWord {
    ScalarValue stationary;
    uint32_t control_word = 0;
};

PreloadWord preload_step(PEState& pe, const PreloadWord& in);

// Compute Phase: one cycle. Outputs are functions of the inputs and the
// state at cycle start. FRI/TRI place the freshly updated state on the
// diagonal output in the same cycle (combinational forward); registered
// forwarding would cost one extra cycle of first-output latency.
PortsOut compute_step(PEState& pe, const PortsIn& in, const NumericEnv& env);

enum class PowerTable : uint8_t { Fp32, Int8 };

// Mode power in mW. All MAC modes share the accumulation price; preload
// cycles are billed at the pass-through price by the energy model.
double power_of(PEMode mode, PowerTable table);

}  // namespace epochsim
