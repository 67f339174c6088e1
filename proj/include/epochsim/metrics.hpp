#pragma once

// Analytic and trace-derived evaluation: energy, SRAM port bandwidth, SRAM
// sizing, PE utilization, and the documented baseline traditional-SA cost
// model used for comparisons. SRAM access energy is excluded everywhere;
// every report footer says so.

#include <array>
#include <cstdint>
#include <vector>

#include "epochsim/array.hpp"
#include "epochsim/plan.hpp"

namespace epochsim {

struct EnergyReport {
    // energies in nJ, one bucket per phase
    double reset_nj = 0.0;
    double preload_nj = 0.0;
    double compute_nj = 0.0;
    double readout_nj = 0.0;
    double total_nj = 0.0;

    std::array<uint64_t, kNumModes> compute_mode_cycles{};  // PE-cycles by mode
    uint64_t preload_passthrough_cycles = 0;
    uint64_t readout_passthrough_cycles = 0;
    uint64_t reset_sleep_cycles = 0;
    uint64_t idle_sleep_cycles = 0;  // outside-footprint PEs in preload/readout

    double cycle_time_ns = 0.0;
    PowerTable table = PowerTable::Fp32;
    double sleep_mw = 0.0;
    double passthrough_mw = 0.0;
    double mac_mw = 0.0;
};

EnergyReport energy_of(const EnergyTally& tally, const ArrayConfig& cfg);

struct SramSizing {
    uint64_t weight_bytes = 0;  // plan_rows * plan_cols * word_bits / 8
    uint64_t io_bytes = 0;      // batch * (T + T*H) * word_bits / 8
    int64_t t = 0;
    int batch = 1;
    int h = 1;
    int word_bits = 32;
    int plan_rows = 0;
    int plan_cols = 0;
    uint64_t budget_bytes = 10'000'000;
    bool fits_budget = true;
};

SramSizing sram_sizes(int64_t t, int batch, int h, const LayoutPlan& plan,
                      const ArrayConfig& cfg, uint64_t budget_bytes = 10'000'000);

// The 1-D FFT systolic pipeline's constant utilization, reported alongside.
constexpr double kBoriakoffUtilization = 0.667;

struct UtilizationReport {
    int active_pes = 0;  // PEs in a MAC mode; pass-through and sleep are idle
    int total_pes = 0;
    double ratio = 0.0;
    double boriakoff = kBoriakoffUtilization;
};

UtilizationReport utilization(const LayoutPlan& plan);

// Documented cost model for a traditional weight-stationary SA evaluating
// one S4 layer. Per token:
//   scale      diagonal WS pass         N + fill_cycles
//   recurrence read-modify-write pass   N + 2 * N * sram_roundtrip_cycles_per_word
//   linear     1xN by NxH WS GEMM       N + H + fill_cycles
// total = (N + 1) preload + T * (scale + recurrence + linear).
struct BaselineModel {
    int64_t fill_cycles = 1;
    int64_t sram_roundtrip_cycles_per_word = 2;
};

int64_t baseline_tpu_cycles(int64_t t, int n, int h, const BaselineModel& model = {});

// Baseline energy: every pass runs with its active PEs at the MAC price and
// the rest of the grid at the pass-through price (no clock gating).
double baseline_energy_nj(int64_t t, int n, int h, const ArrayConfig& cfg,
                          const BaselineModel& model = {});

// Average of the baseline's two separately scheduled passes: Layer I uses N
// diagonal PEs, Layer II uses N*H PEs.
double baseline_utilization(int n, int h, const ArrayConfig& cfg);

struct BandwidthPoint {
    int64_t cycle = 0;               // window end, 1-based
    double weight_read_words_per_ns = 0.0;
    double weight_write_words_per_ns = 0.0;
    double io_read_words_per_ns = 0.0;
    double io_write_words_per_ns = 0.0;
};

// Sliding-window average port bandwidth; empty trace gives an empty series.
std::vector<BandwidthPoint> bandwidth_summary(const PortTrace& trace, const ArrayConfig& cfg,
                                              int window = 64);

}  // namespace epochsim
