#pragma once

// Shared types between the array and the mapper: the array configuration,
// ProDF layout plans, and their injection/collection schedules.

#include <cstdint>
#include <vector>

#include "epochsim/pe.hpp"

namespace epochsim {

struct ArrayConfig {
    int rows = 0;
    int cols = 0;
    double cycle_time_ns = 1.4;
    Precision precision = Precision::Real32;
    int word_bits = 32;
    PowerTable power_table = PowerTable::Fp32;
    NumericEnv env;
};

inline void validate_config(const ArrayConfig& cfg) {
    if (cfg.rows < 1 || cfg.cols < 1)
        throw std::invalid_argument("array config: rows*cols must be >= 1");
    if (!(cfg.cycle_time_ns > 0.0))
        throw std::invalid_argument("array config: cycle_time_ns must be > 0");
    validate_format(cfg.env.real_fmt);
    validate_format(cfg.env.cplx_fmt);
}

// Boundary feed for one compute cycle of an explicit (GEMM) schedule.
struct Feed {
    enum class Side : uint8_t { North, West };
    Side side = Side::North;
    int index = 0;          // column for North, row for West
    ScalarValue value;
    bool weight_port = false;  // charged to weight SRAM instead of io SRAM
};

struct InjectSpec {
    enum class Kind : uint8_t { SsmBroadcast, Explicit };
    Kind kind = Kind::SsmBroadcast;
    // SsmBroadcast: one token per cycle fanned out to these top-row diagonal
    // inputs; costs a single io read per cycle.
    std::vector<int> broadcast_cols;
    // Explicit: feeds[cycle-1] lists the words injected that cycle.
    std::vector<std::vector<Feed>> feeds;
};

// One boundary tap: reads the south output of (row, col) starting at
// first_cycle. The k-th collected word lands at dest_base + k*dest_stride in
// the flat output buffer.
struct TapSchedule {
    int row = 0;
    int col = 0;
    int64_t first_cycle = 1;
    int64_t count = 0;
    int64_t dest_base = 0;
    int64_t dest_stride = 1;
};

struct CollectSpec {
    std::vector<TapSchedule> taps;
    int64_t out_size = 0;
    // SSM plans stream one output per token: tap counts and out_size follow
    // the token count handed to run_compute instead of the stored values.
    bool count_is_stream_len = false;
    int64_t heads = 1;
};

enum class PlanKind : uint8_t { Ssm, GemmOs, GemmWsIs };

struct LayoutPlan {
    PlanKind kind = PlanKind::Ssm;
    int rows = 0, cols = 0;            // array dimensions the plan targets
    int plan_rows = 0, plan_cols = 0;  // active footprint, top-left anchored
    Precision precision = Precision::Real32;
    std::vector<PEMode> mode_grid;          // rows*cols
    std::vector<ScalarValue> stationary_grid;
    InjectSpec inject;
    CollectSpec collect;
    int64_t fill_latency = 0;          // SSM pipeline depth after last token
    int64_t predicted_first_output = 0;
    int64_t predicted_total = 0;       // compute-phase cycles
    bool has_readout_phase = false;    // output-stationary plans drain later

    PEMode mode_at(int r, int c) const {
        return mode_grid[static_cast<size_t>(r) * cols + c];
    }
    ScalarValue stationary_at(int r, int c) const {
        return stationary_grid[static_cast<size_t>(r) * cols + c];
    }
};

enum class GemmDataflow : uint8_t { OS, WS, IS };

struct GemmSpec {
    int64_t m = 0;
    int64_t k = 0;
    int64_t n = 0;
    GemmDataflow dataflow = GemmDataflow::OS;
};

}  // namespace epochsim
