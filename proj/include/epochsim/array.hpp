#pragma once

// The 2-D systolic fabric: a grid of LIMA-PEs, the directional interconnect
// (south, east, and the northeast-to-southwest diagonal), the four-phase
// execution protocol, boundary injectors/collectors, and SRAM port traffic
// recording.
//
// Update semantics are synchronous lock-step: every compute cycle each PE
// reads the port values its neighbours produced in the previous cycle (or a
// boundary injection), then all PEs step at once.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epochsim/plan.hpp"

namespace epochsim {

enum class Phase : uint8_t { Reset, PreLoad, Compute, Readout };

// Per-cycle SRAM port word counts; one entry per simulated cycle.
struct PortTrace {
    std::vector<uint32_t> weight_reads;
    std::vector<uint32_t> weight_writes;
    std::vector<uint32_t> io_reads;
    std::vector<uint32_t> io_writes;

    void push(uint32_t wr, uint32_t ww, uint32_t ior, uint32_t iow) {
        weight_reads.push_back(wr);
        weight_writes.push_back(ww);
        io_reads.push_back(ior);
        io_writes.push_back(iow);
    }
    size_t size() const { return weight_reads.size(); }
};

struct PhaseCycles {
    int64_t reset = 0;
    int64_t preload = 0;
    int64_t compute = 0;
    int64_t readout = 0;
    int64_t total() const { return reset + preload + compute + readout; }
};

// PE-cycles billed at each price level, split by phase. Preload and readout
// cycles are billed at the pass-through price for every PE the plan touches;
// reset cycles at the sleep price for the whole grid.
struct EnergyTally {
    uint64_t reset_sleep = 0;
    uint64_t preload_pass = 0;
    uint64_t preload_sleep = 0;
    std::array<uint64_t, kNumModes> compute_modes{};
    uint64_t readout_pass = 0;
    uint64_t readout_sleep = 0;
};

struct ComputeResult {
    std::vector<ScalarValue> outputs;   // dest-indexed per the collect spec
    int64_t cycles = 0;
    int64_t first_output_cycle = 0;     // 0 when nothing was collected
    bool outputs_consecutive = true;    // every tap collected once per cycle
    int64_t words_injected = 0;
    int64_t words_collected = 0;
};

struct ReadoutResult {
    std::vector<ScalarValue> values;    // plan_rows x plan_cols, row-major
    int64_t cycles = 0;
    bool streaming_plan_warning = false;
};

// Where the output ports of PE (r, c) land; nullopt means the value exits
// the grid at a boundary collector.
struct NeighborMap {
    std::optional<std::pair<int, int>> south;
    std::optional<std::pair<int, int>> east;
    std::optional<std::pair<int, int>> diag;
};

NeighborMap wire(int r, int c, int rows, int cols);

class SystolicArray {
public:
    explicit SystolicArray(const ArrayConfig& cfg);

    // Reset Phase: clears every PE buffer and counter. One cycle.
    void run_reset();

    // Clears state/partial buffers between sequences of a batch, keeping
    // the stationary weights. One cycle.
    void run_state_reset();

    // Pre-Load Phase: shifts the plan's stationary/control columns in from
    // the west edge. plan_cols + 1 cycles.
    void run_preload(const LayoutPlan& plan);

    // Compute Phase. For SSM plans `tokens` is the input stream (shorter
    // streams drain the pipeline; empty streams cost zero cycles). GEMM
    // plans carry their feeds in the plan and ignore `tokens`.
    ComputeResult run_compute(const LayoutPlan& plan, std::span<const ScalarValue> tokens);

    // Readout Phase: drains resident results southward, one row per cycle.
    ReadoutResult run_readout(const LayoutPlan& plan);

    const ArrayConfig& config() const { return cfg_; }
    const PortTrace& trace() const { return trace_; }
    const PhaseCycles& phase_cycles() const { return phases_; }
    const EnergyTally& energy_tally() const { return tally_; }
    const PEState& pe(int r, int c) const { return pes_[idx(r, c)]; }
    uint64_t total_saturations() const;

    // Debug dump: JSON grid of mode / stationary / accum.
    std::string snapshot_json() const;

private:
    size_t idx(int r, int c) const { return static_cast<size_t>(r) * cfg_.cols + c; }
    void bill_uniform_cycle(int footprint_rows, int footprint_cols, bool preload_phase);
    void require_last(std::initializer_list<Phase> allowed, const char* op) const;

    ArrayConfig cfg_;
    std::vector<PEState> pes_;
    PortTrace trace_;
    PhaseCycles phases_;
    EnergyTally tally_;
    std::optional<Phase> last_;
};

}  // namespace epochsim
