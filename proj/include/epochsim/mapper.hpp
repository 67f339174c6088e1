#pragma once

// ProDF planning: turn a layer description plus array geometry into a
// LayoutPlan (per-PE modes, stationary values, injection and readout
// schedules, predicted latency).
//
// S4 / Liquid-S4 footprint, top-left anchored, for state size N and H heads
// (reduces to the (N+2) x (N+1) arrangement at H = 1):
//   row 0, columns H..H+N-1   BWS cells scaling the token by bbar_j
//   row 1, same columns       FRI (S4) or TRI (Liquid) recurrence cells
//   column h, row 1+H+j-h     BWS cell holding C[h,j], where the diagonally
//                             flowing state x_j crosses head column h
//   pass-through cells        on the diagonals between the recurrence row
//                             and the head columns, and below each head
//                             column's last C cell down to the footprint
//                             edge; everything else sleeps.

#include <string>
#include <vector>

#include "epochsim/golden.hpp"
#include "epochsim/plan.hpp"

namespace epochsim {

struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// t_len is the sequence length the compute schedule is sized for; shorter
// streams at run time simply drain early.
LayoutPlan plan_s4(const SsmLayerParams& p, const DiscreteCoeffs& c, const ArrayConfig& cfg,
                   int64_t t_len);
LayoutPlan plan_liquid(const SsmLayerParams& p, const DiscreteCoeffs& c, const ArrayConfig& cfg,
                       int64_t t_len);

struct GemmTile {
    int64_t m0 = 0, k0 = 0, n0 = 0;  // block origin
    int64_t m = 0, k = 0, n = 0;     // block extent
};

struct GemmTilePlan {
    GemmTile tile;
    LayoutPlan plan;
};

// Splits every dimension into array-sized blocks (the temporal dimension is
// blocked by the row count) and materializes one plan per tile. Partial
// products over the K blocks are accumulated host-side by the runner.
std::vector<GemmTilePlan> plan_gemm(const GemmSpec& spec, const ArrayConfig& cfg,
                                    const RealMatrix& a, const RealMatrix& b);

struct PlanViolation {
    std::string code;    // "dimension" | "reachability" | "stationary"
    std::string detail;
};

// Structural checks: dimension fit, injector-to-collector reachability of
// every non-sleeping PE, zero stationary values under sleeping PEs.
// Returns violations instead of throwing.
std::vector<PlanViolation> validate_plan(const LayoutPlan& plan, const ArrayConfig& cfg);

std::string plan_to_json(const LayoutPlan& plan);

}  // namespace epochsim
