#include <cmath>

#include "doctest.h"
#include "epochsim/array.hpp"
#include "epochsim/mapper.hpp"
#include "epochsim/metrics.hpp"
#include "test_support.hpp"

using namespace epochsim;
using namespace epochsim::testsup;

namespace {

SsmLayerParams half_params(int n, int h) {
    // lambda = ln 2, B = ln 2: abar = 1/2 and bbar = (1-abar) B / lambda = 1/2
    // exactly, all real and exactly representable.
    SsmLayerParams p;
    p.n = n;
    p.h = h;
    p.dt = 1.0;
    for (int i = 0; i < n; ++i) {
        p.lambda.push_back({std::log(2.0), 0.0});
        p.b.push_back({std::log(2.0), 0.0});
    }
    for (int i = 0; i < n * h; ++i) p.c.push_back({0.25, 0.0});
    return p;
}

}  // namespace

TEST_CASE("wiring: south, east and the NE->SW diagonal") {
    // full 2x2 table
    CHECK(wire(0, 0, 2, 2).south == std::pair{1, 0});
    CHECK(wire(0, 0, 2, 2).east == std::pair{0, 1});
    CHECK_FALSE(wire(0, 0, 2, 2).diag.has_value());  // exits at the west boundary
    CHECK(wire(0, 1, 2, 2).south == std::pair{1, 1});
    CHECK_FALSE(wire(0, 1, 2, 2).east.has_value());
    CHECK(wire(0, 1, 2, 2).diag == std::pair{1, 0});
    CHECK_FALSE(wire(1, 0, 2, 2).south.has_value());
    CHECK(wire(1, 0, 2, 2).east == std::pair{1, 1});
    CHECK_FALSE(wire(1, 0, 2, 2).diag.has_value());
    CHECK_FALSE(wire(1, 1, 2, 2).south.has_value());
    CHECK_FALSE(wire(1, 1, 2, 2).east.has_value());
    CHECK_FALSE(wire(1, 1, 2, 2).diag.has_value());

    CHECK(wire(0, 2, 4, 4).diag == std::pair{1, 1});
}

TEST_CASE("reset clears everything and bills one sleep cycle") {
    ArrayConfig cfg;
    cfg.rows = 2;
    cfg.cols = 2;
    SystolicArray array(cfg);
    array.run_reset();
    array.run_reset();  // idempotent
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            CHECK(array.pe(r, c).stationary.bits == 0);
            CHECK(array.pe(r, c).accum.bits == 0);
            CHECK(array.pe(r, c).control.mode == PEMode::Sleep);
        }
    CHECK(array.phase_cycles().reset == 2);
    const EnergyReport e = energy_of(array.energy_tally(), cfg);
    // 2 cycles x 4 PEs x 3.8 mW x 1.4 ns
    CHECK(e.reset_nj == doctest::Approx(2 * 4 * 3.8 * 1.4 * 1e-3).epsilon(1e-12));
}

TEST_CASE("preload: shift loading takes plan_cols + 1 cycles") {
    const SsmLayerParams p = half_params(3, 1);
    const ArrayConfig cfg = fitted_config(3, 1, Precision::Real32);
    const LayoutPlan plan = plan_s4(p, discretize(p), cfg, 4);
    REQUIRE(plan.plan_rows == 5);
    REQUIRE(plan.plan_cols == 4);

    SystolicArray array(cfg);
    array.run_reset();
    array.run_preload(plan);
    CHECK(array.phase_cycles().preload == 5);  // 4 + 1

    // stationary and control grids must match the plan
    for (int r = 0; r < cfg.rows; ++r)
        for (int c = 0; c < cfg.cols; ++c) {
            CHECK(array.pe(r, c).control.mode == plan.mode_at(r, c));
            CHECK(array.pe(r, c).stationary.bits == plan.stationary_at(r, c).bits);
        }

    // weight port reads plan_rows words on each injection cycle, then settles
    const PortTrace& tr = array.trace();
    REQUIRE(tr.size() == 6);  // 1 reset + 5 preload
    for (size_t i = 1; i <= 4; ++i) CHECK(tr.weight_reads[i] == 5);
    CHECK(tr.weight_reads[5] == 0);
    CHECK(tr.io_reads[5] == 0);
}

TEST_CASE("preload: degenerate 1x1 plan takes 2 cycles") {
    const SsmLayerParams p = half_params(1, 1);  // footprint 3x2
    ArrayConfig cfg = fitted_config(1, 1, Precision::Real32);
    LayoutPlan plan = plan_s4(p, discretize(p), cfg, 1);
    plan.plan_rows = 1;  // shrink to a single PE for the degenerate case
    plan.plan_cols = 1;
    SystolicArray array(cfg);
    array.run_reset();
    array.run_preload(plan);
    CHECK(array.phase_cycles().preload == 2);
}

TEST_CASE("S4 compute: first output at N+2, total T+N+1") {
    const int n = 3, t_len = 4;
    const SsmLayerParams p = half_params(n, 1);
    const ArrayConfig cfg = fitted_config(n, 1, Precision::Real32);
    const std::vector<double> u{1.0, 1.0, 1.0, 1.0};
    const LayerSimResult sim = simulate_layer(p, SsmVariant::S4, u, cfg);

    CHECK(sim.compute.first_output_cycle == n + 2);  // 5
    CHECK(sim.compute.cycles == t_len + n + 1);      // 8
    CHECK(sim.compute.outputs_consecutive);

    // hand recurrence: x steps 0.5, 0.75, 0.875, 0.9375; y = 3*0.25*x
    const double xs[4] = {0.5, 0.75, 0.875, 0.9375};
    for (int t = 0; t < 4; ++t)
        CHECK(sim.outputs.at(t, 0) == doctest::Approx(0.75 * xs[t]).epsilon(1e-4));
}

TEST_CASE("all-sleep plan: no outputs, sleep energy only") {
    ArrayConfig cfg;
    cfg.rows = 2;
    cfg.cols = 2;
    LayoutPlan plan;
    plan.kind = PlanKind::Ssm;
    plan.rows = plan.cols = 2;
    plan.plan_rows = plan.plan_cols = 2;
    plan.mode_grid.assign(4, PEMode::Sleep);
    plan.stationary_grid.assign(4, sv_zero(Precision::Real32));
    plan.inject.kind = InjectSpec::Kind::SsmBroadcast;  // no broadcast columns
    plan.fill_latency = 2;
    plan.collect.count_is_stream_len = true;
    plan.collect.heads = 1;

    SystolicArray array(cfg);
    array.run_reset();
    array.run_preload(plan);
    std::vector<ScalarValue> tokens(10, sv_zero(Precision::Real32));
    const ComputeResult res = array.run_compute(plan, tokens);
    CHECK(res.cycles == 12);
    CHECK(res.words_collected == 0);
    const EnergyReport e = energy_of(array.energy_tally(), cfg);
    CHECK(e.compute_nj == doctest::Approx(12 * 4 * 3.8 * 1.4 * 1e-3).epsilon(1e-12));
}

TEST_CASE("empty stream: zero compute cycles") {
    const SsmLayerParams p = half_params(2, 1);
    const ArrayConfig cfg = fitted_config(2, 1, Precision::Real32);
    const LayerSimResult sim = simulate_layer(p, SsmVariant::S4, {}, cfg);
    CHECK(sim.compute.cycles == 0);
    CHECK(sim.compute.outputs.empty());
}

TEST_CASE("io conservation and steady-state rate") {
    const int n = 4, t_len = 64;
    const SsmLayerParams p = half_params(n, 1);
    const ArrayConfig cfg = fitted_config(n, 1, Precision::Real32);
    const DiscreteCoeffs coeffs = discretize(p);
    const LayoutPlan plan = plan_s4(p, coeffs, cfg, t_len);
    SystolicArray array(cfg);
    array.run_reset();
    array.run_preload(plan);
    std::vector<ScalarValue> tokens(t_len, sv_from_real(0.5, cfg.env, cfg.precision));
    const ComputeResult res = array.run_compute(plan, tokens);

    CHECK(res.words_injected == t_len);   // broadcast counts one read per token
    CHECK(res.words_collected == t_len);  // one output word per token (H = 1)
    const PortTrace& tr = array.trace();
    uint64_t io_r = 0, io_w = 0;
    for (size_t i = 0; i < tr.size(); ++i) {
        io_r += tr.io_reads[i];
        io_w += tr.io_writes[i];
    }
    CHECK(io_r == static_cast<uint64_t>(res.words_injected));
    CHECK(io_w == static_cast<uint64_t>(res.words_collected));

    // steady state: both 1 read and 1 write per cycle in the overlap window
    const size_t compute_base = tr.size() - static_cast<size_t>(res.cycles);
    for (int64_t cyc = n + 2; cyc <= t_len; ++cyc) {
        CHECK(tr.io_reads[compute_base + static_cast<size_t>(cyc - 1)] == 1);
        CHECK(tr.io_writes[compute_base + static_cast<size_t>(cyc - 1)] == 1);
    }
}

TEST_CASE("synchronous two-buffer update equals reverse-topological in-place evaluation") {
    const int n = 3, t_len = 12;
    const SsmLayerParams p = random_instance(n, 2, 99, Precision::Real32);
    const ArrayConfig cfg = fitted_config(n, 2, Precision::Real32);
    const DiscreteCoeffs coeffs = discretize(p);
    const LayoutPlan plan = plan_s4(p, coeffs, cfg, t_len);
    const std::vector<double> u = random_input(t_len, 5);

    // production path
    const LayerSimResult sim = simulate_layer(p, SsmVariant::S4, u, cfg);

    // reference: single port grid, PEs stepped one at a time in reverse
    // row-major order so every producer is read before it overwrites its port
    SystolicArray array(cfg);
    array.run_reset();
    array.run_preload(plan);
    const int rows = cfg.rows, cols = cfg.cols;
    std::vector<PEState> pes;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) pes.push_back(array.pe(r, c));

    const ScalarValue zero = sv_zero(cfg.precision);
    std::vector<PortsOut> ports(pes.size(), PortsOut{zero, zero, zero});
    std::vector<ScalarValue> ref_out(static_cast<size_t>(t_len) * 2, zero);
    const int64_t cycles = t_len + plan.fill_latency;
    for (int64_t cycle = 1; cycle <= cycles; ++cycle) {
        for (int r = rows - 1; r >= 0; --r)
            for (int c = cols - 1; c >= 0; --c) {
                PortsIn in;
                ScalarValue diag_boundary = zero;
                if (r == 0 && cycle <= t_len) {
                    for (int bc : plan.inject.broadcast_cols)
                        if (bc == c)
                            diag_boundary =
                                sv_from_real(u[static_cast<size_t>(cycle - 1)], cfg.env,
                                             cfg.precision);
                }
                in.north = (r == 0) ? zero : ports[static_cast<size_t>(r - 1) * cols + c].south;
                in.west = (c == 0) ? zero : ports[static_cast<size_t>(r) * cols + c - 1].east;
                in.diag = (r == 0) ? diag_boundary
                          : (c == cols - 1)
                              ? zero
                              : ports[static_cast<size_t>(r - 1) * cols + c + 1].diag;
                ports[static_cast<size_t>(r) * cols + c] =
                    compute_step(pes[static_cast<size_t>(r) * cols + c], in, cfg.env);
            }
        for (const TapSchedule& tap : plan.collect.taps) {
            const int64_t k = cycle - tap.first_cycle;
            if (k >= 0 && k < t_len)
                ref_out[static_cast<size_t>(tap.dest_base + k * tap.dest_stride)] =
                    ports[static_cast<size_t>(tap.row) * cols + tap.col].south;
        }
    }

    for (int64_t t = 0; t < t_len; ++t)
        for (int head = 0; head < 2; ++head) {
            const double ref =
                sv_to_complex(ref_out[static_cast<size_t>(t * 2 + head)], cfg.env).real();
            CHECK(sim.outputs.at(t, head) == ref);
        }
}

TEST_CASE("determinism: identical runs produce identical outputs and traces") {
    const SsmLayerParams p = random_instance(4, 1, 1234, Precision::Complex16);
    const ArrayConfig cfg = fitted_config(4, 1, Precision::Complex16);
    const std::vector<double> u = random_input(40, 77);
    const LayerSimResult a = simulate_layer(p, SsmVariant::Liquid, u, cfg);
    const LayerSimResult b = simulate_layer(p, SsmVariant::Liquid, u, cfg);
    CHECK(a.outputs.data == b.outputs.data);
    CHECK(a.compute.cycles == b.compute.cycles);
    CHECK(a.saturations == b.saturations);
}

TEST_CASE("readout drains resident results south, bit-exact") {
    ArrayConfig cfg;
    cfg.rows = 2;
    cfg.cols = 2;
    RealMatrix a(2, 2), id(2, 2);
    a.at(0, 0) = 1;
    a.at(0, 1) = 2;
    a.at(1, 0) = 3;
    a.at(1, 1) = 4;
    id.at(0, 0) = id.at(1, 1) = 1;
    const auto tiles = plan_gemm(GemmSpec{2, 2, 2, GemmDataflow::OS}, cfg, a, id);
    REQUIRE(tiles.size() == 1);

    SystolicArray array(cfg);
    array.run_reset();
    array.run_preload(tiles[0].plan);
    array.run_compute(tiles[0].plan, {});
    const ReadoutResult ro = array.run_readout(tiles[0].plan);
    CHECK(ro.cycles == 2);
    REQUIRE(ro.values.size() == 4);
    for (int64_t i = 0; i < 2; ++i)
        for (int64_t j = 0; j < 2; ++j) {
            const double v =
                sv_to_complex(ro.values[static_cast<size_t>(i * 2 + j)], cfg.env).real();
            CHECK(v == a.at(i, j));
        }
    const PortTrace& tr = array.trace();
    CHECK(tr.io_writes[tr.size() - 1] == 2);  // cols words per readout cycle
    CHECK(tr.io_writes[tr.size() - 2] == 2);
}

TEST_CASE("readout on a streaming plan is a warned no-op") {
    const SsmLayerParams p = half_params(2, 1);
    const ArrayConfig cfg = fitted_config(2, 1, Precision::Real32);
    const LayoutPlan plan = plan_s4(p, discretize(p), cfg, 4);
    SystolicArray array(cfg);
    array.run_reset();
    array.run_preload(plan);
    std::vector<ScalarValue> tokens(4, sv_zero(Precision::Real32));
    array.run_compute(plan, tokens);
    const ReadoutResult ro = array.run_readout(plan);
    CHECK(ro.streaming_plan_warning);
    CHECK(ro.values.empty());
}

TEST_CASE("phase order is enforced") {
    ArrayConfig cfg;
    cfg.rows = 2;
    cfg.cols = 2;
    SystolicArray array(cfg);
    LayoutPlan plan;
    plan.rows = plan.cols = 2;
    plan.plan_rows = plan.plan_cols = 1;
    plan.mode_grid.assign(4, PEMode::Sleep);
    plan.stationary_grid.assign(4, sv_zero(Precision::Real32));
    CHECK_THROWS_AS(array.run_preload(plan), std::logic_error);  // preload before reset
    array.run_reset();
    CHECK_THROWS_AS(array.run_state_reset(), std::logic_error);  // state reset before compute
}
