#include <random>

#include "doctest.h"
#include "epochsim/mapper.hpp"
#include "epochsim/workbench.hpp"
#include "test_support.hpp"

using namespace epochsim;
using namespace epochsim::testsup;

namespace {

int count_mode(const LayoutPlan& plan, PEMode m) {
    int n = 0;
    for (PEMode mode : plan.mode_grid)
        if (mode == m) ++n;
    return n;
}

RealMatrix random_int_matrix(int64_t rows, int64_t cols, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> d(-8, 8);
    RealMatrix m(rows, cols);
    for (double& v : m.data) v = d(rng);
    return m;
}

}  // namespace

TEST_CASE("plan_s4 N=3 H=1: the published 5x4 arrangement") {
    const SsmLayerParams p = random_instance(3, 1, 5, Precision::Real32);
    const ArrayConfig cfg = fitted_config(3, 1, Precision::Real32);
    const DiscreteCoeffs c = discretize(p);
    const LayoutPlan plan = plan_s4(p, c, cfg, 16);

    CHECK(plan.plan_rows == 5);
    CHECK(plan.plan_cols == 4);
    CHECK(count_mode(plan, PEMode::BWS) == 6);  // 3 scale + 3 readout cells
    CHECK(count_mode(plan, PEMode::FRI) == 3);
    CHECK(count_mode(plan, PEMode::PassThrough) == 3);  // (2,1) (2,2) (3,1)
    CHECK(plan.mode_at(2, 1) == PEMode::PassThrough);
    CHECK(plan.mode_at(2, 2) == PEMode::PassThrough);
    CHECK(plan.mode_at(3, 1) == PEMode::PassThrough);
    for (int j = 0; j < 3; ++j) {
        CHECK(plan.mode_at(0, 1 + j) == PEMode::BWS);
        CHECK(plan.mode_at(1, 1 + j) == PEMode::FRI);
        CHECK(plan.mode_at(2 + j, 0) == PEMode::BWS);
    }
    CHECK(plan.predicted_first_output == 5);
    CHECK(plan.predicted_total == 16 + 3 + 1);
    CHECK(validate_plan(plan, cfg).empty());
}

TEST_CASE("plan_s4 N=1 H=1: 3x2 footprint, first output at cycle 3") {
    const SsmLayerParams p = random_instance(1, 1, 6, Precision::Real32);
    const ArrayConfig cfg = fitted_config(1, 1, Precision::Real32);
    const LayoutPlan plan = plan_s4(p, discretize(p), cfg, 8);
    CHECK(plan.plan_rows == 3);
    CHECK(plan.plan_cols == 2);
    CHECK(plan.predicted_first_output == 3);

    const std::vector<double> u = random_input(8, 3);
    const LayerSimResult sim = simulate_layer(p, SsmVariant::S4, u, cfg);
    CHECK(sim.compute.first_output_cycle == 3);
}

TEST_CASE("plan_s4 capacity error when the layer cannot fit") {
    const SsmLayerParams p = random_instance(64, 1, 7, Precision::Real32);
    ArrayConfig cfg;
    cfg.rows = 64;
    cfg.cols = 64;  // needs 66 x 65
    CHECK_THROWS_AS(plan_s4(p, discretize(p), cfg, 4), CapacityError);
}

TEST_CASE("plan_liquid differs from plan_s4 only in the recurrence row") {
    const SsmLayerParams p = random_instance(3, 1, 8, Precision::Real32);
    const ArrayConfig cfg = fitted_config(3, 1, Precision::Real32);
    const DiscreteCoeffs c = discretize(p);
    const LayoutPlan s4 = plan_s4(p, c, cfg, 4);
    const LayoutPlan liq = plan_liquid(p, c, cfg, 4);
    for (int r = 0; r < cfg.rows; ++r)
        for (int col = 0; col < cfg.cols; ++col) {
            if (r == 1 && s4.mode_at(r, col) == PEMode::FRI) {
                CHECK(liq.mode_at(r, col) == PEMode::TRI);
            } else {
                CHECK(liq.mode_at(r, col) == s4.mode_at(r, col));
            }
            CHECK(liq.stationary_at(r, col).bits == s4.stationary_at(r, col).bits);
        }
}

TEST_CASE("liquid plan on silent input equals the s4 plan output") {
    const SsmLayerParams p = random_instance(4, 1, 9, Precision::Real32);
    const ArrayConfig cfg = fitted_config(4, 1, Precision::Real32);
    const std::vector<double> u(16, 0.0);
    const LayerSimResult a = simulate_layer(p, SsmVariant::S4, u, cfg);
    const LayerSimResult b = simulate_layer(p, SsmVariant::Liquid, u, cfg);
    CHECK(a.outputs.data == b.outputs.data);
}

TEST_CASE("liquid plan matches the golden recurrence chain") {
    const SsmLayerParams p = random_instance(2, 1, 10, Precision::Real32);
    const ArrayConfig cfg = fitted_config(2, 1, Precision::Real32);
    const std::vector<double> u = random_input(8, 11);
    const LayerSimResult sim = simulate_layer(p, SsmVariant::Liquid, u, cfg);
    const RealMatrix gold = run_layer(p, u, SsmVariant::Liquid);
    CHECK(max_abs_diff(sim.outputs, gold) < 0x1.0p-10);
    CHECK(sim.saturations == 0);
}

TEST_CASE("placement rule: per head, the stationary cells reconstruct row h of C") {
    for (int h : {1, 2, 4}) {
        const int n = 5;
        const SsmLayerParams p = random_instance(n, h, 20 + static_cast<uint64_t>(h),
                                                 Precision::Real32);
        const ArrayConfig cfg = fitted_config(n, h, Precision::Real32);
        const LayoutPlan plan = plan_s4(p, discretize(p), cfg, 4);
        for (int head = 0; head < h; ++head)
            for (int j = 0; j < n; ++j) {
                const int row = 1 + h + j - head;
                CHECK(plan.mode_at(row, head) == PEMode::BWS);
                const double got =
                    sv_to_complex(plan.stationary_at(row, head), cfg.env).real();
                const double want = p.c[static_cast<size_t>(head) * n + j].real();
                CHECK(got == doctest::Approx(want).epsilon(1e-4));
            }
        // exactly one readout cell per (head, j): count BWS in head columns
        int head_cells = 0;
        for (int r = 2; r < plan.plan_rows; ++r)
            for (int col = 0; col < h; ++col)
                if (plan.mode_at(r, col) == PEMode::BWS) ++head_cells;
        CHECK(head_cells == n * h);
        CHECK(validate_plan(plan, cfg).empty());
    }
}

TEST_CASE("multi-head latency: all heads stream from cycle N+H+1") {
    const int n = 4, h = 3;
    const SsmLayerParams p = random_instance(n, h, 31, Precision::Real32);
    const ArrayConfig cfg = fitted_config(n, h, Precision::Real32);
    const std::vector<double> u = random_input(32, 13);
    const LayerSimResult sim = simulate_layer(p, SsmVariant::S4, u, cfg);
    CHECK(sim.compute.first_output_cycle == n + h + 1);
    CHECK(sim.compute.cycles == 32 + n + h);
    CHECK(sim.compute.outputs_consecutive);
    const RealMatrix gold = run_layer(p, u, SsmVariant::S4);
    CHECK(max_abs_diff(sim.outputs, gold) < 0x1.0p-10);
}

TEST_CASE("gemm OS: identity times M comes back through readout") {
    ArrayConfig cfg;
    cfg.rows = 2;
    cfg.cols = 2;
    std::mt19937_64 rng(101);
    const RealMatrix m = random_int_matrix(2, 2, rng);
    RealMatrix id(2, 2);
    id.at(0, 0) = id.at(1, 1) = 1;
    const RealMatrix out = run_gemm_on_array(id, m, GemmDataflow::OS, cfg);
    for (size_t i = 0; i < 4; ++i) CHECK(out.data[i] == m.data[i]);
}

TEST_CASE("gemm tiling: 4x4x4 on a 2x2 array makes 8 tiles and matches the oracle") {
    ArrayConfig cfg;
    cfg.rows = 2;
    cfg.cols = 2;
    std::mt19937_64 rng(103);
    const RealMatrix a = random_int_matrix(4, 4, rng);
    const RealMatrix b = random_int_matrix(4, 4, rng);
    const auto tiles = plan_gemm(GemmSpec{4, 4, 4, GemmDataflow::OS}, cfg, a, b);
    CHECK(tiles.size() == 8);

    const RealMatrix want = gemm_oracle(a, b);
    for (GemmDataflow df : {GemmDataflow::OS, GemmDataflow::WS, GemmDataflow::IS}) {
        const RealMatrix got = run_gemm_on_array(a, b, df, cfg);
        CHECK(got.data == want.data);  // integer mode is bit-exact
    }
}

TEST_CASE("gemm WS: a diagonal weight matrix scales the stream per token") {
    ArrayConfig cfg;
    cfg.rows = 3;
    cfg.cols = 3;
    RealMatrix diag(3, 3);
    diag.at(0, 0) = 2;
    diag.at(1, 1) = 3;
    diag.at(2, 2) = 4;
    RealMatrix u(4, 3);
    for (int64_t t = 0; t < 4; ++t)
        for (int64_t j = 0; j < 3; ++j) u.at(t, j) = static_cast<double>(t + j);
    const RealMatrix out = run_gemm_on_array(u, diag, GemmDataflow::WS, cfg);
    for (int64_t t = 0; t < 4; ++t)
        for (int64_t j = 0; j < 3; ++j)
            CHECK(out.at(t, j) == u.at(t, j) * diag.at(j, j));
}

TEST_CASE("gemm dataflows agree with each other and the oracle on ragged shapes") {
    ArrayConfig cfg;
    cfg.rows = 4;
    cfg.cols = 4;
    std::mt19937_64 rng(107);
    for (int iter = 0; iter < 12; ++iter) {
        std::uniform_int_distribution<int64_t> dim(1, 9);
        const int64_t m = dim(rng), k = dim(rng), n = dim(rng);
        const RealMatrix a = random_int_matrix(m, k, rng);
        const RealMatrix b = random_int_matrix(k, n, rng);
        const RealMatrix want = gemm_oracle(a, b);
        for (GemmDataflow df : {GemmDataflow::OS, GemmDataflow::WS, GemmDataflow::IS}) {
            const RealMatrix got = run_gemm_on_array(a, b, df, cfg);
            REQUIRE(got.data.size() == want.data.size());
            CHECK(got.data == want.data);
        }
    }
}

TEST_CASE("validate_plan flags orphan compute islands") {
    const SsmLayerParams p = random_instance(3, 1, 40, Precision::Real32);
    const ArrayConfig cfg = fitted_config(3, 1, Precision::Real32);
    LayoutPlan plan = plan_s4(p, discretize(p), cfg, 4);
    REQUIRE(validate_plan(plan, cfg).empty());

    // drop a BWS cell in a sleeping corner: nothing feeds it
    plan.mode_grid[static_cast<size_t>(4) * plan.cols + 3] = PEMode::BWS;
    const auto violations = validate_plan(plan, cfg);
    REQUIRE_FALSE(violations.empty());
    CHECK(violations[0].code == "reachability");
}

TEST_CASE("validate_plan flags dimension and stationary problems") {
    const SsmLayerParams p = random_instance(2, 1, 41, Precision::Real32);
    const ArrayConfig cfg = fitted_config(2, 1, Precision::Real32);
    LayoutPlan plan = plan_s4(p, discretize(p), cfg, 4);

    LayoutPlan oversized = plan;
    oversized.plan_rows = cfg.rows + 5;
    const auto v1 = validate_plan(oversized, cfg);
    REQUIRE_FALSE(v1.empty());
    CHECK(v1[0].code == "dimension");

    LayoutPlan dirty = plan;
    dirty.stationary_grid[static_cast<size_t>(dirty.rows - 1) * dirty.cols + dirty.cols - 1] =
        sv_from_real(1.0, cfg.env, cfg.precision);
    bool found = false;
    for (const auto& v : validate_plan(dirty, cfg))
        if (v.code == "stationary") found = true;
    CHECK(found);
}

TEST_CASE("plan serializes to a stable JSON document") {
    SsmLayerParams p;
    p.n = 1;
    p.h = 1;
    p.dt = std::log(2.0);
    p.lambda = {{1.0, 0.0}};
    p.b = {{1.0, 0.0}};
    p.c = {{1.0, 0.0}};
    const ArrayConfig cfg = fitted_config(1, 1, Precision::Real32);
    const LayoutPlan plan = plan_s4(p, discretize(p), cfg, 2);
    const std::string got = plan_to_json(plan);
    const char* want = R"({
  "cols": 2,
  "inject": {
    "cols": [
      1
    ],
    "kind": "broadcast"
  },
  "kind": "ssm",
  "mode_grid": [
    [
      "Sleep",
      "BWS"
    ],
    [
      "Sleep",
      "FRI"
    ],
    [
      "BWS",
      "Sleep"
    ]
  ],
  "plan_cols": 2,
  "plan_rows": 3,
  "precision": "real32",
  "predicted_first_output": 3,
  "predicted_total": 4,
  "readout_taps": [
    {
      "col": 0,
      "count": 2,
      "first_cycle": 3,
      "row": 2
    }
  ],
  "rows": 3,
  "stationary_grid": [
    [
      "0x00000000",
      "0x00008000"
    ],
    [
      "0x00000000",
      "0x00008000"
    ],
    [
      "0x00010000",
      "0x00000000"
    ]
  ]
})";
    CHECK(got == want);
}
