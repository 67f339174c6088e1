#include <cmath>

#include "doctest.h"
#include "epochsim/workbench.hpp"
#include "test_support.hpp"

using namespace epochsim;
using nlohmann::json;

namespace {

json tiny_config(int n, int64_t t, const char* type = "s4",
                 const char* precision = "real32") {
    json j;
    j["name"] = "tiny";
    j["seed"] = 3;
    j["T"] = t;
    j["precision"] = precision;
    j["layers"] = json::array({{{"type", type}, {"N", n}, {"H", 1}, {"dt", 1.0}}});
    return j;
}

}  // namespace

TEST_CASE("config parsing rejects malformed documents") {
    CHECK_THROWS_AS(parse_config(json::array()), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"name", "x"}}), ConfigError);  // no layers

    json bad = tiny_config(2, 8);
    bad["layers"][0]["H"] = 0;
    CHECK_THROWS_AS(parse_config(bad), ConfigError);

    bad = tiny_config(2, 8);
    bad["precision"] = "float64";
    CHECK_THROWS_AS(parse_config(bad), ConfigError);

    bad = tiny_config(2, 8);
    bad["T"] = 0;
    CHECK_THROWS_AS(parse_config(bad), ConfigError);

    bad = tiny_config(2, 8);
    bad["layers"][0]["type"] = "conv";
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
}

TEST_CASE("presets carry the benchmark sequence lengths verbatim") {
    const std::vector<std::pair<std::string, int64_t>> want = {
        {"listops", 2048}, {"text", 2048},       {"retrieval", 4000},
        {"image", 1024},   {"pathfinder", 1024}, {"pathfinder_x", 16384},
        {"imdb", 2048},    {"aan", 4000},        {"scifar", 3072},
    };
    for (const auto& [name, t] : want) {
        const auto doc = preset_config(name);
        REQUIRE(doc.has_value());
        CHECK((*doc)["T"].get<int64_t>() == t);
        const WorkloadConfig cfg = parse_config(*doc);
        CHECK(cfg.t == t);
    }
    CHECK_FALSE(preset_config("nonsense").has_value());
    CHECK(preset_names().size() == want.size());
}

TEST_CASE("auto array sizing follows the footprint") {
    const WorkloadConfig cfg = parse_config(*preset_config("pathfinder"));
    CHECK(cfg.array.rows == 66);  // N=64, H=1
    CHECK(cfg.array.cols == 65);
    CHECK(cfg.tolerance == default_tolerance(Precision::Complex16));
}

TEST_CASE("run_workload: small S4 instance within tolerance, deterministic") {
    const WorkloadConfig cfg = parse_config(tiny_config(4, 64));
    const WorkloadResult a = run_workload(cfg);
    CHECK(a.within_tolerance);
    CHECK(a.saturations == 0);
    CHECK(a.first_output_cycle == 6);  // N + 2
    CHECK(a.report["latency"]["compute_cycles_per_sequence"].get<int64_t>() == 64 + 4 + 1);
    CHECK(a.report["utilization"]["boriakoff"].get<double>() == 0.667);
    CHECK(a.report["energy"]["mode_powers_mw"]["accumulation"].get<double>() == 11.5);
    CHECK(a.report["power_tables_mw"]["int8"]["sleep"].get<double>() == 0.54);

    const WorkloadResult b = run_workload(cfg);
    CHECK(a.report.dump() == b.report.dump());  // byte-identical
}

TEST_CASE("reports round-trip through JSON losslessly") {
    const WorkloadConfig cfg = parse_config(tiny_config(2, 16));
    const WorkloadResult res = run_workload(cfg);
    const std::string text = res.report.dump();
    const json back = json::parse(text);
    CHECK(back == res.report);
    CHECK(back.dump() == text);
}

TEST_CASE("liquid complex16 workload stays within its tolerance") {
    const WorkloadConfig cfg = parse_config(tiny_config(8, 128, "liquid", "complex16"));
    const WorkloadResult res = run_workload(cfg);
    CHECK(res.within_tolerance);
    CHECK(res.max_abs_error <= 0x1.0p-4);
    CHECK(res.saturations == 0);
}

TEST_CASE("a coarse Q4.4 format forces the oracle check to fail") {
    json j = tiny_config(4, 64);
    j["array"] = {{"real_total_bits", 8}, {"real_frac_bits", 4}};
    const WorkloadConfig cfg = parse_config(j);
    const WorkloadResult res = run_workload(cfg);
    CHECK_FALSE(res.within_tolerance);
    CHECK(res.max_abs_error > cfg.tolerance);
}

TEST_CASE("explicit coefficients with a skip term match the golden model") {
    json j = tiny_config(2, 32);
    j["layers"][0]["coeffs"] = {
        {"lambda", json::array({json::array({0.7, 0.0}), json::array({0.9, 0.0})})},
        {"B", json::array({json::array({0.2, 0.0}), json::array({0.3, 0.0})})},
        {"C", json::array({json::array({json::array({0.5, 0.0}), json::array({0.4, 0.0})})})},
        {"D", json::array({0.25})}};
    const WorkloadConfig cfg = parse_config(j);
    const WorkloadResult res = run_workload(cfg);
    CHECK(res.within_tolerance);
}

TEST_CASE("stacked workload: s4 -> dense(relu) -> layernorm") {
    json j;
    j["name"] = "stack";
    j["seed"] = 5;
    j["T"] = 24;
    j["precision"] = "real32";
    j["layers"] = json::array(
        {{{"type", "s4"}, {"N", 3}, {"H", 2}, {"dt", 1.0}},
         {{"type", "dense"},
          {"weights", json::array({json::array({0.5, -0.25}), json::array({0.75, 1.0})})},
          {"activation", "relu"},
          {"dataflow", "ws"}},
         {{"type", "layernorm"}, {"gamma", json::array({1.0, 1.0})},
          {"beta", json::array({0.0, 0.0})}}});
    const WorkloadConfig cfg = parse_config(j);
    const WorkloadResult res = run_workload(cfg);
    CHECK(res.within_tolerance);
    CHECK(res.report["layers"].size() == 3);
}

TEST_CASE("batch runs preload once and reset state between sequences") {
    json j = tiny_config(4, 32);
    j["batch"] = 4;
    const WorkloadConfig cfg = parse_config(j);
    const WorkloadResult res = run_workload(cfg);
    CHECK(res.within_tolerance);
    // phases: 1 reset + 3 state resets, one preload, 4 compute segments
    CHECK(res.report["phases"]["reset"].get<int64_t>() == 4);
    CHECK(res.report["phases"]["preload"].get<int64_t>() == cfg.array.cols + 1);
    CHECK(res.report["phases"]["compute"].get<int64_t>() == 4 * (32 + 4 + 1));
    // weight traffic only during the single preload
    uint64_t weight_after = 0;
    const size_t preload_end = 1 + static_cast<size_t>(cfg.array.cols) + 1;
    for (size_t i = preload_end; i < res.trace.size(); ++i)
        weight_after += res.trace.weight_reads[i];
    CHECK(weight_after == 0);
    // one trace row per simulated cycle, across every phase
    CHECK(static_cast<int64_t>(res.trace.size()) ==
          res.report["phases"]["total"].get<int64_t>());
}

TEST_CASE("sweep: grid order, cardinality, and analytic columns") {
    json j = tiny_config(2, 64);
    j["sweep"] = {{"N", json::array({2, 4, 8})}, {"T", json::array({64, 256})}};
    const WorkloadConfig cfg = parse_config(j);
    const std::vector<SweepRow> rows = run_sweep(cfg, 3);
    REQUIRE(rows.size() == 6);
    for (const SweepRow& r : rows) CHECK(r.ok);
    // grid order: N major, T minor
    CHECK(rows[0].point["N"] == 2);
    CHECK(rows[0].point["T"] == 64);
    CHECK(rows[1].point["T"] == 256);
    CHECK(rows[5].point["N"] == 8);
    for (const SweepRow& r : rows) {
        const int n = r.point["N"].get<int>();
        const double util = r.metrics["utilization"].get<double>();
        // N(H+2) active on an (N+2)x(N+1) auto array
        CHECK(util == doctest::Approx(3.0 * n / ((n + 2) * (n + 1))).epsilon(1e-12));
    }
    const std::string csv = sweep_csv(rows);
    CHECK(csv.find("n,h,dt,t,batch,seed,status") == 0);
    // energy scales linearly with T at fixed N
    const double e64 = rows[0].metrics["energy_compute_nj"].get<double>();
    const double e256 = rows[1].metrics["energy_compute_nj"].get<double>();
    CHECK(e256 / e64 == doctest::Approx((256.0 + 3) / (64.0 + 3)).epsilon(0.01));
}

TEST_CASE("sweep records individual point failures and continues") {
    json j = tiny_config(2, 16);
    j["array"] = {{"rows", 7}, {"cols", 7}};
    j["sweep"] = {{"N", json::array({2, 32})}};  // 32 cannot fit a 7x7 array
    const WorkloadConfig cfg = parse_config(j);
    const std::vector<SweepRow> rows = run_sweep(cfg, 2);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].ok);
    CHECK_FALSE(rows[1].ok);
    CHECK_FALSE(rows[1].message.empty());
}

TEST_CASE("compare emits the model columns and assumption footer") {
    json j = tiny_config(8, 512);
    const WorkloadConfig cfg = parse_config(j);
    const CompareResult cr = run_compare(cfg);
    CHECK(cr.row["boriakoff_utilization"].get<double>() == 0.667);
    CHECK(cr.row["baseline_cycles"].get<int64_t>() ==
          baseline_tpu_cycles(512, 8, 1, cfg.baseline));
    CHECK(cr.row["cycle_ratio"].get<double>() > 1.0);
    const std::string csv = compare_csv(cr);
    CHECK(csv.find("# assumption:") != std::string::npos);

    // doubling T keeps the cycle ratio stable to within 10%
    json j2 = tiny_config(8, 1024);
    const CompareResult cr2 = run_compare(parse_config(j2));
    const double r1 = cr.row["cycle_ratio"].get<double>();
    const double r2 = cr2.row["cycle_ratio"].get<double>();
    CHECK(std::abs(r2 - r1) / r1 < 0.10);
}

TEST_CASE("synthetic coefficients keep the decay inside the published band") {
    for (Precision prec : {Precision::Real32, Precision::Complex16}) {
        const SsmLayerParams p = synthetic_ssm_params(16, 2, 1.0, 9, prec);
        const DiscreteCoeffs c = discretize(p);
        for (const Complex& a : c.abar) {
            CHECK(std::abs(a) > 0.3);
            CHECK(std::abs(a) < 0.99);
        }
        if (prec == Precision::Real32)
            for (const Complex& l : p.lambda) CHECK(l.imag() == 0.0);
    }
}

TEST_CASE("seeded_uniform is deterministic and bounded") {
    for (uint64_t i = 0; i < 1000; ++i) {
        const double v = seeded_uniform(42, 7, i);
        CHECK(v >= -1.0);
        CHECK(v < 1.0);
        CHECK(v == seeded_uniform(42, 7, i));
    }
    CHECK(seeded_uniform(42, 7, 0) != seeded_uniform(43, 7, 0));
}

TEST_CASE("csv quoting follows RFC 4180") {
    CHECK(csv_quote("plain") == "plain");
    CHECK(csv_quote("a,b") == "\"a,b\"");
    CHECK(csv_quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_quote("line\nbreak") == "\"line\nbreak\"");
}

TEST_CASE("trace and outputs CSV have the documented shapes") {
    const WorkloadConfig cfg = parse_config(tiny_config(2, 8));
    const WorkloadResult res = run_workload(cfg);
    const std::string tr = trace_csv(res.trace);
    CHECK(tr.rfind("cycle,weight_reads,weight_writes,io_reads,io_writes\r\n", 0) == 0);
    const std::string out = outputs_csv(res);
    CHECK(out.rfind("seq,t,sim_0,gold_0\r\n", 0) == 0);
}

TEST_CASE("load_config resolves presets and rejects unknown paths") {
    const WorkloadConfig cfg = load_config("pathfinder");
    CHECK(cfg.t == 1024);
    CHECK_THROWS_AS(load_config("/nonexistent/path.json"), ConfigError);
}
