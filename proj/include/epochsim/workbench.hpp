#pragma once

// Workload declaration and orchestration: parse a config, run the golden
// model and the simulator side by side, assemble reports, sweep parameter
// grids, and compare against the documented baseline cost model.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "epochsim/array.hpp"
#include "epochsim/golden.hpp"
#include "epochsim/mapper.hpp"
#include "epochsim/metrics.hpp"

namespace epochsim {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct WorkloadLayer {
    LayerDesc desc;
    GemmDataflow dense_dataflow = GemmDataflow::OS;  // used by dense layers
};

struct WorkloadConfig {
    std::string name = "workload";
    uint64_t seed = 1;
    int64_t t = 1024;
    int batch = 1;
    double tolerance = 0.0;  // 0 -> precision default (2^-10 real, 2^-4 complex)
    ArrayConfig array;       // rows/cols == 0 means auto-size to the footprint
    bool auto_rows = true;
    bool auto_cols = true;
    std::vector<WorkloadLayer> layers;
    BaselineModel baseline;
    uint64_t sram_budget_bytes = 10'000'000;
    int bandwidth_window = 64;
    nlohmann::json sweep;  // optional {"N": [...], "T": [...], ...}
};

// Throws ConfigError with a line-numbered message on malformed documents.
WorkloadConfig parse_config(const nlohmann::json& doc);
nlohmann::json load_config_doc(const std::string& path_or_preset);
WorkloadConfig load_config(const std::string& path_or_preset);
nlohmann::json resolved_config_json(const WorkloadConfig& cfg);

std::vector<std::string> preset_names();
std::optional<nlohmann::json> preset_config(const std::string& name);

double default_tolerance(Precision p);

// Deterministic uniform draw in [-1, 1) from (seed, stream, index).
double seeded_uniform(uint64_t seed, uint64_t stream, uint64_t index);

// The documented synthetic coefficient scheme for presets: mode constants
// spread so |abar| stays well inside the unit disk, B chosen so the scaled
// input magnitudes sit at 0.4*(1-|abar|), C rows scaled to sum of moduli
// 1.5. Real-precision runs draw real-valued modes.
SsmLayerParams synthetic_ssm_params(int n, int h, double dt, uint64_t seed, Precision precision);

struct WorkloadResult {
    nlohmann::json report;                 // report.json document
    PortTrace trace;                       // all layers and sequences, in order
    std::vector<RealMatrix> sim_outputs;   // per sequence
    std::vector<RealMatrix> golden_outputs;
    double max_abs_error = 0.0;
    bool within_tolerance = true;
    uint64_t saturations = 0;
    int64_t first_output_cycle = 0;
    std::string error_location;            // "seq=..,t=..,w=.." at the max
};

WorkloadResult run_workload(const WorkloadConfig& cfg);

// Runs a GEMM through the array (tiling as needed, host-side accumulation
// across K blocks) and returns the dequantized product.
RealMatrix run_gemm_on_array(const RealMatrix& a, const RealMatrix& b, GemmDataflow dataflow,
                             const ArrayConfig& cfg, SystolicArray* array = nullptr);

struct SweepRow {
    nlohmann::json point;   // parameter values for this grid point
    bool ok = false;
    std::string message;
    nlohmann::json metrics;
};

// Cartesian sweep over cfg.sweep; points run in a small thread pool but the
// row order is the deterministic grid order.
std::vector<SweepRow> run_sweep(const WorkloadConfig& cfg, int threads);

std::string sweep_csv(const std::vector<SweepRow>& rows);

struct CompareResult {
    nlohmann::json row;
    std::vector<std::string> assumptions;
};

CompareResult run_compare(const WorkloadConfig& cfg);
std::string compare_csv(const CompareResult& r);

// File writers (RFC-4180 quoting where a field needs it).
void write_text_file(const std::string& path, const std::string& content);
std::string trace_csv(const PortTrace& trace);
std::string outputs_csv(const WorkloadResult& r);
std::string csv_quote(const std::string& field);

extern const char* const kVersionString;

}  // namespace epochsim
