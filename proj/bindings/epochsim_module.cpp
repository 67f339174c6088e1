// Python bindings for the main operations: the golden layer math, workload
// simulation against the oracle, planning, and the analytic metrics.

#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "epochsim/workbench.hpp"

namespace py = pybind11;
using namespace epochsim;

namespace {

SsmLayerParams params_from_py(int n, int h, const std::vector<Complex>& lambda,
                              const std::vector<Complex>& b,
                              const std::vector<std::vector<Complex>>& c,
                              const std::optional<std::vector<double>>& d, double dt) {
    SsmLayerParams p;
    p.n = n;
    p.h = h;
    p.lambda = lambda;
    p.b = b;
    for (const auto& row : c)
        for (const Complex& z : row) p.c.push_back(z);
    p.d = d;
    p.dt = dt;
    validate_params(p);
    return p;
}

std::vector<std::vector<double>> matrix_to_py(const RealMatrix& m) {
    std::vector<std::vector<double>> out(static_cast<size_t>(m.rows));
    for (int64_t r = 0; r < m.rows; ++r) {
        out[static_cast<size_t>(r)].resize(static_cast<size_t>(m.cols));
        for (int64_t c = 0; c < m.cols; ++c) out[static_cast<size_t>(r)][static_cast<size_t>(c)] = m.at(r, c);
    }
    return out;
}

RealMatrix matrix_from_py(const std::vector<std::vector<double>>& m, const char* what) {
    if (m.empty() || m[0].empty()) throw std::invalid_argument(std::string(what) + ": empty matrix");
    RealMatrix out(static_cast<int64_t>(m.size()), static_cast<int64_t>(m[0].size()));
    for (size_t r = 0; r < m.size(); ++r) {
        if (m[r].size() != m[0].size())
            throw std::invalid_argument(std::string(what) + ": ragged matrix");
        for (size_t c = 0; c < m[r].size(); ++c)
            out.at(static_cast<int64_t>(r), static_cast<int64_t>(c)) = m[r][c];
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_epochsim, m) {
    m.doc() = "cycle-accurate systolic-array simulator for S4/Liquid-S4 and GEMM workloads";
    m.attr("__version__") = kVersionString;

    m.def(
        "golden_run_layer",
        [](int n, int h, const std::vector<Complex>& lambda, const std::vector<Complex>& b,
           const std::vector<std::vector<Complex>>& c, const std::optional<std::vector<double>>& d,
           double dt, const std::vector<double>& u, const std::string& variant) {
            const SsmLayerParams p = params_from_py(n, h, lambda, b, c, d, dt);
            const SsmVariant v = variant == "liquid" ? SsmVariant::Liquid : SsmVariant::S4;
            return matrix_to_py(run_layer(p, u, v));
        },
        py::arg("n"), py::arg("h"), py::arg("lambda_"), py::arg("b"), py::arg("c"),
        py::arg("d"), py::arg("dt"), py::arg("u"), py::arg("variant") = "s4",
        "Floating-point reference output of one S4/Liquid-S4 layer, T x H.");

    m.def(
        "run_config",
        [](const std::string& config_json, std::optional<std::string> out_dir) {
            const WorkloadConfig cfg = parse_config(nlohmann::json::parse(config_json));
            const WorkloadResult res = run_workload(cfg);
            if (out_dir) {
                write_text_file(*out_dir + "/report.json", res.report.dump(2) + "\n");
                write_text_file(*out_dir + "/trace.csv", trace_csv(res.trace));
                write_text_file(*out_dir + "/outputs.csv", outputs_csv(res));
            }
            return res.report.dump();
        },
        py::arg("config_json"), py::arg("out_dir") = std::nullopt,
        "Run a workload config (JSON string); returns the report as a JSON string.");

    m.def(
        "preset",
        [](const std::string& name) {
            const auto doc = preset_config(name);
            if (!doc) throw std::invalid_argument("unknown preset: " + name);
            return doc->dump();
        },
        py::arg("name"), "Built-in workload config (JSON string) for a named benchmark task.");
    m.def("preset_names", &preset_names);

    m.def(
        "simulate_gemm",
        [](const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b,
           const std::string& dataflow, int rows, int cols) {
            ArrayConfig cfg;
            cfg.rows = rows;
            cfg.cols = cols;
            GemmDataflow df = dataflow == "ws"   ? GemmDataflow::WS
                              : dataflow == "is" ? GemmDataflow::IS
                                                 : GemmDataflow::OS;
            return matrix_to_py(run_gemm_on_array(matrix_from_py(a, "a"), matrix_from_py(b, "b"),
                                                  df, cfg));
        },
        py::arg("a"), py::arg("b"), py::arg("dataflow") = "os", py::arg("rows") = 16,
        py::arg("cols") = 16, "Run a GEMM through the array (tiled as needed).");

    m.def(
        "plan_json",
        [](int n, int h, double dt, int64_t t, int rows, int cols, const std::string& variant,
           const std::string& precision, uint64_t seed) {
            ArrayConfig cfg;
            cfg.rows = rows;
            cfg.cols = cols;
            cfg.precision = precision == "complex16" ? Precision::Complex16 : Precision::Real32;
            const SsmLayerParams p = synthetic_ssm_params(n, h, dt, seed, cfg.precision);
            const DiscreteCoeffs coeffs = discretize(p);
            const LayoutPlan plan = variant == "liquid" ? plan_liquid(p, coeffs, cfg, t)
                                                        : plan_s4(p, coeffs, cfg, t);
            return plan_to_json(plan);
        },
        py::arg("n"), py::arg("h") = 1, py::arg("dt") = 1.0, py::arg("t") = 64,
        py::arg("rows") = 0, py::arg("cols") = 0, py::arg("variant") = "s4",
        py::arg("precision") = "real32", py::arg("seed") = 1,
        "Layout plan (JSON) for a synthetic layer; rows/cols 0 auto-sizes to the footprint.");

    m.def("sram_sizes", [](int64_t t, int batch, int h, int plan_rows, int plan_cols,
                           int word_bits, uint64_t budget) {
        ArrayConfig cfg;
        cfg.rows = std::max(plan_rows, 1);
        cfg.cols = std::max(plan_cols, 1);
        cfg.word_bits = word_bits;
        LayoutPlan plan;
        plan.rows = cfg.rows;
        plan.cols = cfg.cols;
        plan.plan_rows = plan_rows;
        plan.plan_cols = plan_cols;
        const SramSizing s = sram_sizes(t, batch, h, plan, cfg, budget);
        py::dict out;
        out["weight_bytes"] = s.weight_bytes;
        out["io_bytes"] = s.io_bytes;
        out["fits_budget"] = s.fits_budget;
        return out;
    },
          py::arg("t"), py::arg("batch") = 1, py::arg("h") = 1, py::arg("plan_rows") = 66,
          py::arg("plan_cols") = 65, py::arg("word_bits") = 32,
          py::arg("budget") = uint64_t{10'000'000});

    m.def("baseline_cycles", [](int64_t t, int n, int h, int64_t fill, int64_t rt) {
        return baseline_tpu_cycles(t, n, h, BaselineModel{fill, rt});
    },
          py::arg("t"), py::arg("n"), py::arg("h") = 1, py::arg("fill") = 1, py::arg("rt") = 2);

    m.def("mode_power_mw", [](const std::string& mode, const std::string& table) {
        return power_of(mode_from_name(mode),
                        table == "int8" ? PowerTable::Int8 : PowerTable::Fp32);
    },
          py::arg("mode"), py::arg("table") = "fp32");

    m.attr("BORIAKOFF_UTILIZATION") = kBoriakoffUtilization;
}
