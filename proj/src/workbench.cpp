#include "epochsim/workbench.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace epochsim {

#ifndef EPOCHSIM_VERSION
#define EPOCHSIM_VERSION "0.1.0-unknown"
#endif
const char* const kVersionString = EPOCHSIM_VERSION;

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

double seeded_uniform(uint64_t seed, uint64_t stream, uint64_t index) {
    const uint64_t z = splitmix64(splitmix64(seed ^ (0xA076'1D64'78BD'642FULL + stream)) + index);
    return static_cast<double>(z >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

double default_tolerance(Precision p) {
    return p == Precision::Real32 ? 0x1.0p-10 : 0x1.0p-4;
}

SsmLayerParams synthetic_ssm_params(int n, int h, double dt, uint64_t seed,
                                    Precision precision) {
    SsmLayerParams p;
    p.n = n;
    p.h = h;
    p.dt = dt;
    p.lambda.resize(static_cast<size_t>(n));
    p.b.resize(static_cast<size_t>(n));
    p.c.resize(static_cast<size_t>(h) * n);

    for (int k = 0; k < n; ++k) {
        Complex lambda;
        if (precision == Precision::Complex16) {
            lambda = Complex{0.5, M_PI * k};
        } else {
            const double spread = (n > 1) ? static_cast<double>(k) / (n - 1) : 0.0;
            lambda = Complex{0.2 + spread, 0.0};
        }
        const Complex abar = std::exp(-lambda * dt);
        const double mag = 0.4 * (1.0 - std::abs(abar));
        Complex target;
        if (precision == Precision::Complex16) {
            const double phi = M_PI * seeded_uniform(seed, 11, static_cast<uint64_t>(k));
            target = std::polar(mag, phi);
        } else {
            target = Complex{seeded_uniform(seed, 11, static_cast<uint64_t>(k)) < 0 ? -mag : mag, 0.0};
        }
        p.lambda[static_cast<size_t>(k)] = lambda;
        p.b[static_cast<size_t>(k)] = target * lambda / (Complex{1.0, 0.0} - abar);
    }

    for (int head = 0; head < h; ++head) {
        double row_norm = 0.0;
        for (int j = 0; j < n; ++j) {
            const uint64_t base = 2 * (static_cast<uint64_t>(head) * n + j);
            Complex c;
            if (precision == Precision::Complex16)
                c = Complex{seeded_uniform(seed, 12, base), seeded_uniform(seed, 12, base + 1)};
            else
                c = Complex{seeded_uniform(seed, 12, base), 0.0};
            p.c[static_cast<size_t>(head) * n + j] = c;
            row_norm += std::abs(c);
        }
        const double scale = row_norm > 0 ? 1.0 / row_norm : 1.0;
        for (int j = 0; j < n; ++j) p.c[static_cast<size_t>(head) * n + j] *= scale;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("config: " + msg); }

Complex parse_complex(const json& j, const char* what) {
    if (j.is_number()) return Complex{j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return Complex{j[0].get<double>(), j[1].get<double>()};
    fail(std::string(what) + " must be a number or [re, im] pair");
}

Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "silu") return Activation::Silu;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "tanh") return Activation::Tanh;
    fail("unknown activation '" + s + "' (relu|silu|sigmoid|tanh)");
}

GemmDataflow parse_dataflow(const std::string& s) {
    if (s == "os") return GemmDataflow::OS;
    if (s == "ws") return GemmDataflow::WS;
    if (s == "is") return GemmDataflow::IS;
    fail("unknown dataflow '" + s + "' (os|ws|is)");
}

SsmLayerParams parse_explicit_coeffs(const json& j, int n, int h, double dt) {
    SsmLayerParams p;
    p.n = n;
    p.h = h;
    p.dt = dt;
    if (!j.contains("lambda") || !j.contains("B") || !j.contains("C"))
        fail("explicit coeffs need lambda, B and C");
    for (const auto& v : j.at("lambda")) p.lambda.push_back(parse_complex(v, "lambda entry"));
    for (const auto& v : j.at("B")) p.b.push_back(parse_complex(v, "B entry"));
    for (const auto& row : j.at("C"))
        for (const auto& v : row) p.c.push_back(parse_complex(v, "C entry"));
    if (j.contains("D")) {
        std::vector<double> d;
        for (const auto& v : j.at("D")) d.push_back(v.get<double>());
        p.d = std::move(d);
    }
    return p;
}

int auto_cap(int64_t needed) {
    constexpr int64_t kCap = 64;
    return static_cast<int>(std::min<int64_t>(std::max<int64_t>(needed, 1), kCap));
}

void resolve_array_dims(WorkloadConfig& cfg) {
    int rows = 1, cols = 1;
    for (const WorkloadLayer& wl : cfg.layers) {
        if (const auto* s = std::get_if<SsmLayerDesc>(&wl.desc)) {
            rows = std::max(rows, s->params.n + s->params.h + 1);
            cols = std::max(cols, s->params.n + s->params.h);
        } else if (const auto* d = std::get_if<DenseLayerDesc>(&wl.desc)) {
            const int64_t in = d->weights.rows, out = d->weights.cols;
            switch (wl.dense_dataflow) {
                case GemmDataflow::OS:
                    rows = std::max(rows, auto_cap(cfg.t));
                    cols = std::max(cols, auto_cap(out));
                    break;
                case GemmDataflow::WS:
                    rows = std::max(rows, auto_cap(in));
                    cols = std::max(cols, auto_cap(out));
                    break;
                case GemmDataflow::IS:
                    rows = std::max(rows, auto_cap(in));
                    cols = std::max(cols, auto_cap(cfg.t));
                    break;
            }
        }
    }
    if (cfg.auto_rows) cfg.array.rows = rows;
    if (cfg.auto_cols) cfg.array.cols = cols;
}

}  // namespace

WorkloadConfig parse_config(const json& doc) {
    if (!doc.is_object()) fail("top level must be an object");
    WorkloadConfig cfg;
    try {
        cfg.name = doc.value("name", std::string("workload"));
        cfg.seed = doc.value("seed", uint64_t{1});
        cfg.t = doc.value("T", int64_t{1024});
        cfg.batch = doc.value("batch", 1);
        if (cfg.t < 1) fail("T must be >= 1");
        if (cfg.batch < 1) fail("batch must be >= 1");

        const std::string prec = doc.value("precision", std::string("real32"));
        if (prec == "real32")
            cfg.array.precision = Precision::Real32;
        else if (prec == "complex16")
            cfg.array.precision = Precision::Complex16;
        else
            fail("precision must be real32 or complex16");

        cfg.tolerance = doc.value("tolerance", 0.0);
        cfg.sram_budget_bytes = doc.value("sram_budget_bytes", uint64_t{10'000'000});
        cfg.bandwidth_window = doc.value("bandwidth_window", 64);

        if (doc.contains("array")) {
            const json& a = doc.at("array");
            if (a.contains("rows") && a.at("rows").is_number()) {
                cfg.array.rows = a.at("rows").get<int>();
                cfg.auto_rows = false;
            }
            if (a.contains("cols") && a.at("cols").is_number()) {
                cfg.array.cols = a.at("cols").get<int>();
                cfg.auto_cols = false;
            }
            cfg.array.cycle_time_ns = a.value("cycle_time_ns", 1.4);
            cfg.array.word_bits = a.value("word_bits", 32);
            const std::string table = a.value("power_table", std::string("fp32"));
            if (table == "fp32")
                cfg.array.power_table = PowerTable::Fp32;
            else if (table == "int8")
                cfg.array.power_table = PowerTable::Int8;
            else
                fail("array.power_table must be fp32 or int8");
            cfg.array.env.real_fmt.total_bits =
                static_cast<uint8_t>(a.value("real_total_bits", 32));
            cfg.array.env.real_fmt.frac_bits =
                static_cast<uint8_t>(a.value("real_frac_bits", 16));
            cfg.array.env.cplx_fmt.total_bits =
                static_cast<uint8_t>(a.value("complex_total_bits", 16));
            cfg.array.env.cplx_fmt.frac_bits =
                static_cast<uint8_t>(a.value("complex_frac_bits", 8));
            validate_format(cfg.array.env.real_fmt);
            validate_format(cfg.array.env.cplx_fmt);
        }

        if (doc.contains("baseline")) {
            const json& b = doc.at("baseline");
            cfg.baseline.fill_cycles = b.value("fill_cycles", int64_t{1});
            cfg.baseline.sram_roundtrip_cycles_per_word =
                b.value("sram_roundtrip_cycles_per_word", int64_t{2});
        }

        if (!doc.contains("layers") || !doc.at("layers").is_array() || doc.at("layers").empty())
            fail("layers must be a non-empty array");
        for (const json& lj : doc.at("layers")) {
            const std::string type = lj.value("type", std::string());
            WorkloadLayer wl;
            if (type == "s4" || type == "liquid") {
                const int n = lj.value("N", 64);
                const int h = lj.value("H", 1);
                const double dt = lj.value("dt", 1.0);
                if (n < 1) fail("layer N must be >= 1");
                if (h < 1) fail("layer H must be >= 1");
                if (!(dt > 0)) fail("layer dt must be > 0");
                SsmLayerDesc desc;
                desc.variant = type == "s4" ? SsmVariant::S4 : SsmVariant::Liquid;
                if (!lj.contains("coeffs") ||
                    (lj.at("coeffs").is_string() && lj.at("coeffs") == "synthetic"))
                    desc.params =
                        synthetic_ssm_params(n, h, dt, cfg.seed, cfg.array.precision);
                else if (lj.at("coeffs").is_object())
                    desc.params = parse_explicit_coeffs(lj.at("coeffs"), n, h, dt);
                else
                    fail("layer coeffs must be \"synthetic\" or an object");
                validate_params(desc.params);
                wl.desc = std::move(desc);
            } else if (type == "dense") {
                DenseLayerDesc desc;
                if (!lj.contains("weights")) fail("dense layer needs weights");
                const json& w = lj.at("weights");
                desc.weights.rows = static_cast<int64_t>(w.size());
                desc.weights.cols = w.empty() ? 0 : static_cast<int64_t>(w[0].size());
                for (const auto& row : w) {
                    if (static_cast<int64_t>(row.size()) != desc.weights.cols)
                        fail("dense weights rows must have equal length");
                    for (const auto& v : row) desc.weights.data.push_back(v.get<double>());
                }
                if (desc.weights.rows < 1 || desc.weights.cols < 1)
                    fail("dense weights must be non-empty");
                if (lj.contains("activation"))
                    desc.act = parse_activation(lj.at("activation").get<std::string>());
                wl.dense_dataflow = parse_dataflow(lj.value("dataflow", std::string("os")));
                wl.desc = std::move(desc);
            } else if (type == "layernorm") {
                NormLayerDesc desc;
                for (const auto& v : lj.value("gamma", json::array()))
                    desc.gamma.push_back(v.get<double>());
                for (const auto& v : lj.value("beta", json::array()))
                    desc.beta.push_back(v.get<double>());
                if (desc.gamma.empty() || desc.gamma.size() != desc.beta.size())
                    fail("layernorm gamma/beta must be equal-length and non-empty");
                wl.desc = std::move(desc);
            } else {
                fail("layer type must be s4, liquid, dense or layernorm");
            }
            cfg.layers.push_back(std::move(wl));
        }

        // Widths must chain; SSM layers consume scalar sequences.
        int64_t width = 1;
        for (const WorkloadLayer& wl : cfg.layers) width = layer_out_width(wl.desc, width);

        if (doc.contains("sweep")) cfg.sweep = doc.at("sweep");
    } catch (const json::exception& e) {
        fail(e.what());
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }

    resolve_array_dims(cfg);
    if (cfg.tolerance <= 0.0) cfg.tolerance = default_tolerance(cfg.array.precision);
    validate_config(cfg.array);
    return cfg;
}

std::vector<std::string> preset_names() {
    return {"listops", "text", "retrieval", "image", "pathfinder",
            "pathfinder_x", "imdb", "aan", "scifar"};
}

std::optional<nlohmann::json> preset_config(const std::string& name) {
    // Sequence lengths follow the long-range benchmark tasks each preset is
    // named after.
    static const std::vector<std::pair<const char*, int64_t>> kPresets = {
        {"listops", 2048}, {"text", 2048},        {"retrieval", 4000},
        {"image", 1024},   {"pathfinder", 1024},  {"pathfinder_x", 16384},
        {"imdb", 2048},    {"aan", 4000},         {"scifar", 3072},
    };
    for (const auto& [pname, t] : kPresets) {
        if (name != pname) continue;
        json j;
        j["name"] = pname;
        j["seed"] = 1;
        j["T"] = t;
        j["batch"] = 1;
        j["precision"] = "complex16";
        j["layers"] = json::array(
            {{{"type", "liquid"}, {"N", 64}, {"H", 1}, {"dt", 1.0}, {"coeffs", "synthetic"}}});
        return j;
    }
    return std::nullopt;
}

nlohmann::json load_config_doc(const std::string& path_or_preset) {
    if (auto preset = preset_config(path_or_preset)) return *preset;
    std::ifstream in(path_or_preset);
    if (!in)
        throw ConfigError("config: cannot open '" + path_or_preset +
                          "' (not a file and not a preset name)");
    try {
        return json::parse(in);  // parse errors carry line/column positions
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

WorkloadConfig load_config(const std::string& path_or_preset) {
    return parse_config(load_config_doc(path_or_preset));
}

nlohmann::json resolved_config_json(const WorkloadConfig& cfg) {
    json j;
    j["name"] = cfg.name;
    j["seed"] = cfg.seed;
    j["T"] = cfg.t;
    j["batch"] = cfg.batch;
    j["precision"] = precision_name(cfg.array.precision);
    j["tolerance"] = cfg.tolerance;
    j["sram_budget_bytes"] = cfg.sram_budget_bytes;
    j["bandwidth_window"] = cfg.bandwidth_window;
    j["array"] = {{"rows", cfg.array.rows},
                  {"cols", cfg.array.cols},
                  {"cycle_time_ns", cfg.array.cycle_time_ns},
                  {"word_bits", cfg.array.word_bits},
                  {"power_table", cfg.array.power_table == PowerTable::Fp32 ? "fp32" : "int8"},
                  {"real_total_bits", cfg.array.env.real_fmt.total_bits},
                  {"real_frac_bits", cfg.array.env.real_fmt.frac_bits},
                  {"complex_total_bits", cfg.array.env.cplx_fmt.total_bits},
                  {"complex_frac_bits", cfg.array.env.cplx_fmt.frac_bits}};
    j["baseline"] = {{"fill_cycles", cfg.baseline.fill_cycles},
                     {"sram_roundtrip_cycles_per_word",
                      cfg.baseline.sram_roundtrip_cycles_per_word}};

    auto complex_json = [](Complex z) { return json::array({z.real(), z.imag()}); };
    json layers = json::array();
    for (const WorkloadLayer& wl : cfg.layers) {
        json lj;
        if (const auto* s = std::get_if<SsmLayerDesc>(&wl.desc)) {
            lj["type"] = s->variant == SsmVariant::S4 ? "s4" : "liquid";
            lj["N"] = s->params.n;
            lj["H"] = s->params.h;
            lj["dt"] = s->params.dt;
            json coeffs;
            for (Complex z : s->params.lambda) coeffs["lambda"].push_back(complex_json(z));
            for (Complex z : s->params.b) coeffs["B"].push_back(complex_json(z));
            for (int head = 0; head < s->params.h; ++head) {
                json row = json::array();
                for (int k = 0; k < s->params.n; ++k)
                    row.push_back(complex_json(s->params.c[static_cast<size_t>(head) * s->params.n + k]));
                coeffs["C"].push_back(std::move(row));
            }
            if (s->params.d) coeffs["D"] = *s->params.d;
            lj["coeffs"] = std::move(coeffs);
        } else if (const auto* d = std::get_if<DenseLayerDesc>(&wl.desc)) {
            lj["type"] = "dense";
            json w = json::array();
            for (int64_t r = 0; r < d->weights.rows; ++r) {
                json row = json::array();
                for (int64_t c = 0; c < d->weights.cols; ++c) row.push_back(d->weights.at(r, c));
                w.push_back(std::move(row));
            }
            lj["weights"] = std::move(w);
            if (d->act) {
                const char* names[] = {"relu", "silu", "sigmoid", "tanh"};
                lj["activation"] = names[static_cast<int>(*d->act)];
            }
            const char* dfn[] = {"os", "ws", "is"};
            lj["dataflow"] = dfn[static_cast<int>(wl.dense_dataflow)];
        } else {
            const auto& nrm = std::get<NormLayerDesc>(wl.desc);
            lj["type"] = "layernorm";
            lj["gamma"] = nrm.gamma;
            lj["beta"] = nrm.beta;
        }
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    if (!cfg.sweep.is_null()) j["sweep"] = cfg.sweep;
    return j;
}

// ---------------------------------------------------------------------------
// Runners

namespace {

void append_trace(PortTrace& dst, const PortTrace& src) {
    dst.weight_reads.insert(dst.weight_reads.end(), src.weight_reads.begin(),
                            src.weight_reads.end());
    dst.weight_writes.insert(dst.weight_writes.end(), src.weight_writes.begin(),
                             src.weight_writes.end());
    dst.io_reads.insert(dst.io_reads.end(), src.io_reads.begin(), src.io_reads.end());
    dst.io_writes.insert(dst.io_writes.end(), src.io_writes.begin(), src.io_writes.end());
}

void merge_tally(EnergyTally& dst, const EnergyTally& src) {
    dst.reset_sleep += src.reset_sleep;
    dst.preload_pass += src.preload_pass;
    dst.preload_sleep += src.preload_sleep;
    for (int m = 0; m < kNumModes; ++m)
        dst.compute_modes[static_cast<size_t>(m)] += src.compute_modes[static_cast<size_t>(m)];
    dst.readout_pass += src.readout_pass;
    dst.readout_sleep += src.readout_sleep;
}

void merge_phases(PhaseCycles& dst, const PhaseCycles& src) {
    dst.reset += src.reset;
    dst.preload += src.preload;
    dst.compute += src.compute;
    dst.readout += src.readout;
}

nlohmann::json power_tables_json() {
    return {{"fp32",
             {{"sleep", power_of(PEMode::Sleep, PowerTable::Fp32)},
              {"pass_through", power_of(PEMode::PassThrough, PowerTable::Fp32)},
              {"accumulation", power_of(PEMode::FRI, PowerTable::Fp32)}}},
            {"int8",
             {{"sleep", power_of(PEMode::Sleep, PowerTable::Int8)},
              {"pass_through", power_of(PEMode::PassThrough, PowerTable::Int8)},
              {"accumulation", power_of(PEMode::FRI, PowerTable::Int8)}}}};
}

nlohmann::json energy_json(const EnergyReport& e) {
    nlohmann::json mode_cycles;
    for (int m = 0; m < kNumModes; ++m)
        mode_cycles[mode_name(static_cast<PEMode>(m))] =
            e.compute_mode_cycles[static_cast<size_t>(m)];
    return {{"reset_nj", e.reset_nj},
            {"preload_nj", e.preload_nj},
            {"compute_nj", e.compute_nj},
            {"readout_nj", e.readout_nj},
            {"total_nj", e.total_nj},
            {"cycle_time_ns", e.cycle_time_ns},
            {"power_table", e.table == PowerTable::Fp32 ? "fp32" : "int8"},
            {"mode_powers_mw",
             {{"sleep", e.sleep_mw},
              {"pass_through", e.passthrough_mw},
              {"accumulation", e.mac_mw}}},
            {"compute_mode_cycles", std::move(mode_cycles)},
            {"preload_passthrough_cycles", e.preload_passthrough_cycles},
            {"readout_passthrough_cycles", e.readout_passthrough_cycles},
            {"reset_sleep_cycles", e.reset_sleep_cycles},
            {"idle_sleep_cycles", e.idle_sleep_cycles}};
}

struct LayerRunStats {
    PhaseCycles phases;
    EnergyTally tally;
    uint64_t saturations = 0;
    nlohmann::json detail;
};

}  // namespace

RealMatrix run_gemm_on_array(const RealMatrix& a, const RealMatrix& b, GemmDataflow dataflow,
                             const ArrayConfig& cfg, SystolicArray* array) {
    GemmSpec spec{a.rows, a.cols, b.cols, dataflow};
    const std::vector<GemmTilePlan> tiles = plan_gemm(spec, cfg, a, b);

    std::optional<SystolicArray> local;
    if (!array) {
        local.emplace(cfg);
        array = &*local;
    }

    // Partial blocks accumulate host-side across the K tiles, in fixed point.
    std::vector<ScalarValue> acc(static_cast<size_t>(spec.m * spec.n), sv_zero(cfg.precision));
    for (const GemmTilePlan& tp : tiles) {
        array->run_reset();
        array->run_preload(tp.plan);
        const ComputeResult res = array->run_compute(tp.plan, {});
        std::vector<ScalarValue> block;
        if (tp.plan.has_readout_phase) {
            const ReadoutResult ro = array->run_readout(tp.plan);
            block = ro.values;  // tile.m x tile.n row-major
        } else {
            block = res.outputs;
        }
        for (int64_t i = 0; i < tp.tile.m; ++i)
            for (int64_t j = 0; j < tp.tile.n; ++j) {
                const size_t dst = static_cast<size_t>((tp.tile.m0 + i) * spec.n +
                                                       (tp.tile.n0 + j));
                acc[dst] = sv_add(acc[dst], block[static_cast<size_t>(i * tp.tile.n + j)],
                                  cfg.env);
            }
    }

    RealMatrix out(spec.m, spec.n);
    for (int64_t i = 0; i < spec.m; ++i)
        for (int64_t j = 0; j < spec.n; ++j)
            out.at(i, j) = sv_to_complex(acc[static_cast<size_t>(i * spec.n + j)], cfg.env).real();
    return out;
}

WorkloadResult run_workload(const WorkloadConfig& cfg) {
    WorkloadResult result;
    const int64_t t_len = cfg.t;
    const int batch = cfg.batch;

    // Input sequences and the golden reference for the whole stack.
    std::vector<std::vector<double>> inputs(static_cast<size_t>(batch));
    LayerStackSpec stack;
    for (const WorkloadLayer& wl : cfg.layers) stack.layers.push_back(wl.desc);
    for (int s = 0; s < batch; ++s) {
        inputs[static_cast<size_t>(s)].resize(static_cast<size_t>(t_len));
        for (int64_t t = 0; t < t_len; ++t)
            inputs[static_cast<size_t>(s)][static_cast<size_t>(t)] =
                seeded_uniform(cfg.seed, static_cast<uint64_t>(s), static_cast<uint64_t>(t));
        result.golden_outputs.push_back(
            run_model(stack, std::span<const double>(inputs[static_cast<size_t>(s)])));
    }

    // Simulated pipeline, layer-major so SSM weights stay resident across the
    // whole batch.
    std::vector<RealMatrix> cur(static_cast<size_t>(batch));
    for (int s = 0; s < batch; ++s) {
        cur[static_cast<size_t>(s)] = RealMatrix(t_len, 1);
        for (int64_t t = 0; t < t_len; ++t)
            cur[static_cast<size_t>(s)].at(t, 0) = inputs[static_cast<size_t>(s)][static_cast<size_t>(t)];
    }

    PhaseCycles phases;
    EnergyTally tally;
    nlohmann::json layer_details = nlohmann::json::array();
    nlohmann::json first_util, first_sram;
    int64_t first_output_cycle = 0, predicted_first = 0, predicted_total = 0;
    bool consecutive = true;
    int64_t compute_cycles_per_seq = 0;

    reset_saturation_count();

    for (size_t li = 0; li < cfg.layers.size(); ++li) {
        const WorkloadLayer& wl = cfg.layers[li];
        nlohmann::json detail;
        if (const auto* sdesc = std::get_if<SsmLayerDesc>(&wl.desc)) {
            const SsmLayerParams& p = sdesc->params;
            const DiscreteCoeffs coeffs = discretize(p);
            const LayoutPlan plan = (sdesc->variant == SsmVariant::S4)
                                        ? plan_s4(p, coeffs, cfg.array, t_len)
                                        : plan_liquid(p, coeffs, cfg.array, t_len);
            SystolicArray array(cfg.array);
            array.run_reset();
            array.run_preload(plan);

            for (int s = 0; s < batch; ++s) {
                std::vector<ScalarValue> tokens(static_cast<size_t>(t_len));
                for (int64_t t = 0; t < t_len; ++t)
                    tokens[static_cast<size_t>(t)] = sv_from_real(
                        cur[static_cast<size_t>(s)].at(t, 0), cfg.array.env, cfg.array.precision);
                const ComputeResult res = array.run_compute(plan, tokens);
                if (li == 0 && s == 0) {
                    first_output_cycle = res.first_output_cycle;
                    predicted_first = plan.predicted_first_output;
                    predicted_total = plan.predicted_total;
                    compute_cycles_per_seq = res.cycles;
                }
                consecutive = consecutive && res.outputs_consecutive;

                RealMatrix y(t_len, p.h);
                for (int64_t t = 0; t < t_len; ++t)
                    for (int head = 0; head < p.h; ++head) {
                        double v = sv_to_complex(
                                       res.outputs[static_cast<size_t>(t * p.h + head)],
                                       cfg.array.env)
                                       .real();
                        if (p.d) v += (*p.d)[static_cast<size_t>(head)] *
                                      cur[static_cast<size_t>(s)].at(t, 0);
                        y.at(t, head) = v;
                    }
                cur[static_cast<size_t>(s)] = std::move(y);
                if (s + 1 < batch) array.run_state_reset();
            }

            const UtilizationReport util = utilization(plan);
            const SramSizing sram =
                sram_sizes(t_len, batch, p.h, plan, cfg.array, cfg.sram_budget_bytes);
            detail["type"] = sdesc->variant == SsmVariant::S4 ? "s4" : "liquid";
            detail["N"] = p.n;
            detail["H"] = p.h;
            detail["plan_rows"] = plan.plan_rows;
            detail["plan_cols"] = plan.plan_cols;
            detail["predicted_first_output"] = plan.predicted_first_output;
            detail["predicted_total_compute"] = plan.predicted_total;
            detail["utilization"] = {{"active_pes", util.active_pes},
                                     {"total_pes", util.total_pes},
                                     {"ratio", util.ratio},
                                     {"boriakoff", util.boriakoff}};
            nlohmann::json pe_grid = nlohmann::json::array();
            for (int r = 0; r < cfg.array.rows; ++r) {
                nlohmann::json row = nlohmann::json::array();
                for (int c = 0; c < cfg.array.cols; ++c) {
                    const PEState& pe = array.pe(r, c);
                    double pj = 0.0;
                    for (int m = 0; m < kNumModes; ++m)
                        pj += static_cast<double>(pe.energy_cycles[static_cast<size_t>(m)]) *
                              power_of(static_cast<PEMode>(m), cfg.array.power_table) *
                              cfg.array.cycle_time_ns;
                    row.push_back(pj);
                }
                pe_grid.push_back(std::move(row));
            }
            detail["pe_energy_pj"] = std::move(pe_grid);
            if (first_util.is_null()) {
                first_util = detail["utilization"];
                first_sram = {{"weight_bytes", sram.weight_bytes},
                              {"io_bytes", sram.io_bytes},
                              {"T", sram.t},
                              {"batch", sram.batch},
                              {"H", sram.h},
                              {"word_bits", sram.word_bits},
                              {"plan_rows", sram.plan_rows},
                              {"plan_cols", sram.plan_cols},
                              {"budget_bytes", sram.budget_bytes},
                              {"fits_budget", sram.fits_budget}};
                detail["sram"] = first_sram;
            }
            merge_phases(phases, array.phase_cycles());
            merge_tally(tally, array.energy_tally());
            result.saturations += array.total_saturations();
            append_trace(result.trace, array.trace());
        } else if (const auto* ddesc = std::get_if<DenseLayerDesc>(&wl.desc)) {
            ArrayConfig acfg = cfg.array;
            acfg.precision = Precision::Real32;  // dense layers carry real data
            SystolicArray array(acfg);
            for (int s = 0; s < batch; ++s) {
                RealMatrix out = run_gemm_on_array(cur[static_cast<size_t>(s)], ddesc->weights,
                                                   wl.dense_dataflow, acfg, &array);
                if (ddesc->act)
                    out.data = apply_activation(std::span<const double>(out.data), *ddesc->act);
                cur[static_cast<size_t>(s)] = std::move(out);
            }
            detail["type"] = "dense";
            detail["in_width"] = ddesc->weights.rows;
            detail["out_width"] = ddesc->weights.cols;
            merge_phases(phases, array.phase_cycles());
            merge_tally(tally, array.energy_tally());
            result.saturations += array.total_saturations();
            append_trace(result.trace, array.trace());
        } else {
            const auto& norm = std::get<NormLayerDesc>(wl.desc);
            for (int s = 0; s < batch; ++s) {
                RealMatrix& m = cur[static_cast<size_t>(s)];
                RealMatrix out(m.rows, m.cols);
                for (int64_t t = 0; t < m.rows; ++t) {
                    std::span<const double> row(m.data.data() + t * m.cols,
                                                static_cast<size_t>(m.cols));
                    const std::vector<double> nr = layer_norm(row, norm.gamma, norm.beta);
                    for (int64_t c = 0; c < m.cols; ++c) out.at(t, c) = nr[static_cast<size_t>(c)];
                }
                m = std::move(out);
            }
            detail["type"] = "layernorm";
        }
        layer_details.push_back(std::move(detail));
    }
    result.sim_outputs = cur;

    // Oracle comparison over the final stack outputs.
    double max_err = 0.0;
    int64_t arg_s = 0, arg_t = 0, arg_w = 0;
    for (int s = 0; s < batch; ++s) {
        const RealMatrix& sim = result.sim_outputs[static_cast<size_t>(s)];
        const RealMatrix& gold = result.golden_outputs[static_cast<size_t>(s)];
        for (int64_t t = 0; t < sim.rows; ++t)
            for (int64_t w = 0; w < sim.cols; ++w) {
                const double err = std::abs(sim.at(t, w) - gold.at(t, w));
                if (err > max_err) {
                    max_err = err;
                    arg_s = s;
                    arg_t = t;
                    arg_w = w;
                }
            }
    }
    result.max_abs_error = max_err;
    result.within_tolerance = max_err <= cfg.tolerance;
    result.first_output_cycle = first_output_cycle;
    {
        std::ostringstream loc;
        loc << "seq=" << arg_s << ",t=" << arg_t << ",w=" << arg_w;
        result.error_location = loc.str();
    }

    const EnergyReport energy = energy_of(tally, cfg.array);
    uint64_t tw = 0, tww = 0, tir = 0, tiw = 0;
    for (size_t i = 0; i < result.trace.size(); ++i) {
        tw += result.trace.weight_reads[i];
        tww += result.trace.weight_writes[i];
        tir += result.trace.io_reads[i];
        tiw += result.trace.io_writes[i];
    }

    nlohmann::json rep;
    rep["name"] = cfg.name;
    rep["version"] = kVersionString;
    rep["config"] = resolved_config_json(cfg);
    rep["phases"] = {{"reset", phases.reset},
                     {"preload", phases.preload},
                     {"compute", phases.compute},
                     {"readout", phases.readout},
                     {"total", phases.total()}};
    rep["latency"] = {{"first_output_cycle", first_output_cycle},
                      {"predicted_first_output", predicted_first},
                      {"predicted_total_compute", predicted_total},
                      {"compute_cycles_per_sequence", compute_cycles_per_seq},
                      {"outputs_consecutive", consecutive}};
    rep["energy"] = energy_json(energy);
    rep["power_tables_mw"] = power_tables_json();
    rep["trace_summary"] = {{"cycles", static_cast<int64_t>(result.trace.size())},
                            {"weight_reads", tw},
                            {"weight_writes", tww},
                            {"io_reads", tir},
                            {"io_writes", tiw}};
    if (!first_sram.is_null()) rep["sram"] = first_sram;
    if (!first_util.is_null()) rep["utilization"] = first_util;
    rep["oracle"] = {{"max_abs_error", result.max_abs_error},
                     {"argmax", {{"seq", arg_s}, {"t", arg_t}, {"w", arg_w}}},
                     {"tolerance", cfg.tolerance},
                     {"within_tolerance", result.within_tolerance}};
    rep["saturations"] = result.saturations;
    rep["layers"] = std::move(layer_details);
    rep["assumptions"] = nlohmann::json::array(
        {"SRAM access energy excluded on every machine modeled",
         "preload and readout cycles billed at pass-through power per touched PE",
         "per-mode power charged per occupied cycle, independent of operand values"});
    result.report = std::move(rep);
    return result;
}

// ---------------------------------------------------------------------------
// Sweep / compare

namespace {

const std::vector<std::string> kSweepKeyOrder = {"N", "H", "dt", "T", "batch", "seed"};

void apply_override(nlohmann::json& doc, const std::string& key, const nlohmann::json& value) {
    if (key == "T" || key == "batch" || key == "seed") {
        doc[key] = value;
        return;
    }
    for (auto& layer : doc.at("layers")) {
        const std::string type = layer.value("type", std::string());
        if (type == "s4" || type == "liquid") {
            layer[key] = value;
            return;
        }
    }
    throw ConfigError("config: sweep key '" + key + "' needs an SSM layer");
}

}  // namespace

std::vector<SweepRow> run_sweep(const WorkloadConfig& cfg, int threads) {
    if (cfg.sweep.is_null() || !cfg.sweep.is_object() || cfg.sweep.empty())
        throw ConfigError("config: sweep requested but no sweep grid given");

    std::vector<std::string> keys;
    for (const std::string& k : kSweepKeyOrder)
        if (cfg.sweep.contains(k)) keys.push_back(k);
    for (auto it = cfg.sweep.begin(); it != cfg.sweep.end(); ++it)
        if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
            throw ConfigError("config: unknown sweep key '" + it.key() + "'");

    // Cartesian product in canonical key order.
    std::vector<nlohmann::json> points{nlohmann::json::object()};
    for (const std::string& k : keys) {
        std::vector<nlohmann::json> next;
        for (const auto& p : points)
            for (const auto& v : cfg.sweep.at(k)) {
                nlohmann::json q = p;
                q[k] = v;
                next.push_back(std::move(q));
            }
        points = std::move(next);
    }

    nlohmann::json base = resolved_config_json(cfg);
    // keep auto-sized dimensions auto so every point fits its own footprint
    if (cfg.auto_rows) base["array"].erase("rows");
    if (cfg.auto_cols) base["array"].erase("cols");
    std::vector<SweepRow> rows(points.size());
    std::atomic<size_t> cursor{0};
    const int nthreads = std::max(1, threads);

    auto worker = [&]() {
        for (;;) {
            const size_t i = cursor.fetch_add(1);
            if (i >= points.size()) return;
            SweepRow& row = rows[i];
            row.point = points[i];
            try {
                nlohmann::json doc = base;
                doc.erase("sweep");
                for (auto it = points[i].begin(); it != points[i].end(); ++it) {
                    // Re-generate synthetic coefficients when their inputs move.
                    if (it.key() == "N" || it.key() == "H" || it.key() == "dt" ||
                        it.key() == "seed")
                        for (auto& layer : doc.at("layers"))
                            if (layer.contains("coeffs") && layer.at("coeffs").is_object())
                                layer["coeffs"] = "synthetic";
                    apply_override(doc, it.key(), it.value());
                }
                const WorkloadConfig point_cfg = parse_config(doc);
                const WorkloadResult res = run_workload(point_cfg);
                row.ok = true;
                row.metrics = {
                    {"compute_cycles", res.report["phases"]["compute"]},
                    {"total_cycles", res.report["phases"]["total"]},
                    {"first_output_cycle", res.first_output_cycle},
                    {"energy_total_nj", res.report["energy"]["total_nj"]},
                    {"energy_compute_nj", res.report["energy"]["compute_nj"]},
                    {"utilization", res.report.contains("utilization")
                                        ? res.report["utilization"]["ratio"]
                                        : nlohmann::json(0.0)},
                    {"max_abs_error", res.max_abs_error},
                    {"saturations", res.saturations}};
            } catch (const std::exception& e) {
                row.ok = false;
                row.message = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return rows;
}

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

namespace {

std::string num_str(const nlohmann::json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

}  // namespace

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "n,h,dt,t,batch,seed,status,compute_cycles,total_cycles,first_output_cycle,"
           "energy_total_nj,energy_compute_nj,utilization,max_abs_error,saturations,message\r\n";
    for (const SweepRow& r : rows) {
        auto pv = [&](const char* k) { return r.point.contains(k) ? num_str(r.point[k]) : ""; };
        auto mv = [&](const char* k) { return r.ok ? num_str(r.metrics[k]) : ""; };
        out << pv("N") << ',' << pv("H") << ',' << pv("dt") << ',' << pv("T") << ','
            << pv("batch") << ',' << pv("seed") << ',' << (r.ok ? "ok" : "error") << ','
            << mv("compute_cycles") << ',' << mv("total_cycles") << ','
            << mv("first_output_cycle") << ',' << mv("energy_total_nj") << ','
            << mv("energy_compute_nj") << ',' << mv("utilization") << ','
            << mv("max_abs_error") << ',' << mv("saturations") << ','
            << csv_quote(r.message) << "\r\n";
    }
    return out.str();
}

CompareResult run_compare(const WorkloadConfig& cfg) {
    const SsmLayerDesc* ssm = nullptr;
    for (const WorkloadLayer& wl : cfg.layers)
        if ((ssm = std::get_if<SsmLayerDesc>(&wl.desc))) break;
    if (!ssm) throw ConfigError("config: compare needs at least one SSM layer");

    const WorkloadResult res = run_workload(cfg);
    const int n = ssm->params.n, h = ssm->params.h;

    const int64_t epoch_compute = cfg.t + n + h;  // per sequence
    const int64_t epoch_total = res.report["phases"]["total"].get<int64_t>();
    const double epoch_energy = res.report["energy"]["total_nj"].get<double>();
    const int64_t base_cycles = baseline_tpu_cycles(cfg.t, n, h, cfg.baseline);
    const double base_energy = baseline_energy_nj(cfg.t, n, h, cfg.array, cfg.baseline) *
                               static_cast<double>(cfg.batch);
    const double epoch_util = res.report["utilization"]["ratio"].get<double>();
    const double base_util = baseline_utilization(n, h, cfg.array);

    CompareResult cr;
    cr.row = {{"name", cfg.name},
              {"t", cfg.t},
              {"n", n},
              {"h", h},
              {"batch", cfg.batch},
              {"epoch_compute_cycles", epoch_compute},
              {"epoch_total_cycles", epoch_total},
              {"epoch_energy_nj", epoch_energy},
              {"baseline_cycles", base_cycles},
              {"baseline_energy_nj", base_energy},
              {"cycle_ratio", static_cast<double>(base_cycles) /
                                  static_cast<double>(epoch_compute)},
              {"energy_ratio", base_energy / epoch_energy},
              {"epoch_utilization", epoch_util},
              {"baseline_utilization", base_util},
              {"boriakoff_utilization", kBoriakoffUtilization}};

    std::ostringstream powers;
    powers << "mode powers mW (" << (cfg.array.power_table == PowerTable::Fp32 ? "fp32" : "int8")
           << "): sleep " << power_of(PEMode::Sleep, cfg.array.power_table) << ", pass-through "
           << power_of(PEMode::PassThrough, cfg.array.power_table) << ", accumulation "
           << power_of(PEMode::FRI, cfg.array.power_table);
    std::ostringstream bm;
    bm << "baseline model: preload N+1; per token (N+fill) + (N + 2*N*rt) + (N+H+fill), fill="
       << cfg.baseline.fill_cycles << ", rt=" << cfg.baseline.sram_roundtrip_cycles_per_word
       << " cycles/word";
    cr.assumptions = {
        powers.str(),
        bm.str(),
        "baseline energy: active PEs at accumulation power, idle PEs at pass-through (no clock gating)",
        "baseline utilization: mean of layer-I (N PEs) and layer-II (N*H PEs) passes",
        "SRAM access energy excluded on both machines",
        std::string("cycle time ns: ") + std::to_string(cfg.array.cycle_time_ns)};
    return cr;
}

std::string compare_csv(const CompareResult& r) {
    std::ostringstream out;
    out << "name,t,n,h,batch,epoch_compute_cycles,epoch_total_cycles,epoch_energy_nj,"
           "baseline_cycles,baseline_energy_nj,cycle_ratio,energy_ratio,epoch_utilization,"
           "baseline_utilization,boriakoff_utilization\r\n";
    const auto& j = r.row;
    out << csv_quote(j["name"].get<std::string>()) << ',' << num_str(j["t"]) << ','
        << num_str(j["n"]) << ',' << num_str(j["h"]) << ',' << num_str(j["batch"]) << ','
        << num_str(j["epoch_compute_cycles"]) << ',' << num_str(j["epoch_total_cycles"]) << ','
        << num_str(j["epoch_energy_nj"]) << ',' << num_str(j["baseline_cycles"]) << ','
        << num_str(j["baseline_energy_nj"]) << ',' << num_str(j["cycle_ratio"]) << ','
        << num_str(j["energy_ratio"]) << ',' << num_str(j["epoch_utilization"]) << ','
        << num_str(j["baseline_utilization"]) << ',' << num_str(j["boriakoff_utilization"])
        << "\r\n";
    for (const std::string& a : r.assumptions) out << "# assumption: " << a << "\r\n";
    return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

std::string trace_csv(const PortTrace& trace) {
    std::ostringstream out;
    out << "cycle,weight_reads,weight_writes,io_reads,io_writes\r\n";
    for (size_t i = 0; i < trace.size(); ++i)
        out << (i + 1) << ',' << trace.weight_reads[i] << ',' << trace.weight_writes[i] << ','
            << trace.io_reads[i] << ',' << trace.io_writes[i] << "\r\n";
    return out.str();
}

std::string outputs_csv(const WorkloadResult& r) {
    std::ostringstream out;
    const int64_t width = r.sim_outputs.empty() ? 0 : r.sim_outputs[0].cols;
    out << "seq,t";
    for (int64_t w = 0; w < width; ++w) out << ",sim_" << w;
    for (int64_t w = 0; w < width; ++w) out << ",gold_" << w;
    out << "\r\n";
    for (size_t s = 0; s < r.sim_outputs.size(); ++s) {
        const RealMatrix& sim = r.sim_outputs[s];
        const RealMatrix& gold = r.golden_outputs[s];
        for (int64_t t = 0; t < sim.rows; ++t) {
            out << s << ',' << t;
            for (int64_t w = 0; w < width; ++w) out << ',' << sim.at(t, w);
            for (int64_t w = 0; w < width; ++w) out << ',' << gold.at(t, w);
            out << "\r\n";
        }
    }
    return out.str();
}

}  // namespace epochsim
