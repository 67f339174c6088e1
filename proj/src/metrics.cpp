#include "epochsim/metrics.hpp"

#include <stdexcept>

namespace epochsim {

EnergyReport energy_of(const EnergyTally& tally, const ArrayConfig& cfg) {
    EnergyReport r;
    r.cycle_time_ns = cfg.cycle_time_ns;
    r.table = cfg.power_table;
    r.sleep_mw = power_of(PEMode::Sleep, cfg.power_table);
    r.passthrough_mw = power_of(PEMode::PassThrough, cfg.power_table);
    r.mac_mw = power_of(PEMode::FRI, cfg.power_table);

    // mW * ns = pJ; report in nJ.
    const double pj_to_nj = 1e-3;
    const double ct = cfg.cycle_time_ns;

    r.reset_sleep_cycles = tally.reset_sleep;
    r.reset_nj = static_cast<double>(tally.reset_sleep) * r.sleep_mw * ct * pj_to_nj;

    r.preload_passthrough_cycles = tally.preload_pass;
    r.preload_nj = (static_cast<double>(tally.preload_pass) * r.passthrough_mw +
                    static_cast<double>(tally.preload_sleep) * r.sleep_mw) *
                   ct * pj_to_nj;

    r.compute_mode_cycles = tally.compute_modes;
    double compute_pj = 0.0;
    for (int m = 0; m < kNumModes; ++m)
        compute_pj += static_cast<double>(tally.compute_modes[static_cast<size_t>(m)]) *
                      power_of(static_cast<PEMode>(m), cfg.power_table) * ct;
    r.compute_nj = compute_pj * pj_to_nj;

    r.readout_passthrough_cycles = tally.readout_pass;
    r.readout_nj = (static_cast<double>(tally.readout_pass) * r.passthrough_mw +
                    static_cast<double>(tally.readout_sleep) * r.sleep_mw) *
                   ct * pj_to_nj;

    r.idle_sleep_cycles = tally.preload_sleep + tally.readout_sleep;
    r.total_nj = r.reset_nj + r.preload_nj + r.compute_nj + r.readout_nj;
    return r;
}

SramSizing sram_sizes(int64_t t, int batch, int h, const LayoutPlan& plan,
                      const ArrayConfig& cfg, uint64_t budget_bytes) {
    if (t < 1 || batch < 1 || h < 1)
        throw std::invalid_argument("sram_sizes: arguments must be positive");
    SramSizing s;
    s.t = t;
    s.batch = batch;
    s.h = h;
    s.word_bits = cfg.word_bits;
    s.plan_rows = plan.plan_rows;
    s.plan_cols = plan.plan_cols;
    const uint64_t bytes_per_word = static_cast<uint64_t>(cfg.word_bits) / 8;
    s.weight_bytes = static_cast<uint64_t>(plan.plan_rows) * plan.plan_cols * bytes_per_word;
    s.io_bytes = static_cast<uint64_t>(batch) *
                 (static_cast<uint64_t>(t) + static_cast<uint64_t>(t) * h) * bytes_per_word;
    s.budget_bytes = budget_bytes;
    s.fits_budget = s.io_bytes <= budget_bytes;
    return s;
}

UtilizationReport utilization(const LayoutPlan& plan) {
    UtilizationReport u;
    u.total_pes = plan.rows * plan.cols;
    for (PEMode m : plan.mode_grid)
        if (is_mac_mode(m)) ++u.active_pes;
    u.ratio = u.total_pes ? static_cast<double>(u.active_pes) / u.total_pes : 0.0;
    return u;
}

int64_t baseline_tpu_cycles(int64_t t, int n, int h, const BaselineModel& model) {
    if (t < 1 || n < 1 || h < 1)
        throw std::invalid_argument("baseline_tpu_cycles: arguments must be positive");
    const int64_t preload = n + 1;
    const int64_t scale = n + model.fill_cycles;
    const int64_t recurrence = n + 2 * static_cast<int64_t>(n) * model.sram_roundtrip_cycles_per_word;
    const int64_t linear = n + h + model.fill_cycles;
    return preload + t * (scale + recurrence + linear);
}

double baseline_energy_nj(int64_t t, int n, int h, const ArrayConfig& cfg,
                          const BaselineModel& model) {
    const double mac = power_of(PEMode::FRI, cfg.power_table);
    const double pass = power_of(PEMode::PassThrough, cfg.power_table);
    const double total_pes = static_cast<double>(cfg.rows) * cfg.cols;
    auto pass_energy = [&](int64_t cycles, double active) {
        return static_cast<double>(cycles) *
               (active * mac + (total_pes - active) * pass) * cfg.cycle_time_ns * 1e-3;
    };
    const int64_t scale = n + model.fill_cycles;
    const int64_t recurrence = n + 2 * static_cast<int64_t>(n) * model.sram_roundtrip_cycles_per_word;
    const int64_t linear = n + h + model.fill_cycles;
    double nj = pass_energy(n + 1, 0.0);  // preload, nothing computing
    nj += static_cast<double>(t) * (pass_energy(scale, n) + pass_energy(recurrence, n) +
                                    pass_energy(linear, static_cast<double>(n) * h));
    return nj;
}

double baseline_utilization(int n, int h, const ArrayConfig& cfg) {
    const double total = static_cast<double>(cfg.rows) * cfg.cols;
    const double layer1 = static_cast<double>(n) / total;
    const double layer2 = static_cast<double>(n) * h / total;
    return 0.5 * (layer1 + layer2);
}

std::vector<BandwidthPoint> bandwidth_summary(const PortTrace& trace, const ArrayConfig& cfg,
                                              int window) {
    std::vector<BandwidthPoint> out;
    if (trace.size() == 0) return out;
    if (window < 1) throw std::invalid_argument("bandwidth_summary: window must be >= 1");

    const size_t n = trace.size();
    out.reserve(n);
    double wr = 0, ww = 0, ior = 0, iow = 0;
    for (size_t i = 0; i < n; ++i) {
        wr += trace.weight_reads[i];
        ww += trace.weight_writes[i];
        ior += trace.io_reads[i];
        iow += trace.io_writes[i];
        if (i >= static_cast<size_t>(window)) {
            wr -= trace.weight_reads[i - window];
            ww -= trace.weight_writes[i - window];
            ior -= trace.io_reads[i - window];
            iow -= trace.io_writes[i - window];
        }
        const double span = static_cast<double>(std::min<size_t>(i + 1, window));
        const double ns = span * cfg.cycle_time_ns;
        out.push_back({static_cast<int64_t>(i + 1), wr / ns, ww / ns, ior / ns, iow / ns});
    }
    return out;
}

}  // namespace epochsim
