#include "epochsim/array.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

namespace epochsim {

NeighborMap wire(int r, int c, int rows, int cols) {
    NeighborMap m;
    if (r + 1 < rows) m.south = {r + 1, c};
    if (c + 1 < cols) m.east = {r, c + 1};
    if (r + 1 < rows && c - 1 >= 0) m.diag = {r + 1, c - 1};
    return m;
}

SystolicArray::SystolicArray(const ArrayConfig& cfg) : cfg_(cfg) {
    validate_config(cfg_);
    pes_.assign(static_cast<size_t>(cfg_.rows) * cfg_.cols, PEState{});
}

void SystolicArray::require_last(std::initializer_list<Phase> allowed, const char* op) const {
    if (!last_.has_value())
        throw std::logic_error(std::string("phase order: ") + op + " before reset");
    for (Phase p : allowed)
        if (*last_ == p) return;
    throw std::logic_error(std::string("phase order violated at ") + op);
}

void SystolicArray::run_reset() {
    const Precision p = cfg_.precision;
    for (PEState& pe : pes_) {
        pe = PEState{};
        pe.stationary = sv_zero(p);
        pe.accum = sv_zero(p);
    }
    for (PEState& pe : pes_) pe.energy_cycles[static_cast<size_t>(PEMode::Sleep)] += 1;
    trace_.push(0, 0, 0, 0);
    phases_.reset += 1;
    tally_.reset_sleep += pes_.size();
    last_ = Phase::Reset;
}

void SystolicArray::run_state_reset() {
    require_last({Phase::Compute}, "state reset");
    for (PEState& pe : pes_) {
        pe.accum = sv_zero(cfg_.precision);
        pe.energy_cycles[static_cast<size_t>(PEMode::Sleep)] += 1;
    }
    trace_.push(0, 0, 0, 0);
    phases_.reset += 1;
    tally_.reset_sleep += pes_.size();
    last_ = Phase::Reset;  // behaves as a reset for ordering purposes
}

void SystolicArray::bill_uniform_cycle(int fr, int fc, bool preload_phase) {
    const uint64_t touched = static_cast<uint64_t>(fr) * fc;
    const uint64_t rest = pes_.size() - touched;
    if (preload_phase) {
        tally_.preload_pass += touched;
        tally_.preload_sleep += rest;
    } else {
        tally_.readout_pass += touched;
        tally_.readout_sleep += rest;
    }
    for (int r = 0; r < cfg_.rows; ++r)
        for (int c = 0; c < cfg_.cols; ++c) {
            const bool in = r < fr && c < fc;
            pes_[idx(r, c)].energy_cycles[static_cast<size_t>(
                in ? PEMode::PassThrough : PEMode::Sleep)] += 1;
        }
}

void SystolicArray::run_preload(const LayoutPlan& plan) {
    require_last({Phase::Reset}, "preload");
    if (plan.rows != cfg_.rows || plan.cols != cfg_.cols)
        throw std::invalid_argument("preload: plan was built for a different array size");
    if (plan.plan_rows > cfg_.rows || plan.plan_cols > cfg_.cols)
        throw std::invalid_argument("preload: plan footprint exceeds array");

    // Column-parallel shift load: the rightmost footprint column's vector is
    // injected first and ripples east one column per cycle.
    for (int cycle = 1; cycle <= plan.plan_cols; ++cycle) {
        for (int c = plan.plan_cols - 1; c >= 0; --c) {
            for (int r = 0; r < plan.plan_rows; ++r) {
                PreloadWord in;
                if (c == 0) {
                    const int src_col = plan.plan_cols - cycle;
                    PEControl ctl{plan.mode_at(r, src_col),
                                  plan.precision == Precision::Complex16, ClockEnable::Load};
                    in.stationary = plan.stationary_at(r, src_col);
                    in.control_word = encode_control(ctl);
                } else {
                    const PEState& west = pes_[idx(r, c - 1)];
                    in.stationary = west.stationary;
                    in.control_word = encode_control(west.control);
                }
                preload_step(pes_[idx(r, c)], in);
            }
        }
        trace_.push(static_cast<uint32_t>(plan.plan_rows), 0, 0, 0);
        bill_uniform_cycle(plan.plan_rows, plan.plan_cols, true);
    }
    // Settle cycle: controls decode, nothing shifts.
    trace_.push(0, 0, 0, 0);
    bill_uniform_cycle(plan.plan_rows, plan.plan_cols, true);
    phases_.preload += plan.plan_cols + 1;

    for (PEState& pe : pes_) pe.control.clock = ClockEnable::Compute;
    last_ = Phase::PreLoad;
}

ComputeResult SystolicArray::run_compute(const LayoutPlan& plan,
                                         std::span<const ScalarValue> tokens) {
    require_last({Phase::PreLoad, Phase::Reset}, "compute");
    if (last_ == Phase::Reset && phases_.preload == 0)
        throw std::logic_error("compute before any preload");

    const int rows = cfg_.rows, cols = cfg_.cols;
    const ScalarValue zero = sv_zero(plan.precision);

    const bool broadcast = plan.inject.kind == InjectSpec::Kind::SsmBroadcast;
    const int64_t stream_len = broadcast ? static_cast<int64_t>(tokens.size())
                                         : static_cast<int64_t>(plan.inject.feeds.size());
    int64_t total_cycles;
    if (broadcast) {
        total_cycles = stream_len == 0 ? 0 : stream_len + plan.fill_latency;
    } else {
        total_cycles = plan.predicted_total;
    }

    ComputeResult res;
    res.cycles = total_cycles;

    // Materialize tap windows; SSM taps stream one word per token.
    std::vector<TapSchedule> taps = plan.collect.taps;
    int64_t out_size = plan.collect.out_size;
    if (plan.collect.count_is_stream_len) {
        for (TapSchedule& t : taps) t.count = stream_len;
        out_size = stream_len * plan.collect.heads;
    }
    res.outputs.assign(static_cast<size_t>(out_size), zero);
    std::vector<int64_t> tap_prev_cycle(taps.size(), -1);
    std::vector<int64_t> tap_collected(taps.size(), 0);

    std::vector<PortsOut> prev(pes_.size(), PortsOut{zero, zero, zero});
    std::vector<PortsOut> next(pes_.size(), PortsOut{zero, zero, zero});
    std::vector<ScalarValue> north_stage(static_cast<size_t>(cols), zero);
    std::vector<ScalarValue> west_stage(static_cast<size_t>(rows), zero);
    std::vector<ScalarValue> diag_stage(static_cast<size_t>(cols), zero);

    for (int64_t cycle = 1; cycle <= total_cycles; ++cycle) {
        uint32_t weight_reads = 0, io_reads = 0, io_writes = 0;
        std::fill(north_stage.begin(), north_stage.end(), zero);
        std::fill(west_stage.begin(), west_stage.end(), zero);
        std::fill(diag_stage.begin(), diag_stage.end(), zero);

        if (broadcast) {
            if (cycle <= stream_len) {
                for (int c : plan.inject.broadcast_cols)
                    diag_stage[static_cast<size_t>(c)] = tokens[static_cast<size_t>(cycle - 1)];
                io_reads += 1;  // one word fanned out across the top row
                res.words_injected += 1;
            }
        } else if (cycle <= stream_len) {
            for (const Feed& f : plan.inject.feeds[static_cast<size_t>(cycle - 1)]) {
                if (f.side == Feed::Side::North)
                    north_stage[static_cast<size_t>(f.index)] = f.value;
                else
                    west_stage[static_cast<size_t>(f.index)] = f.value;
                if (f.weight_port)
                    weight_reads += 1;
                else {
                    io_reads += 1;
                    res.words_injected += 1;
                }
            }
        }

        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                PortsIn in;
                in.north = (r == 0) ? north_stage[static_cast<size_t>(c)]
                                    : prev[idx(r - 1, c)].south;
                in.west = (c == 0) ? west_stage[static_cast<size_t>(r)]
                                   : prev[idx(r, c - 1)].east;
                if (r == 0)
                    in.diag = diag_stage[static_cast<size_t>(c)];
                else if (c == cols - 1)
                    in.diag = zero;
                else
                    in.diag = prev[idx(r - 1, c + 1)].diag;
                next[idx(r, c)] = compute_step(pes_[idx(r, c)], in, cfg_.env);
            }
        }

        for (size_t ti = 0; ti < taps.size(); ++ti) {
            const TapSchedule& t = taps[ti];
            const int64_t k = cycle - t.first_cycle;
            if (k < 0 || k >= t.count) continue;
            res.outputs[static_cast<size_t>(t.dest_base + k * t.dest_stride)] =
                next[idx(t.row, t.col)].south;
            io_writes += 1;
            res.words_collected += 1;
            if (res.first_output_cycle == 0 || cycle < res.first_output_cycle)
                res.first_output_cycle = cycle;
            if (tap_prev_cycle[ti] >= 0 && cycle != tap_prev_cycle[ti] + 1)
                res.outputs_consecutive = false;
            tap_prev_cycle[ti] = cycle;
            tap_collected[ti] += 1;
        }

        trace_.push(weight_reads, 0, io_reads, io_writes);
        std::swap(prev, next);
    }

    for (size_t ti = 0; ti < taps.size(); ++ti)
        if (tap_collected[ti] != taps[ti].count) res.outputs_consecutive = false;

    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const size_t m = static_cast<size_t>(pes_[idx(r, c)].control.mode);
            tally_.compute_modes[m] += static_cast<uint64_t>(total_cycles);
            pes_[idx(r, c)].energy_cycles[m] += static_cast<uint64_t>(total_cycles);
        }

    phases_.compute += total_cycles;
    last_ = Phase::Compute;
    return res;
}

ReadoutResult SystolicArray::run_readout(const LayoutPlan& plan) {
    require_last({Phase::Compute}, "readout");
    ReadoutResult res;
    if (!plan.has_readout_phase) {
        res.streaming_plan_warning = true;
        last_ = Phase::Readout;
        return res;
    }

    const int fr = plan.plan_rows, fc = plan.plan_cols;
    const ScalarValue zero = sv_zero(plan.precision);
    res.values.assign(static_cast<size_t>(fr) * fc, zero);

    for (int cycle = 1; cycle <= fr; ++cycle) {
        const int src_row = fr - cycle;  // original row exiting this cycle
        for (int c = 0; c < fc; ++c)
            res.values[static_cast<size_t>(src_row) * fc + c] =
                pes_[idx(fr - 1, c)].accum;
        // shift the footprint's accumulators one row south
        for (int r = fr - 1; r >= 1; --r)
            for (int c = 0; c < fc; ++c)
                pes_[idx(r, c)].accum = pes_[idx(r - 1, c)].accum;
        for (int c = 0; c < fc; ++c) pes_[idx(0, c)].accum = zero;

        trace_.push(0, 0, 0, static_cast<uint32_t>(fc));
        bill_uniform_cycle(fr, fc, false);
    }
    res.cycles = fr;
    phases_.readout += fr;
    last_ = Phase::Readout;
    return res;
}

uint64_t SystolicArray::total_saturations() const {
    uint64_t n = 0;
    for (const PEState& pe : pes_) n += pe.saturations;
    return n;
}

std::string SystolicArray::snapshot_json() const {
    nlohmann::json grid = nlohmann::json::array();
    for (int r = 0; r < cfg_.rows; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < cfg_.cols; ++c) {
            const PEState& pe = pes_[idx(r, c)];
            char stat[11], acc[11];
            std::snprintf(stat, sizeof stat, "0x%08X", static_cast<uint32_t>(pe.stationary.bits));
            std::snprintf(acc, sizeof acc, "0x%08X", static_cast<uint32_t>(pe.accum.bits));
            row.push_back({{"mode", mode_name(pe.control.mode)},
                           {"stationary", stat},
                           {"accum", acc}});
        }
        grid.push_back(std::move(row));
    }
    nlohmann::json doc{{"rows", cfg_.rows}, {"cols", cfg_.cols}, {"grid", std::move(grid)}};
    return doc.dump(2);
}

}  // namespace epochsim
