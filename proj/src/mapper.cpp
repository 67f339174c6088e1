#include "epochsim/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace epochsim {

namespace {

ScalarValue quantize_coeff(Complex z, const ArrayConfig& cfg, const char* what) {
    if (cfg.precision == Precision::Real32 && std::abs(z.imag()) > 1e-12)
        throw std::invalid_argument(std::string("real32 run requires real-valued ") + what);
    return sv_from_complex(z, cfg.env, cfg.precision);
}

struct GridBuilder {
    int rows, cols;
    std::vector<PEMode> modes;
    std::vector<ScalarValue> stationary;

    GridBuilder(int r, int c, Precision p)
        : rows(r), cols(c),
          modes(static_cast<size_t>(r) * c, PEMode::Sleep),
          stationary(static_cast<size_t>(r) * c, sv_zero(p)) {}

    void set(int r, int c, PEMode m, ScalarValue v) {
        modes[static_cast<size_t>(r) * cols + c] = m;
        stationary[static_cast<size_t>(r) * cols + c] = v;
    }
    void set(int r, int c, PEMode m, Precision p) { set(r, c, m, sv_zero(p)); }
};

LayoutPlan plan_ssm(const SsmLayerParams& p, const DiscreteCoeffs& c, const ArrayConfig& cfg,
                    int64_t t_len, PEMode recurrence_mode) {
    validate_params(p);
    validate_config(cfg);
    const int n = p.n, h = p.h;
    const int need_rows = n + h + 1;
    const int need_cols = n + h;
    if (need_rows > cfg.rows || need_cols > cfg.cols) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "S4 layer N=%d H=%d needs a %dx%d array, have %dx%d "
                      "(SSM layers do not tile)",
                      n, h, need_rows, need_cols, cfg.rows, cfg.cols);
        throw CapacityError(msg);
    }

    GridBuilder g(cfg.rows, cfg.cols, cfg.precision);

    for (int j = 0; j < n; ++j) {
        g.set(0, h + j, PEMode::BWS, quantize_coeff(c.bbar[static_cast<size_t>(j)], cfg, "bbar"));
        g.set(1, h + j, recurrence_mode,
              quantize_coeff(c.abar[static_cast<size_t>(j)], cfg, "abar"));
    }

    // Head columns: C[h,j] sits where the state diagonal crosses column hd.
    for (int hd = 0; hd < h; ++hd)
        for (int j = 0; j < n; ++j)
            g.set(1 + h + j - hd, hd, PEMode::BWS,
                  quantize_coeff(p.c[static_cast<size_t>(hd) * n + j], cfg, "C"));

    // Diagonal crossings between the recurrence row and the head columns.
    for (int j = 0; j < n; ++j)
        for (int k = 1; k < h + j + 1; ++k) {
            const int cc = h + j - k;
            if (cc >= h) g.set(1 + k, cc, PEMode::PassThrough, cfg.precision);
        }

    // Carry each head's finished partial down to the footprint edge.
    for (int hd = 1; hd < h; ++hd)
        for (int r = n + h - hd + 1; r <= n + h; ++r)
            g.set(r, hd, PEMode::PassThrough, cfg.precision);

    LayoutPlan plan;
    plan.kind = PlanKind::Ssm;
    plan.rows = cfg.rows;
    plan.cols = cfg.cols;
    plan.plan_rows = need_rows;
    plan.plan_cols = need_cols;
    plan.precision = cfg.precision;
    plan.mode_grid = std::move(g.modes);
    plan.stationary_grid = std::move(g.stationary);

    plan.inject.kind = InjectSpec::Kind::SsmBroadcast;
    for (int j = 0; j < n; ++j) plan.inject.broadcast_cols.push_back(h + j);

    plan.fill_latency = n + h;
    plan.predicted_first_output = n + h + 1;
    plan.predicted_total = t_len + n + h;
    plan.collect.count_is_stream_len = true;
    plan.collect.heads = h;
    plan.collect.out_size = t_len * h;
    for (int hd = 0; hd < h; ++hd)
        plan.collect.taps.push_back(TapSchedule{n + h, hd, plan.predicted_first_output,
                                                t_len, hd, h});
    return plan;
}

}  // namespace

LayoutPlan plan_s4(const SsmLayerParams& p, const DiscreteCoeffs& c, const ArrayConfig& cfg,
                   int64_t t_len) {
    return plan_ssm(p, c, cfg, t_len, PEMode::FRI);
}

LayoutPlan plan_liquid(const SsmLayerParams& p, const DiscreteCoeffs& c, const ArrayConfig& cfg,
                       int64_t t_len) {
    return plan_ssm(p, c, cfg, t_len, PEMode::TRI);
}

std::vector<GemmTilePlan> plan_gemm(const GemmSpec& spec, const ArrayConfig& cfg,
                                    const RealMatrix& a, const RealMatrix& b) {
    validate_config(cfg);
    if (spec.m < 1 || spec.k < 1 || spec.n < 1)
        throw std::invalid_argument("gemm spec: dimensions must be positive");
    if (a.rows != spec.m || a.cols != spec.k || b.rows != spec.k || b.cols != spec.n)
        throw std::invalid_argument("gemm spec: operand shapes do not match");

    // Spatial blocks follow the dataflow's PE assignment; the streamed
    // dimension is blocked by the row count.
    int64_t bm, bk, bn;
    switch (spec.dataflow) {
        case GemmDataflow::OS: bm = cfg.rows; bn = cfg.cols; bk = cfg.rows; break;
        case GemmDataflow::WS: bk = cfg.rows; bn = cfg.cols; bm = cfg.rows; break;
        case GemmDataflow::IS: bk = cfg.rows; bm = cfg.cols; bn = cfg.rows; break;
        default: throw std::invalid_argument("gemm spec: unknown dataflow");
    }

    std::vector<GemmTilePlan> out;
    for (int64_t m0 = 0; m0 < spec.m; m0 += bm)
        for (int64_t n0 = 0; n0 < spec.n; n0 += bn)
            for (int64_t k0 = 0; k0 < spec.k; k0 += bk) {
                GemmTile tile{m0, k0, n0,
                              std::min(bm, spec.m - m0),
                              std::min(bk, spec.k - k0),
                              std::min(bn, spec.n - n0)};
                const int64_t m = tile.m, k = tile.k, n = tile.n;

                LayoutPlan plan;
                plan.rows = cfg.rows;
                plan.cols = cfg.cols;
                plan.precision = cfg.precision;
                plan.predicted_total = m + k + n - 2;
                plan.inject.kind = InjectSpec::Kind::Explicit;
                plan.inject.feeds.resize(static_cast<size_t>(plan.predicted_total));
                GridBuilder g(cfg.rows, cfg.cols, cfg.precision);

                auto feed = [&](int64_t cycle, Feed::Side side, int64_t index, double v,
                                bool weight_port) {
                    plan.inject.feeds[static_cast<size_t>(cycle - 1)].push_back(
                        Feed{side, static_cast<int>(index),
                             sv_from_real(v, cfg.env, cfg.precision), weight_port});
                };

                switch (spec.dataflow) {
                    case GemmDataflow::OS: {
                        plan.kind = PlanKind::GemmOs;
                        plan.plan_rows = static_cast<int>(m);
                        plan.plan_cols = static_cast<int>(n);
                        plan.has_readout_phase = true;
                        for (int64_t i = 0; i < m; ++i)
                            for (int64_t j = 0; j < n; ++j)
                                g.set(static_cast<int>(i), static_cast<int>(j), PEMode::TOS,
                                      cfg.precision);
                        for (int64_t i = 0; i < m; ++i)
                            for (int64_t kk = 0; kk < k; ++kk)
                                feed(i + kk + 1, Feed::Side::West, i,
                                     a.at(m0 + i, k0 + kk), false);
                        for (int64_t j = 0; j < n; ++j)
                            for (int64_t kk = 0; kk < k; ++kk)
                                feed(j + kk + 1, Feed::Side::North, j,
                                     b.at(k0 + kk, n0 + j), true);
                        break;
                    }
                    case GemmDataflow::WS: {
                        plan.kind = PlanKind::GemmWsIs;
                        plan.plan_rows = static_cast<int>(k);
                        plan.plan_cols = static_cast<int>(n);
                        for (int64_t kk = 0; kk < k; ++kk)
                            for (int64_t j = 0; j < n; ++j)
                                g.set(static_cast<int>(kk), static_cast<int>(j), PEMode::WS,
                                      sv_from_real(b.at(k0 + kk, n0 + j), cfg.env,
                                                   cfg.precision));
                        for (int64_t i = 0; i < m; ++i)
                            for (int64_t kk = 0; kk < k; ++kk)
                                feed(i + kk + 1, Feed::Side::West, kk,
                                     a.at(m0 + i, k0 + kk), false);
                        plan.collect.out_size = m * n;
                        for (int64_t j = 0; j < n; ++j)
                            plan.collect.taps.push_back(
                                TapSchedule{static_cast<int>(k - 1), static_cast<int>(j),
                                            k + j, m, j, n});
                        plan.predicted_first_output = k;
                        break;
                    }
                    case GemmDataflow::IS: {
                        plan.kind = PlanKind::GemmWsIs;
                        plan.plan_rows = static_cast<int>(k);
                        plan.plan_cols = static_cast<int>(m);
                        for (int64_t kk = 0; kk < k; ++kk)
                            for (int64_t i = 0; i < m; ++i)
                                g.set(static_cast<int>(kk), static_cast<int>(i), PEMode::IS,
                                      sv_from_real(a.at(m0 + i, k0 + kk), cfg.env,
                                                   cfg.precision));
                        for (int64_t j = 0; j < n; ++j)
                            for (int64_t kk = 0; kk < k; ++kk)
                                feed(j + kk + 1, Feed::Side::West, kk,
                                     b.at(k0 + kk, n0 + j), false);
                        plan.collect.out_size = m * n;
                        for (int64_t i = 0; i < m; ++i)
                            plan.collect.taps.push_back(
                                TapSchedule{static_cast<int>(k - 1), static_cast<int>(i),
                                            k + i, n, i * n, 1});
                        plan.predicted_first_output = k;
                        break;
                    }
                }

                plan.mode_grid = std::move(g.modes);
                plan.stationary_grid = std::move(g.stationary);
                out.push_back(GemmTilePlan{tile, std::move(plan)});
            }
    return out;
}

namespace {

// Which ports a mode consumes / produces, for the reachability check.
struct PortUse {
    bool in_n, in_w, in_d;
    bool out_s, out_e, out_d;
};

PortUse port_use(PEMode m) {
    switch (m) {
        case PEMode::FRI:
        case PEMode::TRI: return {true, false, false, false, false, true};
        case PEMode::BWS: return {true, false, true, true, false, true};
        case PEMode::TOS: return {true, true, false, true, true, false};
        case PEMode::WS:
        case PEMode::IS: return {true, true, false, true, true, false};
        case PEMode::PassThrough: return {true, true, true, true, true, true};
        case PEMode::Sleep: return {false, false, false, false, false, false};
    }
    return {};
}

}  // namespace

std::vector<PlanViolation> validate_plan(const LayoutPlan& plan, const ArrayConfig& cfg) {
    std::vector<PlanViolation> out;
    const int rows = plan.rows, cols = plan.cols;

    if (rows != cfg.rows || cols != cfg.cols || plan.plan_rows > rows || plan.plan_cols > cols ||
        plan.plan_rows < 0 || plan.plan_cols < 0) {
        out.push_back({"dimension", "plan dimensions do not fit the array"});
        return out;
    }
    if (plan.mode_grid.size() != static_cast<size_t>(rows) * cols ||
        plan.stationary_grid.size() != plan.mode_grid.size()) {
        out.push_back({"dimension", "mode/stationary grids are not array-sized"});
        return out;
    }

    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (plan.mode_at(r, c) == PEMode::Sleep && plan.stationary_at(r, c).bits != 0) {
                char msg[64];
                std::snprintf(msg, sizeof msg, "sleeping PE (%d,%d) holds a nonzero value", r, c);
                out.push_back({"stationary", msg});
            }

    // Forward pass: which PEs see injector-driven data.
    std::vector<uint8_t> fed(plan.mode_grid.size(), 0);
    auto at = [&](int r, int c) -> size_t { return static_cast<size_t>(r) * cols + c; };

    std::vector<std::pair<int, int>> seeds;
    if (plan.inject.kind == InjectSpec::Kind::SsmBroadcast) {
        for (int c : plan.inject.broadcast_cols)
            if (port_use(plan.mode_at(0, c)).in_d) seeds.push_back({0, c});
    } else {
        for (const auto& cyc : plan.inject.feeds)
            for (const Feed& f : cyc) {
                const int r = (f.side == Feed::Side::North) ? 0 : f.index;
                const int c = (f.side == Feed::Side::North) ? f.index : 0;
                const PortUse u = port_use(plan.mode_at(r, c));
                if ((f.side == Feed::Side::North && u.in_n) ||
                    (f.side == Feed::Side::West && u.in_w))
                    seeds.push_back({r, c});
            }
    }
    std::vector<std::pair<int, int>> work = seeds;
    for (auto& s : work) fed[at(s.first, s.second)] = 1;
    while (!work.empty()) {
        auto [r, c] = work.back();
        work.pop_back();
        const PortUse u = port_use(plan.mode_at(r, c));
        auto push = [&](int rr, int cc, bool consumed) {
            if (rr < 0 || rr >= rows || cc < 0 || cc >= cols || !consumed) return;
            if (!fed[at(rr, cc)]) {
                fed[at(rr, cc)] = 1;
                work.push_back({rr, cc});
            }
        };
        if (u.out_s && r + 1 < rows) push(r + 1, c, port_use(plan.mode_at(r + 1, c)).in_n);
        if (u.out_e && c + 1 < cols) push(r, c + 1, port_use(plan.mode_at(r, c + 1)).in_w);
        if (u.out_d && r + 1 < rows && c - 1 >= 0)
            push(r + 1, c - 1, port_use(plan.mode_at(r + 1, c - 1)).in_d);
    }

    // Backward pass: which PEs can influence a collector.
    std::vector<uint8_t> reaches(plan.mode_grid.size(), 0);
    std::vector<std::pair<int, int>> rwork;
    for (const TapSchedule& t : plan.collect.taps)
        if (port_use(plan.mode_at(t.row, t.col)).out_s) {
            reaches[at(t.row, t.col)] = 1;
            rwork.push_back({t.row, t.col});
        }
    if (plan.has_readout_phase)
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                if (plan.mode_at(r, c) == PEMode::TOS && !reaches[at(r, c)]) {
                    reaches[at(r, c)] = 1;
                    rwork.push_back({r, c});
                }
    while (!rwork.empty()) {
        auto [r, c] = rwork.back();
        rwork.pop_back();
        const PortUse u = port_use(plan.mode_at(r, c));
        auto pull = [&](int rr, int cc, bool produced_toward_us) {
            if (rr < 0 || rr >= rows || cc < 0 || cc >= cols || !produced_toward_us) return;
            if (!reaches[at(rr, cc)]) {
                reaches[at(rr, cc)] = 1;
                rwork.push_back({rr, cc});
            }
        };
        if (u.in_n && r - 1 >= 0) pull(r - 1, c, port_use(plan.mode_at(r - 1, c)).out_s);
        if (u.in_w && c - 1 >= 0) pull(r, c - 1, port_use(plan.mode_at(r, c - 1)).out_e);
        if (u.in_d && r - 1 >= 0 && c + 1 < cols)
            pull(r - 1, c + 1, port_use(plan.mode_at(r - 1, c + 1)).out_d);
    }

    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (plan.mode_at(r, c) == PEMode::Sleep) continue;
            if (!fed[at(r, c)] || !reaches[at(r, c)]) {
                char msg[96];
                std::snprintf(msg, sizeof msg, "%s PE (%d,%d) is %s", mode_name(plan.mode_at(r, c)),
                              r, c, !fed[at(r, c)] ? "not reachable from any injector"
                                                   : "unable to reach any collector");
                out.push_back({"reachability", msg});
            }
        }
    return out;
}

std::string plan_to_json(const LayoutPlan& plan) {
    nlohmann::json j;
    j["kind"] = plan.kind == PlanKind::Ssm ? "ssm"
              : plan.kind == PlanKind::GemmOs ? "gemm_os" : "gemm_ws_is";
    j["rows"] = plan.rows;
    j["cols"] = plan.cols;
    j["plan_rows"] = plan.plan_rows;
    j["plan_cols"] = plan.plan_cols;
    j["precision"] = precision_name(plan.precision);
    j["predicted_first_output"] = plan.predicted_first_output;
    j["predicted_total"] = plan.predicted_total;

    nlohmann::json modes = nlohmann::json::array();
    nlohmann::json stat = nlohmann::json::array();
    for (int r = 0; r < plan.rows; ++r) {
        nlohmann::json mrow = nlohmann::json::array();
        nlohmann::json srow = nlohmann::json::array();
        for (int c = 0; c < plan.cols; ++c) {
            mrow.push_back(mode_name(plan.mode_at(r, c)));
            char buf[11];
            std::snprintf(buf, sizeof buf, "0x%08X",
                          static_cast<uint32_t>(plan.stationary_at(r, c).bits));
            srow.push_back(buf);
        }
        modes.push_back(std::move(mrow));
        stat.push_back(std::move(srow));
    }
    j["mode_grid"] = std::move(modes);
    j["stationary_grid"] = std::move(stat);

    nlohmann::json taps = nlohmann::json::array();
    for (const TapSchedule& t : plan.collect.taps)
        taps.push_back({{"row", t.row}, {"col", t.col}, {"first_cycle", t.first_cycle},
                        {"count", t.count}});
    j["readout_taps"] = std::move(taps);
    if (plan.inject.kind == InjectSpec::Kind::SsmBroadcast)
        j["inject"] = {{"kind", "broadcast"}, {"cols", plan.inject.broadcast_cols}};
    else
        j["inject"] = {{"kind", "explicit"},
                       {"cycles", static_cast<int64_t>(plan.inject.feeds.size())}};
    return j.dump(2);
}

}  // namespace epochsim
