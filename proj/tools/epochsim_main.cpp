// epochsim command line: declare a workload in JSON (or name a preset), run
// the simulator against the golden model, and emit reports.
//
// Exit codes: 0 ok, 2 config error, 3 oracle tolerance exceeded,
// 4 array capacity error, 1 anything else.

#include <cstdlib>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "epochsim/workbench.hpp"

namespace {

using namespace epochsim;

struct CommonOpts {
    std::string config;
    std::string out_dir = ".";
    std::optional<double> tolerance;
    std::optional<uint64_t> seed;
    int threads = 0;
    bool snapshot = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_threads) {
    cmd->add_option("--config", o.config, "config file path or preset name")->required();
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--tolerance", o.tolerance, "override oracle tolerance");
    cmd->add_option("--seed", o.seed, "override RNG seed");
    if (with_threads)
        cmd->add_option("--threads", o.threads, "worker threads for sweep points")
            ->envname("EPOCHSIM_THREADS");
}

WorkloadConfig load_with_overrides(const CommonOpts& o) {
    nlohmann::json doc = load_config_doc(o.config);
    if (o.seed) doc["seed"] = *o.seed;
    if (o.tolerance) doc["tolerance"] = *o.tolerance;
    return parse_config(doc);
}

int do_simulate(const CommonOpts& o) {
    const WorkloadConfig cfg = load_with_overrides(o);

    if (o.snapshot) {
        for (const WorkloadLayer& wl : cfg.layers) {
            const auto* ssm = std::get_if<SsmLayerDesc>(&wl.desc);
            if (!ssm) continue;
            const DiscreteCoeffs coeffs = discretize(ssm->params);
            const LayoutPlan plan = ssm->variant == SsmVariant::S4
                                        ? plan_s4(ssm->params, coeffs, cfg.array, cfg.t)
                                        : plan_liquid(ssm->params, coeffs, cfg.array, cfg.t);
            SystolicArray array(cfg.array);
            array.run_reset();
            array.run_preload(plan);
            write_text_file(o.out_dir + "/snapshot.json", array.snapshot_json() + "\n");
            break;
        }
    }

    const WorkloadResult res = run_workload(cfg);

    write_text_file(o.out_dir + "/report.json", res.report.dump(2) + "\n");
    write_text_file(o.out_dir + "/trace.csv", trace_csv(res.trace));
    write_text_file(o.out_dir + "/outputs.csv", outputs_csv(res));
    {
        const auto bw = bandwidth_summary(res.trace, cfg.array, cfg.bandwidth_window);
        std::ostringstream csv;
        csv << "cycle,weight_read_wpns,weight_write_wpns,io_read_wpns,io_write_wpns\r\n";
        for (const BandwidthPoint& p : bw)
            csv << p.cycle << ',' << p.weight_read_words_per_ns << ','
                << p.weight_write_words_per_ns << ',' << p.io_read_words_per_ns << ','
                << p.io_write_words_per_ns << "\r\n";
        write_text_file(o.out_dir + "/bandwidth.csv", csv.str());
    }

    std::cout << cfg.name << ": compute cycles "
              << res.report["phases"]["compute"].get<int64_t>() << ", first output at cycle "
              << res.first_output_cycle << ", energy "
              << res.report["energy"]["total_nj"].get<double>() << " nJ, max |err| "
              << res.max_abs_error << " (tolerance " << cfg.tolerance << "), saturations "
              << res.saturations << "\n";
    if (!res.within_tolerance) {
        std::cerr << "oracle tolerance exceeded: max |err| = " << res.max_abs_error << " at "
                  << res.error_location << "\n";
        return 3;
    }
    return 0;
}

int do_sweep(const CommonOpts& o) {
    const WorkloadConfig cfg = load_with_overrides(o);
    const int threads = o.threads > 0 ? o.threads : 4;
    const std::vector<SweepRow> rows = run_sweep(cfg, threads);
    write_text_file(o.out_dir + "/sweep.csv", sweep_csv(rows));
    size_t failed = 0;
    for (const SweepRow& r : rows)
        if (!r.ok) ++failed;
    std::cout << "sweep: " << rows.size() << " points, " << failed << " failed -> " << o.out_dir
              << "/sweep.csv\n";
    return 0;
}

int do_compare(const CommonOpts& o) {
    const WorkloadConfig cfg = load_with_overrides(o);
    const CompareResult cr = run_compare(cfg);
    write_text_file(o.out_dir + "/compare.csv", compare_csv(cr));
    std::cout << "compare: baseline/epoch cycle ratio "
              << cr.row["cycle_ratio"].get<double>() << ", energy ratio "
              << cr.row["energy_ratio"].get<double>() << " -> " << o.out_dir
              << "/compare.csv\n";
    return 0;
}

int do_validate(const CommonOpts& o) {
    const WorkloadConfig cfg = load_with_overrides(o);
    const SsmLayerDesc* ssm = nullptr;
    for (const WorkloadLayer& wl : cfg.layers)
        if ((ssm = std::get_if<SsmLayerDesc>(&wl.desc))) break;
    if (!ssm) throw ConfigError("config: validate needs at least one SSM layer");

    const DiscreteCoeffs coeffs = discretize(ssm->params);
    const LayoutPlan plan = ssm->variant == SsmVariant::S4
                                ? plan_s4(ssm->params, coeffs, cfg.array, cfg.t)
                                : plan_liquid(ssm->params, coeffs, cfg.array, cfg.t);
    const std::vector<PlanViolation> violations = validate_plan(plan, cfg.array);
    write_text_file(o.out_dir + "/plan.json", plan_to_json(plan) + "\n");
    if (violations.empty()) {
        std::cout << "plan ok: " << plan.plan_rows << "x" << plan.plan_cols << " footprint on "
                  << cfg.array.rows << "x" << cfg.array.cols << " array -> " << o.out_dir
                  << "/plan.json\n";
        return 0;
    }
    for (const PlanViolation& v : violations)
        std::cerr << "violation [" << v.code << "] " << v.detail << "\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cycle-accurate systolic-array simulator for S4/Liquid-S4 and GEMM workloads"};
    app.require_subcommand(1);

    CommonOpts sim_o, sweep_o, cmp_o, val_o;
    CLI::App* sim = app.add_subcommand("simulate", "run one workload against the golden model");
    add_common(sim, sim_o, false);
    sim->add_flag("--snapshot", sim_o.snapshot, "dump the post-preload array snapshot");
    CLI::App* sweep = app.add_subcommand("sweep", "run a parameter grid");
    add_common(sweep, sweep_o, true);
    CLI::App* cmp = app.add_subcommand("compare", "compare against the baseline SA model");
    add_common(cmp, cmp_o, false);
    CLI::App* val = app.add_subcommand("validate", "validate the config and its layout plan");
    add_common(val, val_o, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return do_simulate(sim_o);
        if (sweep->parsed()) return do_sweep(sweep_o);
        if (cmp->parsed()) return do_compare(cmp_o);
        if (val->parsed()) return do_validate(val_o);
    } catch (const epochsim::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const epochsim::CapacityError& e) {
        std::cerr << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
