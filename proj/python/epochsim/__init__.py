"""Cycle-accurate systolic-array simulator for S4/Liquid-S4 and GEMM workloads.

The heavy lifting lives in the C++ extension; this package re-exports it and
adds a couple of JSON conveniences.
"""

import json as _json

from ._epochsim import (  # noqa: F401
    BORIAKOFF_UTILIZATION,
    __version__,
    baseline_cycles,
    golden_run_layer,
    mode_power_mw,
    plan_json,
    preset,
    preset_names,
    run_config,
    simulate_gemm,
    sram_sizes,
)


def simulate(config, out_dir=None):
    """Run a workload config (dict, JSON string, or preset name).

    Returns the report as a dict.
    """
    if isinstance(config, dict):
        doc = _json.dumps(config)
    elif isinstance(config, str) and config in preset_names():
        doc = preset(config)
    else:
        doc = config
    return _json.loads(run_config(doc, out_dir))
