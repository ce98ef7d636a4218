"""Plot-ready tables derived from a finished run directory.

fig3_headway_cdf.csv       vehicle_id, headway_m, cdf
fig4_state_count_cdf.csv   quantity (in_range | los | olos), count, cdf
fig5_interval_cdf.csv      state (LOS | OLOS), interval_m, cdf
fig5_distance_cdf.csv      state (LOS | OLOS), distance_m, cdf  (per-vehicle totals)
fig6_intensity_cdf.csv     quantity (P | p), intensity_per_m, cdf
fig7_los_probability.csv   bin_center_m, pr_los, pr_olos, n_samples
fig8_rx_power.csv          d_m, then mean received power in dBm per model
fig9_prp.csv               d_m, then packet reception probability per model
lane_timeline.csv          tick_s, vehicle_id, lane  (tracked vehicles)
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import outputs as io
from .statistics import empirical_cdf


def _cdf_rows(label, samples):
    samples = np.asarray(samples, dtype=float)
    samples = samples[np.isfinite(samples)]
    if samples.size == 0:
        return []
    x, F = empirical_cdf(samples).steps()
    return [(label, a, b) for a, b in zip(x, F)]


def _wide(d, names, values):
    return [(d[k], *[values[n][k] for n in names]) for k in range(len(d))]


def write_figures(out_dir) -> list[Path]:
    """Write every figure table into ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    written = []

    hw = io.read_columns(out / io.HEADWAYS)
    rows = []
    for vid in np.unique(hw["vehicle_id"]).astype(int):
        sel = hw["vehicle_id"] == vid
        rows += _cdf_rows(vid, hw["headway_m"][sel])
    written.append(io.write_table(out / "fig3_headway_cdf.csv", ["vehicle_id", "headway_m", "cdf"], rows))
    rows = zip(hw["tick_s"].astype(int), hw["vehicle_id"].astype(int), hw["lane"].astype(int))
    written.append(io.write_table(out / "lane_timeline.csv", ["tick_s", "vehicle_id", "lane"], rows))

    sc = io.read_columns(out / io.STATE_COUNTS)
    rows = []
    for key, col in (("in_range", "n_in_range"), ("los", "n_los"), ("olos", "n_olos")):
        rows += [(k, int(a), b) for k, a, b in _cdf_rows(key, sc[col])]
    written.append(io.write_table(out / "fig4_state_count_cdf.csv", ["quantity", "count", "cdf"], rows))

    iv = io.read_columns(out / io.INTERVALS)
    rows = []
    for state in ("LOS", "OLOS"):
        rows += _cdf_rows(state, iv["length_m"][iv["state"] == state])
    written.append(io.write_table(out / "fig5_interval_cdf.csv", ["state", "interval_m", "cdf"], rows))

    header, raw = io.read_table(out / io.INTENSITIES)
    raw = [r for r in raw if r[0] != "mean"]
    col = {name: np.array([float(r[j]) for r in raw]) for j, name in enumerate(header)}
    rows = _cdf_rows("LOS", col["d_los_m"]) + _cdf_rows("OLOS", col["d_olos_m"])
    written.append(io.write_table(out / "fig5_distance_cdf.csv", ["state", "distance_m", "cdf"], rows))
    rows = _cdf_rows("P", col["P_per_m"]) + _cdf_rows("p", col["p_per_m"])
    written.append(
        io.write_table(out / "fig6_intensity_cdf.csv", ["quantity", "intensity_per_m", "cdf"], rows)
    )

    pr = io.read_columns(out / io.PROFILE)
    n = (pr["n_los"] + pr["n_olos"]).astype(int)
    rows = zip(pr["bin_center_m"], pr["pr_los"], pr["pr_olos"], n)
    written.append(
        io.write_table(
            out / "fig7_los_probability.csv",
            ["bin_center_m", "pr_los", "pr_olos", "n_samples"],
            rows,
        )
    )

    if _channel_expected(out):
        ch = io.read_columns(out / io.CHANNEL)
        names = list(dict.fromkeys(ch["model_name"]))
        d = None
        power, prp = {}, {}
        for name in names:
            sel = ch["model_name"] == name
            d = ch["d_m"][sel] if d is None else d
            power[name] = ch["mean_rx_dbm"][sel]
            prp[name] = ch["prp"][sel]
        with_power = [m for m in names if np.isfinite(power[m]).any()]
        written.append(
            io.write_table(
                out / "fig8_rx_power.csv",
                ["d_m"] + [f"{m} [dBm]" for m in with_power],
                _wide(d, with_power, power),
            )
        )
        written.append(io.write_table(out / "fig9_prp.csv", ["d_m"] + names, _wide(d, names, prp)))
    return written


def _channel_expected(out: Path) -> bool:
    manifest = out / io.MANIFEST
    if manifest.exists():
        return json.loads(manifest.read_text()).get("channel") is not None
    return (out / io.CHANNEL).exists()
