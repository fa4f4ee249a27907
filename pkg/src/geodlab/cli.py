"""Command-line driver for the counting experiments.

Each subcommand validates its configuration, runs the owning module, and
prints (or writes) one CountReport: a parameter echo, a semicolon table
whose rows carry their own tolerance and pass/fail, and derived scalars.
Bodies are byte-identical across runs with the same config and seed;
only '#' footer lines vary.  Exit codes: 0 ok, 2 usage or config error,
3 a tolerance failed when --check was given.

Randomness is philox-4x64 keyed by the master seed; work item i draws
from the stream jumped(i), so worker count never changes results, only
how items are partitioned.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from .config import EXPERIMENTS, ConfigError, ExperimentConfig, build_config
from .flow import (Box, closing_constants, margulis_count, mixing_correlation,
                   recurrence_fraction)
from .halfplane import ModelPoint
from .lattice import orbit_count, spread_count
from .report import CountReport, fmt_value, ls_slope
from .walk import build_row_net, count_trajectories
from .words import count_classes, enumerate_classes, min_systole_batch
from .products import verify_contraction

RNG_NAME = "philox-4x64 jumped per work item"
GROWTH = 2.0  # e^{2R} class growth in the model


def worker_stream(seed: int, item: int):
    """Independent generator for one work item under the master seed."""
    return np.random.Generator(np.random.Philox(key=seed).jumped(item))


def _ok(flag: bool) -> str:
    return "yes" if flag else "no"


# ---------------------------------------------------------------------------
# Telescoping assembly: band counts into a total and its target ratio.


@dataclass(frozen=True)
class AssemblyResult:
    radius: float
    total: float
    ratio: float  # total / (e^{2R} / (2R))


def telescoping_assembly(bands) -> AssemblyResult:
    """Assemble counts over a band partition of (0, R] into one total.

    Bands are (lo, hi, count) with consecutive bands sharing endpoints;
    overlaps and gaps are validation errors.  Pure arithmetic.
    """
    bands = sorted((float(a), float(b), float(c)) for a, b, c in bands)
    if not bands:
        raise ConfigError("no bands given")
    for lo, hi, _ in bands:
        if hi <= lo:
            raise ConfigError(f"band ({lo}, {hi}] is empty or inverted")
    if abs(bands[0][0]) > 1e-9:
        raise ConfigError(f"first band starts at {bands[0][0]}, not 0")
    for (_, hi_a, _), (lo_b, hi_b, _) in zip(bands, bands[1:]):
        if lo_b < hi_a - 1e-9:
            raise ConfigError(f"bands overlap at {lo_b} < {hi_a}")
        if lo_b > hi_a + 1e-9:
            raise ConfigError(f"bands leave a gap between {hi_a} and {lo_b}")
    radius = bands[-1][1]
    total = sum(c for _, _, c in bands)
    ratio = total / (math.exp(GROWTH * radius) / (GROWTH * radius))
    return AssemblyResult(radius=radius, total=total, ratio=ratio)


# ---------------------------------------------------------------------------
# Experiment runners.  Each returns a CountReport.


def _echo(config: ExperimentConfig) -> dict:
    out = {"experiment": config.experiment, "seed": config.seed,
           "workers": config.workers, "rng": RNG_NAME}
    for k, v in config.params.items():
        out[k] = ", ".join(fmt_value(x) for x in v) if isinstance(v, tuple) \
            else v
    return out


def run_count(config: ExperimentConfig) -> CountReport:
    rows = []
    ratios = []
    for r in config.params["r_grid"]:
        n = count_classes(r)
        ratio = n * GROWTH * r / math.exp(GROWTH * r)
        ratios.append(ratio)
        rows.append((r, n, ratio, "0.55..1.45", _ok(0.55 <= ratio <= 1.45)))
    derived = {
        "gap_first": abs(ratios[0] - 1.0),
        "gap_last": abs(ratios[-1] - 1.0),
        "trend_ok": _ok(abs(ratios[-1] - 1.0) <= abs(ratios[0] - 1.0)),
    }
    return CountReport(
        title="closed-class counts against e^{2R}/(2R)",
        params=_echo(config),
        columns=("radius", "classes", "ratio", "bound", "ok"),
        rows=rows, derived=derived)


def run_thin(config: ExperimentConfig) -> CountReport:
    p = config.params
    tau, steps, y0 = p["tau"], p["steps"], p["base_height"]
    base = ModelPoint(0.0, y0)
    net = build_row_net(y0, base, tau * steps)
    deltas = sorted(p["delta_grid"], reverse=True)
    rows = []
    slopes = []
    fit_lo, fit_hi = 3.0 - 1e-9, 6.0 + 1e-9  # exponent fit window
    for delta in deltas:
        fam = count_trajectories(net, base, tau, steps, thin_delta=delta,
                                 keep_steps=True)
        counts = [fam.almost_closed(p["tolerance"], step=k)
                  for k in range(2, steps + 1)]
        radii = [tau * k for k in range(2, steps + 1)]
        for r, c in zip(radii, counts):
            rows.append((delta, r, c, "none", "yes"))
        fit = [(r, c) for r, c in zip(radii, counts) if fit_lo <= r <= fit_hi]
        if len(fit) < 2:
            fit = list(zip(radii, counts))
        if all(c > 0 for _, c in fit):
            slope = ls_slope([r for r, _ in fit],
                             np.log([c for _, c in fit]))[0]
        else:
            slope = math.nan
        slopes.append(slope)
    derived = {}
    for d, s in zip(deltas, slopes):
        derived[f"slope_delta_{fmt_value(d)}"] = s
    mono = all(a >= b - 1e-12 for a, b in zip(slopes, slopes[1:]))
    derived["slopes_nonincreasing_listed_order"] = _ok(mono)
    derived["smallest_delta_slope_in_0.7..1.6"] = _ok(0.7 <= slopes[-1] <= 1.6)
    return CountReport(
        title="thin almost-closed trajectory counts",
        params=_echo(config),
        columns=("delta", "radius", "almost_closed", "bound", "ok"),
        rows=rows, derived=derived)


def run_bias_verify(config: ExperimentConfig) -> CountReport:
    p = config.params
    j, taus, n = p["factors"], p["tau_grid"], p["samples"]
    rows = []
    ests = []
    for i, tau in enumerate(taus):
        chk = verify_contraction(j, tau, n, worker_stream(config.seed, i))
        ests.append(chk.estimate)
        z = (chk.estimate - chk.exact) / chk.sigma if chk.sigma > 0 else 0.0
        # the statistic is heavy-tailed at large tau, so per-row stderr
        # understates the error; rows are informational, the slope is checked
        rows.append((tau, chk.estimate, chk.exact, chk.sigma, z,
                     "none", "yes"))
    detrended = np.log(ests) - j * np.log(taus)
    slope = ls_slope(taus, detrended)[0]
    derived = {
        "detrended_slope": slope,
        "target": -float(j),
        "slope_ok": _ok(abs(slope + j) <= 0.35),
    }
    return CountReport(
        title=f"ball-average contraction, {j} factor(s)",
        params=_echo(config),
        columns=("tau", "estimate", "exact", "stderr", "z", "bound", "ok"),
        rows=rows, derived=derived)


def run_walk(config: ExperimentConfig) -> CountReport:
    p = config.params
    tau, steps, delta = p["tau"], p["steps"], p["delta"]
    base = ModelPoint(0.0, 1.0)
    net = build_row_net(1.0 / delta, base, tau * steps)
    fam_all = count_trajectories(net, base, tau, steps)
    fam_thin = count_trajectories(net, base, tau, steps, thin_delta=delta)
    radii = [tau * (k + 1) for k in range(steps)]
    rows = [(r, a, t, "none", "yes")
            for r, a, t in zip(radii, fam_all.per_step, fam_thin.per_step)]
    exp_all = ls_slope(radii, np.log(fam_all.per_step))[0]
    derived = {
        "exponent_all": exp_all,
        "exponent_all_ok": _ok(exp_all <= GROWTH + 0.3),
    }
    if all(c > 0 for c in fam_thin.per_step):
        exp_thin = ls_slope(radii, np.log(fam_thin.per_step))[0]
        derived["exponent_thin"] = exp_thin
        derived["exponent_thin_ok"] = _ok(exp_thin <= GROWTH - 1.0 + 0.5)
    return CountReport(
        title="step-bounded trajectory growth",
        params=_echo(config),
        columns=("radius", "trajectories", "thin_trajectories", "bound", "ok"),
        rows=rows, derived=derived)


def _measure_box(fraction: float) -> Box:
    return Box.with_measure(ModelPoint(0.0, 1.5), 0.15, math.pi / 2.0, fraction)


def run_mix(config: ExperimentConfig) -> CountReport:
    p = config.params
    box = _measure_box(p["fraction"])
    est = mixing_correlation(box, p["time"], p["samples"],
                             worker_stream(config.seed, 0))
    rows = [(p["time"], est.estimate, est.target, est.std_error,
             "|estimate-target| <= 3 stderr",
             _ok(abs(est.diff) <= 3.0 * est.std_error))]
    derived = {"z_score": est.z_score}
    return CountReport(
        title="flow correlation against the product of measures",
        params=_echo(config),
        columns=("time", "estimate", "target", "stderr", "bound", "ok"),
        rows=rows, derived=derived)


def run_close(config: ExperimentConfig) -> CountReport:
    p = config.params
    box = _measure_box(p["fraction"])
    grid = p["r_grid"]
    rows = []
    ratios = []
    frac3s = []
    for i, r in enumerate(grid):
        n = int(round(p["samples"] * math.exp(GROWTH * (r - grid[0]))))
        census = margulis_count(box, r, n, worker_stream(config.seed, i))
        c1, eps = closing_constants(box, r)
        len_ok = census.worst_length_gap <= 2.0 * c1
        axis_ok = 2.0 * census.worst_axis_dist <= eps
        ratio = census.count_ratio
        ratios.append(ratio)
        frac3s.append(census.frac_within(3.0))
        rows.append((r, census.events, census.component_count, ratio,
                     census.worst_length_gap, 2.0 * c1,
                     census.worst_axis_dist, 0.5 * eps,
                     _ok(len_ok and axis_ok and 0.5 <= ratio <= 2.0
                         and census.nonhyperbolic_events == 0)))
    derived = {
        "ratio_trend_ok": _ok(abs(ratios[-1] - 1.0) <= abs(ratios[0] - 1.0)),
        "min_measure_within_3x": min(frac3s),
        "measure_within_3x_ok": _ok(min(frac3s) >= 0.8),
    }
    return CountReport(
        title="closed-orbit census from flow recurrence",
        params=_echo(config),
        columns=("time", "events", "components", "count_ratio",
                 "worst_length_gap", "length_bound",
                 "worst_axis_distance", "axis_bound", "ok"),
        rows=rows, derived=derived)


def run_lattice(config: ExperimentConfig) -> CountReport:
    p = config.params
    CELL_BOUND = 1.7702
    rows = []
    cells = {}
    for sy in p["systole_grid"]:
        depth = ModelPoint(0.0, 1.0 / sy)
        gsq = 1.0 / sy  # G(Y)^2 for systole sy
        for tau in p["tau_grid"]:
            cnt = orbit_count(depth, depth, tau)
            cell = cnt / (math.exp(GROWTH * tau) * gsq)
            cells[(sy, tau)] = cnt
            rows.append(("orbit_cell_ratio", sy, tau, cell,
                         f"<= {CELL_BOUND}", _ok(cell <= CELL_BOUND)))
    t0 = p["tau_grid"][0]
    thin_sy, thick_sy = p["systole_grid"][0], p["systole_grid"][-1]
    growth = cells[(thin_sy, t0)] / cells[(thick_sy, t0)]
    rows.append(("thick_to_thin_growth", thin_sy, t0, growth, ">= 5",
                 _ok(growth >= 5.0)))
    for sy in p["systole_grid"]:
        depth = ModelPoint(0.0, 1.0 / sy)
        sc = spread_count(depth, p["spread_radius"])
        ratio = sc * sy  # count / G^2
        rows.append(("spread_ratio", sy, p["spread_radius"], ratio,
                     ">= 0.25", _ok(ratio >= 0.25)))
    return CountReport(
        title="orbit points in balls around thin centers",
        params=_echo(config),
        columns=("quantity", "systole", "tau", "value", "bound", "ok"),
        rows=rows, derived={})


def run_veech(config: ExperimentConfig) -> CountReport:
    p = config.params
    classes = enumerate_classes(p["max_length"])
    mins = min_systole_batch(classes, step=p["step"])
    lengths = np.array([c.length for c in classes])
    slope = ls_slope(lengths, np.log(mins))[0]
    eps0 = float(np.min(mins * np.exp(GROWTH * lengths)))
    floor = eps0 * np.exp(-GROWTH * lengths) * (1.0 - 1e-9)
    violations = int(np.sum(mins < floor))
    rows = []
    for bin_end in range(1, math.ceil(p["max_length"]) + 1):
        sel = (lengths > bin_end - 1) & (lengths <= bin_end)
        if not sel.any():
            continue
        rows.append((bin_end, int(sel.sum()), float(mins[sel].min()),
                     "none", "yes"))
    derived = {
        "classes": len(classes),
        "slope": slope,
        "slope_ok": _ok(slope >= -(GROWTH + 0.3)),
        "fitted_floor_constant": eps0,
        "floor_violations": violations,
        "floor_ok": _ok(violations == 0),
    }
    return CountReport(
        title="smallest axis systole against class length",
        params=_echo(config),
        columns=("length_bin_end", "classes", "min_axis_systole", "bound", "ok"),
        rows=rows, derived=derived)


def run_recurrence(config: ExperimentConfig) -> CountReport:
    p = config.params
    res = recurrence_fraction(p["samples"], p["horizon"], p["delta"],
                              p["theta"], worker_stream(config.seed, 0))
    rows = [(r + 1, f, "none", "yes") for r, f in enumerate(res.fractions)]
    expo = res.decay_exponent
    derived = {
        "decay_exponent": expo,
        "below_growth_rate_ok": _ok(not math.isnan(expo) and expo < GROWTH),
    }
    return CountReport(
        title="fraction of flow segments mostly in the thin part",
        params=_echo(config),
        columns=("horizon", "flagged_fraction", "bound", "ok"),
        rows=rows, derived=derived)


def run_assemble(config: ExperimentConfig) -> CountReport:
    p = config.params
    r, nb = p["r"], p["bands"]
    classes = enumerate_classes(r)
    lengths = [c.length for c in classes]
    edges = [r * k / nb for k in range(nb + 1)]
    bands = []
    rows = []
    for lo, hi in zip(edges, edges[1:]):
        cnt = sum(1 for v in lengths if lo < v <= hi)
        bands.append((lo, hi, cnt))
        rows.append((lo, hi, cnt, "none", "yes"))
    asm = telescoping_assembly(bands)
    direct = count_classes(r)
    derived = {
        "assembled_total": asm.total,
        "direct_total": direct,
        "exact_match_ok": _ok(asm.total == direct),
        "ratio": asm.ratio,
        "ratio_ok": _ok(0.55 <= asm.ratio <= 1.45),
    }
    return CountReport(
        title="band counts reassembled into the full total",
        params=_echo(config),
        columns=("band_lo", "band_hi", "classes", "bound", "ok"),
        rows=rows, derived=derived)


RUNNERS = {
    "count": run_count,
    "thin": run_thin,
    "bias-verify": run_bias_verify,
    "walk": run_walk,
    "mix": run_mix,
    "close": run_close,
    "lattice": run_lattice,
    "veech": run_veech,
    "recurrence": run_recurrence,
    "assemble": run_assemble,
}

_COLUMN_DOCS = {
    "count": "radius;classes;ratio;bound;ok  (ratio = classes * 2R / e^{2R})",
    "thin": "delta;radius;almost_closed;bound;ok",
    "bias-verify": "tau;estimate;exact;stderr;z;bound;ok",
    "walk": "radius;trajectories;thin_trajectories;bound;ok",
    "mix": "time;estimate;target;stderr;bound;ok",
    "close": ("time;events;components;count_ratio;worst_length_gap;"
              "length_bound;worst_axis_distance;axis_bound;ok"),
    "lattice": "quantity;systole;tau;value;bound;ok",
    "veech": "length_bin_end;classes;min_axis_systole;bound;ok",
    "recurrence": "horizon;flagged_fraction;bound;ok",
    "assemble": "band_lo;band_hi;classes;bound;ok",
}


def run(config: ExperimentConfig) -> CountReport:
    """Dispatch a validated config to its experiment runner."""
    t0 = time.time()
    report = RUNNERS[config.experiment](config)
    report.wall_time = time.time() - t0
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="geodlab",
        description="Counting experiments on the model surface. All floats "
                    "print with 9 significant digits; rows end with their "
                    "tolerance and a yes/no verdict ('none' marks rows that "
                    "are informational).")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in sorted(EXPERIMENTS):
        keys = ", ".join(sorted(EXPERIMENTS[name]))
        sp = sub.add_parser(
            name, help=f"run the {name} experiment",
            description=f"Columns: {_COLUMN_DOCS[name]}\nConfig keys: {keys}",
            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", help="key = value parameter file")
        sp.add_argument("--seed", type=int, help="master 64-bit seed")
        sp.add_argument("--workers", type=int, help="work item partitions")
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--check", action="store_true",
                        help="exit 3 if any row or derived verdict is 'no'")
        sp.add_argument("--set", action="append", default=[], metavar="K=V",
                        help="override one config key (repeatable)")
    args = parser.parse_args(argv)
    try:
        text = None
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set needs K=V, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k.strip()] = v.strip()
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.workers is not None:
            overrides["workers"] = args.workers
        config = build_config(args.experiment, text, overrides)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    report = run(config)
    body = report.to_text()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(body)
    else:
        sys.stdout.write(body)
    if args.check:
        failed = any(row[-1] == "no" for row in report.rows)
        failed = failed or any(v == "no" for v in report.derived.values())
        if failed:
            return 3
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
