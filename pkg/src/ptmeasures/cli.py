"""The ``ptm`` experiment runner.

Usage: ``ptm <experiment> --config cfg.json [--out report.json]
[--format json|csv-summary] [--threads N]``.

Configs are single JSON documents with top-level keys ``experiment``,
``seed``, ``replicates``, ``params``, and optional ``output_path``;
unknown keys anywhere are rejected.  Reports are canonical JSON (sorted
keys, floats at 17 significant digits) so reruns with the same config
and seed are byte-identical regardless of thread count; wall-clock time
goes to stderr, never into the report.  Exit code 0 means every check
passed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from importlib import metadata

import numpy as np

from . import compound, experiments, sir, streams, traffic
from .counting import (
    Binomial,
    CountingLaw,
    Deterministic,
    NegativeBinomial,
    NnpsFamily,
    NnpsLaw,
    Poisson,
)
from .spatial import Box, ProductLaw, UniformInterval
from .stc import MeasureSpec

SCHEMA_VERSION = 1
EXPERIMENTS = ("bone-check", "thin-verify", "compound", "sir", "traffic", "laplace")


class ConfigError(ValueError):
    """A config field is missing, unknown, or out of range."""


def _version() -> str:
    try:
        return metadata.version("ptmeasures")
    except metadata.PackageNotFoundError:
        return "0.0.0+unknown"


# ---------------------------------------------------------------------------
# strict config parsing


class _Fields:
    """Dict wrapper that tracks consumed keys and rejects leftovers."""

    def __init__(self, data: dict, where: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{where} must be an object")
        self.data = dict(data)
        self.where = where

    def take(self, key: str, required: bool = True, default=None):
        if key in self.data:
            return self.data.pop(key)
        if required:
            raise ConfigError(f"missing field '{key}' in {self.where}")
        return default

    def number(self, key: str, required: bool = True, default=None, minimum=None):
        raw = self.take(key, required, default)
        if raw is None:
            return None
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ConfigError(f"field '{key}' in {self.where} must be a number")
        if minimum is not None and raw < minimum:
            raise ConfigError(f"field '{key}' in {self.where} must be >= {minimum}")
        return float(raw)

    def integer(self, key: str, required: bool = True, default=None, minimum=None):
        raw = self.take(key, required, default)
        if raw is None:
            return None
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ConfigError(f"field '{key}' in {self.where} must be an integer")
        if minimum is not None and raw < minimum:
            raise ConfigError(f"field '{key}' in {self.where} must be >= {minimum}")
        return raw

    def string(self, key: str, required: bool = True, default=None, choices=None):
        raw = self.take(key, required, default)
        if raw is None:
            return None
        if not isinstance(raw, str):
            raise ConfigError(f"field '{key}' in {self.where} must be a string")
        if choices is not None and raw not in choices:
            raise ConfigError(
                f"field '{key}' in {self.where} must be one of {sorted(choices)}"
            )
        return raw

    def finish(self):
        if self.data:
            extra = ", ".join(sorted(self.data))
            raise ConfigError(f"unknown field(s) in {self.where}: {extra}")


def _parse_law(raw, where: str) -> CountingLaw:
    f = _Fields(raw, where)
    family = f.string("family", choices={
        "poisson", "binomial", "negative_binomial", "deterministic", "nnps"
    })
    if family == "poisson":
        law = Poisson(f.number("lam", minimum=0.0))
    elif family == "binomial":
        law = Binomial(f.integer("n", minimum=1), f.number("p"))
    elif family == "negative_binomial":
        law = NegativeBinomial(f.number("r"), f.number("theta"))
    elif family == "deterministic":
        law = Deterministic(f.integer("k", minimum=0))
    else:
        theta = f.number("theta")
        fam = _parse_family(f.take("coeffs"), where + ".coeffs", f)
        law = NnpsLaw(fam, theta)
    f.finish()
    return law


_NAMED_FAMILIES = {
    "geometric": NnpsFamily.geometric,
    "exponential": NnpsFamily.exponential,
    "cubic_gap": NnpsFamily.cubic_gap,
    "linear_times_exp": NnpsFamily.linear_times_exp,
}


def _parse_family(raw, where: str, parent: _Fields | None = None) -> NnpsFamily:
    if isinstance(raw, str):
        if raw.startswith("binomial:"):
            return NnpsFamily.binomial(int(raw.split(":", 1)[1]))
        if raw in _NAMED_FAMILIES:
            return _NAMED_FAMILIES[raw]()
        raise ConfigError(f"unknown named family '{raw}' in {where}")
    if isinstance(raw, list):
        radius = math.inf
        if parent is not None and "radius" in parent.data:
            radius = parent.number("radius")
        return NnpsFamily.from_coeffs(raw, radius_hint=radius)
    raise ConfigError(f"{where} must be a named family or a coefficient list")


def _parse_interval_union(raw, where: str):
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{where} must be a non-empty list of [lo, hi] pairs")
    if len(raw) == 2 and all(isinstance(v, (int, float)) for v in raw):
        raw = [raw]
    return tuple((float(a), float(b)) for a, b in raw)


def _parse_box(raw, where: str) -> Box:
    f = _Fields(raw, where)
    lo = f.take("lo")
    hi = f.take("hi")
    f.finish()
    return Box(tuple(float(v) for v in lo), tuple(float(v) for v in hi))


def _parse_state_probs(raw, horizon: float, where: str) -> compound.PiecewiseStateProbs:
    if isinstance(raw, list) and raw and isinstance(raw[0], (int, float)):
        return compound.PiecewiseStateProbs.constant(raw, horizon)
    f = _Fields(raw, where)
    breaks = tuple(float(b) for b in f.take("breaks"))
    probs = tuple(tuple(float(p) for p in row) for row in f.take("probs"))
    f.finish()
    return compound.PiecewiseStateProbs(breaks, probs)


def _parse_motion(raw, where: str) -> traffic.MotionKernel:
    f = _Fields(raw, where)
    kind = f.string("kind", choices={"brownian", "orbit", "waypoint"})
    if kind == "brownian":
        kernel = traffic.BrownianMotion(f.number("sigma"))
    elif kind == "orbit":
        omega = f.take("omega")
        if isinstance(omega, list):
            omega = tuple((float(v), float(p)) for v, p in omega)
        else:
            omega = float(omega)
        kernel = traffic.CircularOrbit(omega)
    else:
        kernel = traffic.RandomWaypoint(f.number("speed"))
    f.finish()
    return kernel


def _parse_functions(raw, where: str, marked: bool):
    out = []
    for i, fraw in enumerate(raw):
        f = _Fields(fraw, f"{where}[{i}]")
        kind = f.string("kind", choices={"zero", "indicator", "linear", "constant", "mark_linear"})
        if kind == "zero":
            out.append(("zero", lambda *cols: np.zeros(np.shape(cols[0]))))
        elif kind == "constant":
            value = f.number("value", minimum=0.0)
            out.append((f"const {value}", lambda *cols, v=value: np.full(np.shape(cols[0]), v)))
        elif kind == "indicator":
            a = f.number("a")
            b = f.number("b")
            out.append(
                (
                    f"1_({a},{b}]",
                    lambda *cols, a=a, b=b: (
                        (np.asarray(cols[0]) > a) & (np.asarray(cols[0]) <= b)
                    ).astype(float),
                )
            )
        elif kind == "linear":
            scale = f.number("scale")
            out.append(
                (f"{scale} x", lambda *cols, s=scale: s * np.asarray(cols[0], dtype=float))
            )
        else:
            if not marked:
                raise ConfigError("mark_linear needs a marked spec")
            sx = f.number("scale_x")
            sy = f.number("scale_mark")
            out.append(
                (
                    f"{sx} x + {sy} (y-x)",
                    lambda x, y, sx=sx, sy=sy: sx * np.asarray(x, dtype=float)
                    + sy * (np.asarray(y, dtype=float) - np.asarray(x, dtype=float)),
                )
            )
        f.finish()
    return out


# ---------------------------------------------------------------------------
# experiment dispatch


def _run_thin_verify(params: _Fields, seed, n_rep, threads):
    law = _parse_law(params.take("law"), "params.law")
    a_values = [float(a) for a in params.take("a_values")]
    params.finish()
    if any(not 0.0 < a < 1.0 for a in a_values):
        raise ConfigError("a_values must lie in (0, 1)")
    if n_rep < 1:
        raise ConfigError("replicates must be positive for thin-verify")
    return experiments.thin_verify(law, a_values, n_rep, seed, threads)


def _run_bone_check(params: _Fields, seed, n_rep, threads):
    kind = params.string("kind", choices={"pt", "nnps"})
    if kind == "pt":
        law = _parse_law(params.take("law"), "params.law")
        a = params.number("a", required=False, default=0.5)
        params.finish()
        return experiments.bone_check("pt", law=law, a=a)
    family = _parse_family(params.take("family"), "params.family", params)
    theta = params.number("theta")
    a = params.number("a", required=False, default=0.5)
    expect = params.string("expect_class", required=False)
    params.finish()
    return experiments.bone_check(
        "nnps", family=family, theta=theta, a=a, expect_class=expect
    )


def _run_compound(params: _Fields, seed, n_rep, threads):
    counting = _parse_law(params.take("counting"), "params.counting")
    horizon = params.number("days", minimum=0.0)
    state_probs = _parse_state_probs(
        params.take("state_probs"), horizon, "params.state_probs"
    )
    spend_mean = tuple(float(v) for v in params.take("spend_mean"))
    spend_var = tuple(float(v) for v in params.take("spend_var"))
    observed = _parse_interval_union(params.take("observed_days"), "params.observed_days")
    params.finish()
    if n_rep < 1:
        raise ConfigError("replicates must be positive for compound")
    model = compound.StoreModel(
        counting=counting,
        horizon=horizon,
        state_probs=state_probs,
        spend_mean=spend_mean,
        spend_var=spend_var,
    )
    return experiments.compound_experiment(model, observed, n_rep, seed, threads)


def _run_sir(params: _Fields, seed, n_rep, threads):
    sp = sir.SirParams(
        beta=params.number("beta"),
        gamma=params.number("gamma"),
        rho=params.number("rho"),
    )
    n = params.integer("n", minimum=1)
    t_values = [float(t) for t in params.take("t_values")]
    dt = params.number("dt", required=False, default=1e-3)
    t_max = params.number("t_max", required=False)
    stride = params.integer("trajectory_stride", required=False, default=0, minimum=0)
    params.finish()
    if n_rep < 1:
        raise ConfigError("replicates must be positive for sir")
    return experiments.sir_experiment(
        sp, n, t_values, n_rep, seed, dt=dt, t_max=t_max,
        threads=threads, trajectory_stride=stride,
    )


def _run_traffic(params: _Fields, seed, n_rep, threads):
    counting = _parse_law(params.take("counting"), "params.counting")
    box = _parse_box(params.take("box"), "params.box")
    motion = _parse_motion(params.take("motion"), "params.motion")
    t = params.number("time", minimum=0.0)
    region_a = _parse_box(params.take("region_a"), "params.region_a")
    region_b = _parse_box(params.take("region_b"), "params.region_b")
    expect = params.string("expect_verdict", required=False,
                           choices={"zero", "negative", "positive"})
    restrict_raw = params.take("restrict", required=False, default=[])
    restrict = tuple(
        _parse_box(r, f"params.restrict[{i}]") for i, r in enumerate(restrict_raw)
    )
    arrivals = None
    if "arrivals" in params.data:
        af = _Fields(params.take("arrivals"), "params.arrivals")
        w = af.take("window")
        arrivals = traffic.UniformWindow(float(w[0]), float(w[1]))
        af.finish()
    lifetime_rate = params.number("lifetime_rate", required=False)
    initial = None
    if "initial_box" in params.data:
        inner = _parse_box(params.take("initial_box"), "params.initial_box")
        initial = ProductLaw.uniform_on(inner)
    snapshot_rows = params.integer("snapshot_replicates", required=False, default=0, minimum=0)
    params.finish()
    if n_rep < 10_000:
        raise ConfigError("traffic sign verdicts need replicates >= 10000")
    config = traffic.TrafficConfig(
        counting=counting, box=box, motion=motion, query_time=t,
        initial_law=initial, arrivals=arrivals, lifetime_rate=lifetime_rate,
    )
    out = experiments.traffic_experiment(
        config, region_a, region_b, n_rep, seed,
        restrict_regions=restrict, expect_verdict=expect, threads=threads,
    )
    if snapshot_rows:
        out["snapshot_csv_rows"] = _snapshot_rows(config, seed, snapshot_rows)
    return out


def _snapshot_rows(config: traffic.TrafficConfig, seed: int, n_rep: int) -> list[str]:
    """CSV lines (replicate, time, x, y, z) for n_rep seeded snapshots."""
    rep_ids, pos = traffic._bulk_positions(config, streams.child_seed(seed, 9001), n_rep)
    lines = ["replicate,time,x,y,z"]
    for rid, row in zip(rep_ids, pos):
        coords = [f"{v:.17g}" for v in row] + [""] * (3 - row.size)
        lines.append(f"{rid},{config.query_time:.17g}," + ",".join(coords))
    return lines


def _run_laplace(params: _Fields, seed, n_rep, threads):
    counting = _parse_law(params.take("counting"), "params.counting")
    lo, hi = params.take("interval")
    spec = MeasureSpec(counting, UniformInterval(float(lo), float(hi)))
    marked = False
    if "recovery_rate" in params.data:
        rate = params.number("recovery_rate", minimum=0.0)
        kernel = sir.recovery_kernel(
            sir.SirParams(beta=2.0 * rate, gamma=rate, rho=1e-6)
        )
        spec = spec.mark(kernel)
        marked = True
    functions = _parse_functions(params.take("functions"), "params.functions", marked)
    params.finish()
    if n_rep < 100:
        raise ConfigError("laplace needs replicates >= 100")
    return experiments.laplace_experiment(spec, functions, n_rep, seed, threads)


_RUNNERS = {
    "thin-verify": _run_thin_verify,
    "bone-check": _run_bone_check,
    "compound": _run_compound,
    "sir": _run_sir,
    "traffic": _run_traffic,
    "laplace": _run_laplace,
}


def run(config: dict, threads: int = 1) -> dict:
    """Validate a config document, run its experiment, and build the report."""
    top = _Fields(config, "config")
    experiment = top.string("experiment", choices=set(EXPERIMENTS))
    seed = top.integer("seed", minimum=0)
    if seed >= 1 << 64:
        raise ConfigError("seed must fit in 64 bits")
    replicates = top.integer("replicates", minimum=0)
    output_path = top.string("output_path", required=False)
    params_raw = top.take("params", required=False, default={})
    top.finish()
    params = _Fields(params_raw, "params")
    body = _RUNNERS[experiment](params, seed, replicates, threads)
    checks = body.get("checks", [])
    report = {
        "schema_version": SCHEMA_VERSION,
        "experiment": experiment,
        "version": _version(),
        "seed": seed,
        "replicates": replicates,
        "params": params_raw,
        "results": body.get("results", {}),
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
    if "snapshot_csv_rows" in body:
        report["snapshot_csv_rows"] = body["snapshot_csv_rows"]
    if output_path:
        report["output_path"] = output_path
    return report


# ---------------------------------------------------------------------------
# canonical emission


def _plain(obj):
    """Convert numpy scalars/arrays and tuples to plain JSON-able values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""
    obj = _plain(obj)
    if isinstance(obj, dict):
        inner = ",".join(
            f"{json.dumps(k)}:{canonical_json(v)}" for k, v in sorted(obj.items())
        )
        return "{" + inner + "}"
    if isinstance(obj, list):
        return "[" + ",".join(canonical_json(v) for v in obj) + "]"
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError("refusing to serialize a non-finite float")
        return format(obj, ".17g")
    raise TypeError(f"cannot serialize {type(obj).__name__}")


_CSV_COLUMNS = ("experiment", "check", "observed", "expected", "tolerance", "passed")


def csv_summary(report: dict) -> str:
    """Fixed-column summary: one row per check."""
    lines = [",".join(_CSV_COLUMNS)]
    for check in report["checks"]:
        obs, exp = check["observed"], check["expected"]
        row = [
            report["experiment"],
            str(check["name"]),
            format(obs, ".17g") if isinstance(obs, float) else str(obs),
            format(exp, ".17g") if isinstance(exp, float) else str(exp),
            str(check["tolerance"]),
            "true" if check["passed"] else "false",
        ]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def emit(report: dict, fmt: str = "json") -> str:
    """Serialize a report; identical reports yield identical bytes."""
    if fmt == "json":
        return canonical_json(report) + "\n"
    if fmt == "csv-summary":
        return csv_summary(report)
    raise ValueError(f"unknown format {fmt!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ptm", description="Poisson-type random measure experiments"
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", default=None, help="report output path")
    parser.add_argument("--format", default="json", choices=("json", "csv-summary"))
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    with open(args.config, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    if config.get("experiment") != args.experiment:
        print(
            f"error: config experiment {config.get('experiment')!r} does not match "
            f"subcommand {args.experiment!r}",
            file=sys.stderr,
        )
        return 2
    started = time.perf_counter()
    try:
        report = run(config, threads=max(args.threads, 1))
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - started
    payload = emit(report, args.format)
    out_path = args.out or report.get("output_path")
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(payload)
        if "snapshot_csv_rows" in report:
            with open(out_path + ".snapshots.csv", "w", encoding="utf-8") as fh:
                fh.write("\n".join(report["snapshot_csv_rows"]) + "\n")
    else:
        sys.stdout.write(payload)
    print(f"ptm {args.experiment}: {elapsed:.2f}s wall clock", file=sys.stderr)
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
