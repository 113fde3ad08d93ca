"""Command-line front end: ``hydrogeo <command> [options]``.

Exit codes: 0 success, 2 input error (bad arguments, schema violations,
missing files), 3 numerical halt (partial output is still written).
Reports are JSON with sorted keys; field data is CSV.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import bridge, geodesics
from .evolution import EvolutionConfig, evolve_diagonal, evolve_uno, n2_closure
from .fields import ScalarField1D, ScalarField2D
from .momenta import HamiltonianForm, MomentaPolynomial
from .riemann import (HydroSnapshot, invariants_and_velocities, liouville_residual, riemann_from_state,
                      sample_velocities, semi_hamiltonian_residual, stack_series)
from .systems import bracket_equivalence, build_raz, raz_residual, render_system, system_to_json

log = logging.getLogger("hydrogeo")

EXIT_OK, EXIT_INPUT, EXIT_HALT = 0, 2, 3
SCHEMA_VERSION = 1


class InputError(Exception):
    """Bad user input; maps to exit code 2."""


class NumericalHalt(Exception):
    """A stage failed numerically; maps to exit code 3."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


_NUM = {"type": "number"}
_FOURIER = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"mean": _NUM, "cos": {"type": "array", "items": _NUM}, "sin": {"type": "array", "items": _NUM}},
}
_POS = {"type": "number", "exclusiveMinimum": 0}
# a field is a Fourier series, inline nodal values, or a 1-D field CSV file
_SOURCE = {"oneOf": [
    _FOURIER,
    {"type": "array", "items": _NUM, "minItems": 8},
    {"type": "object", "additionalProperties": False, "required": ["file"], "properties": {"file": {"type": "string"}}},
]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "N", "grid", "initial", "evolution"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "description": {"type": "string"},
        "seed": {"type": "integer"},
        "N": {"type": "integer", "minimum": 2, "maximum": 8},
        "zero_mask": {"type": "array", "items": {"type": "integer"}, "uniqueItems": True},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["nx"],
            "properties": {"nx": {"type": "integer", "minimum": 8}, "length": _POS, "dx": _POS, "x0": _NUM,
                           "periodic": {"const": True}},
            "oneOf": [{"required": ["length"]}, {"required": ["dx"]}],
        },
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "required": ["a", "b"],
            "properties": {"a": _SOURCE, "b": {"type": "array", "items": _SOURCE, "minItems": 1}},
        },
        "evolution": {
            "type": "object",
            "additionalProperties": False,
            "required": ["y_end"],
            "properties": {
                "y_end": _POS,
                "scheme": {"enum": ["lax_friedrichs", "lax_wendroff", "upwind_diagonal"]},
                "cfl": _POS,
                "output_dy": _POS,
                "output_dy_over_dx": _POS,
                "output_every": {"type": "integer", "minimum": 1},
                "dissipation": {"type": "number", "minimum": 0},
                "shock_factor": _POS,
                "moment_order": {"type": "integer", "minimum": 0},
            },
            "not": {"required": ["output_dy", "output_dy_over_dx"]},
        },
        "thresholds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"mass_drift": _POS, "second_density_drift": _POS, "closedness": _POS},
        },
        "bridge": {
            "type": "object",
            "additionalProperties": False,
            "required": ["k"],
            "properties": {"k": {"type": "integer", "minimum": 1}, "n1_over_nx": _POS, "margin": {"type": "number", "minimum": 0}},
        },
        "geodesic": {
            "type": "object",
            "additionalProperties": False,
            "required": ["t_end", "dt", "initial"],
            "properties": {
                "t_end": _POS,
                "dt": _POS,
                "control_amplitude": {"type": "number", "minimum": 0},
                "initial": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["x1_frac", "x2", "p1", "p2"],
                        "properties": {"x1_frac": {"type": "number", "minimum": 0, "maximum": 1},
                                       "x2": _NUM, "p1": _NUM, "p2": _NUM},
                    },
                },
            },
        },
    },
}


# ---------------------------------------------------------------- helpers

def _dump(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def bundled_config_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("hydrogeo").joinpath("configs").iterdir()
                  if p.name.endswith(".json"))


def load_config(ref: str) -> dict:
    """Load and validate a config from a path or ``bundled:<name>``.

    Relative ``file`` references resolve against the config's directory.
    """
    base = None
    if ref.startswith("bundled:"):
        name = ref.split(":", 1)[1]
        res = resources.files("hydrogeo").joinpath("configs", f"{name}.json")
        if not res.is_file():
            raise InputError(f"no bundled config {name!r}; available: {', '.join(bundled_config_names())}")
        text = res.read_text()
    else:
        path = Path(ref)
        if not path.is_file():
            raise InputError(f"config file not found: {ref}")
        text = path.read_text()
        base = path.resolve().parent
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"config schema violation at {where}: {exc.message}") from exc
    if len(cfg["initial"]["b"]) != cfg["N"] - 1:
        raise InputError(f"initial.b must list N-1 = {cfg['N'] - 1} root fields")
    cfg["_base_dir"] = str(base) if base else None
    return cfg


def fourier(coeffs: dict, x: np.ndarray, length: float, x0: float = 0.0) -> np.ndarray:
    """``mean + sum_k cos[k-1] cos(k w (x-x0)) + sin[k-1] sin(k w (x-x0))``, ``w = 2π/length``."""
    w = 2.0 * math.pi / length
    out = np.full_like(x, float(coeffs.get("mean", 0.0)))
    for k, c in enumerate(coeffs.get("cos", []), start=1):
        out += c * np.cos(k * w * (x - x0))
    for k, s in enumerate(coeffs.get("sin", []), start=1):
        out += s * np.sin(k * w * (x - x0))
    return out


def _source_values(src, x, L, x0, base) -> np.ndarray:
    if isinstance(src, list):
        vals = np.asarray(src, dtype=float)
    elif "file" in src:
        path = Path(src["file"])
        if not path.is_absolute() and base:
            path = Path(base) / path
        if not path.is_file():
            raise InputError(f"initial field file not found: {path}")
        try:
            vals = ScalarField1D.from_csv(path).values
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from exc
    else:
        return fourier(src, x, L, x0)
    if vals.size != x.size:
        raise InputError(f"initial field has {vals.size} values but the grid has {x.size} nodes")
    return vals


def initial_snapshot(cfg: dict, nx: int | None = None) -> HydroSnapshot:
    """Initial state on the configured grid; ``nx`` overrides the node count at fixed length."""
    g = cfg["grid"]
    L = g["length"] if "length" in g else g["nx"] * g["dx"]
    nx = nx or g["nx"]
    x0 = g.get("x0", 0.0)
    dx = L / nx
    x = x0 + np.arange(nx) * dx
    base = cfg.get("_base_dir")
    a = _source_values(cfg["initial"]["a"], x, L, x0, base)
    if np.any(a <= 0):
        raise InputError("initial a must be positive")
    b = [_source_values(s, x, L, x0, base) for s in cfg["initial"]["b"]]
    return HydroSnapshot.from_arrays(a, b, dx, 0.0, x0)


def evolution_config(cfg: dict, dx: float) -> EvolutionConfig:
    ev = dict(cfg["evolution"])
    ratio = ev.pop("output_dy_over_dx", None)
    if ratio is not None:
        ev["output_dy"] = ratio * dx
    try:
        return EvolutionConfig(**ev)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def write_series(series, directory: Path) -> None:
    """One ``snapshot_NNNN.csv`` (columns x, a, b1..) per snapshot plus a ``series.json`` manifest."""
    directory.mkdir(parents=True, exist_ok=True)
    s0 = series[0]
    header = ",".join(["x", "a"] + [f"b{m + 1}" for m in range(s0.N - 1)])
    entries = []
    for j, s in enumerate(series):
        name = f"snapshot_{j:04d}.csv"
        np.savetxt(directory / name, np.column_stack([s.a.x, s.a.values, s.b_values.T]), delimiter=",",
                   header=header, comments="", fmt="%.17g")
        entries.append({"y": s.y, "file": name})
    meta = {"schema_version": SCHEMA_VERSION, "N": s0.N, "nx": s0.a.nx, "dx": s0.a.dx, "x0": s0.a.x0,
            "periodic": s0.a.periodic, "snapshots": entries}
    (directory / "series.json").write_text(_dump(meta))


def read_series(directory: Path) -> list[HydroSnapshot]:
    meta_p = directory / "series.json"
    if not meta_p.is_file():
        raise InputError(f"missing series manifest: {meta_p}")
    meta = json.loads(meta_p.read_text())
    nx, N = meta["nx"], meta["N"]
    out = []
    for ent in meta["snapshots"]:
        p = directory / ent["file"]
        if not p.is_file():
            raise InputError(f"missing snapshot file: {p}")
        data = np.loadtxt(p, delimiter=",", skiprows=1, ndmin=2)
        if data.shape != (nx, N + 1):
            raise InputError(f"{p}: shape {data.shape} does not match the manifest ({nx}, {N + 1})")
        out.append(HydroSnapshot.from_arrays(data[:, 1], data[:, 2:].T, meta["dx"], ent["y"], meta["x0"],
                                             meta["periodic"]))
    return out


def read_fields(directory: Path, N: int, optional_ends: bool = False) -> tuple[ScalarField2D, dict]:
    """``g12.csv`` and ``a<k>.csv``; ``a0``/``a<N>`` are read when present and ``optional_ends``."""
    def load(name):
        p = directory / f"{name}.csv"
        if not p.is_file():
            return None
        try:
            return ScalarField2D.from_csv(p)
        except ValueError as exc:
            raise InputError(f"{p}: {exc}") from exc

    g = load("g12")
    if g is None:
        raise InputError(f"missing field file: {directory / 'g12.csv'}")
    a = {}
    for k in range(0, N + 1):
        f = load(f"a{k}")
        if f is None and 1 <= k <= N - 1:
            raise InputError(f"missing field file: {directory / f'a{k}.csv'}")
        if f is not None and (optional_ends or 1 <= k <= N - 1):
            a[k] = f
    return g, a


def _max(f) -> float:
    return float(np.max(np.abs(f.values if isinstance(f, ScalarField2D) else f)))


# ---------------------------------------------------------------- stages

def stage_evolve(cfg: dict, nx: int | None = None):
    s0 = initial_snapshot(cfg, nx)
    ecfg = evolution_config(cfg, s0.a.dx)
    res = evolve_uno(s0, ecfg)
    rep = res.report
    summary = {
        "snapshots": len(res.snapshots),
        "y_final": res.snapshots[-1].y,
        "halted": res.halted,
        "reason": res.reason,
        "steps": res.steps,
        "mass_drift": rep.mass_drift,
        "second_density_drift": rep.second_density_drift,
    }
    if len(res.snapshots) >= 4:
        summary["flux_residual_1"] = float(np.max(rep.flux_residual_1))
        summary["flux_residual_2"] = float(np.max(rep.flux_residual_2))
        summary["moment_chain"] = {str(k): float(np.max(v)) for k, v in rep.moment_chain.items()}
    th = cfg.get("thresholds", {})
    checks = {k: summary[k] <= th[k] for k in ("mass_drift", "second_density_drift") if k in th}
    summary["within_thresholds"] = checks
    return res, summary


def stage_invariants(series, seed: int = 0):
    rd = [invariants_and_velocities(s) for s in series]
    r = np.stack([d.r for d in rd])
    mu = np.stack([d.mu for d in rd])
    out = {"r_min": r.min(axis=(0, 2)), "r_max": r.max(axis=(0, 2)),
           "mu_min": mu.min(axis=(0, 2)), "mu_max": mu.max(axis=(0, 2))}
    if len(series) >= 4:
        out["liouville_residual"] = _max(liouville_residual(series, 0.37))
    s0 = series[0]
    if s0.N == 3:
        # sample where the roots are furthest apart; coincident roots make the test singular
        i = int(np.argmax(np.abs(s0.b_values[0] - s0.b_values[1])))
        state = np.concatenate([[s0.a.values[i]], s0.b_values[:, i]])
        out["semi_hamiltonian_point"] = state
        try:
            r0 = riemann_from_state(state[:1], state[1:, None]).r[:, 0]
            out["semi_hamiltonian_defect"] = semi_hamiltonian_residual(sample_velocities(r0, state, 0.01), 0.01).defect
        except (ArithmeticError, ValueError) as exc:
            out["semi_hamiltonian_defect"] = None
            out["semi_hamiltonian_note"] = str(exc)
    return rd, out


def stage_reconstruct(series, k: int, N: int, zero_mask=(), n1: int | None = None, margin: float = 0.0,
                      threshold: float | None = None):
    f, rec = bridge.integral_coefficients(series, k)
    g = rec.g12
    if not np.all(np.abs(g.values) < 1.0):
        raise NumericalHalt("reconstructed |g12| reached 1")
    pot = bridge.x1_potential(g, rec.a_N_1, threshold=threshold)
    names = {"g12": g, "a_N_1": rec.a_N_1, **{f"a{m}": c for m, c in enumerate(f.coeffs)
                                                 if isinstance(c, ScalarField2D)}}
    n1 = n1 or max(8, g.grid.nx // 2)
    try:
        chart = bridge.resample_to_chebyshev(pot.x1, names, n1, margin)
    except ValueError as exc:
        raise NumericalHalt(f"chart resampling failed: {exc}") from exc
    cg = chart.fields["g12"]
    masked = {m: 0.0 for m in zero_mask}
    coeffs = {}
    for m in range(N + 1):
        c = chart.fields.get(f"a{m}")
        coeffs[m] = c if c is not None else ScalarField2D.constant(chart.grid, f.coeffs[m])
    ends = max(_max(coeffs[0]), _max(coeffs[N]))
    masked_max = {str(m): _max(coeffs[m]) for m in zero_mask}
    for m in zero_mask:
        coeffs[m] = ScalarField2D.constant(chart.grid, 0.0)
    sysr = build_raz(N, zero_mask)
    live = {m: coeffs[m] for m in range(1, N) if m not in masked}
    res = raz_residual(sysr, live, cg)
    hj = {}
    for j in range(1, N):
        h = stack_series(series, lambda s, j=j: s.b[j - 1].values / np.sqrt(1.0 + s.b[j - 1].values ** 2))
        hj[str(j)] = _max(bridge.hj_residual_semigeodesic(h, rec.a_N_1, g))
    recip = bridge.reciprocal_forward(cg, coeffs[N - 1])
    report = {
        "k": k,
        "max_abs_g12": _max(g),
        "closedness": rec.closedness_max,
        "x1_path_defect": pot.path_defect,
        "folds": pot.folds,
        "end_coefficients_max": ends,
        "masked_coefficients_max": masked_max,
        "raz_residual": {str(kk): _max(r) for (kk, _), r in zip(sysr.equations, res)},
        "hj_semigeodesic": hj,
        "chart_closedness": _max(recip.closedness),
        "chart": chart.grid.to_dict(),
        "chart_periodic_shift": chart.period_x1_shift,
    }
    poly = MomentaPolynomial([coeffs[m] for m in range(N + 1)])
    return rec, chart, poly, report


def _write_chart(directory: Path, chart, poly: MomentaPolynomial, rec) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    cheb = directory / "chebyshev"
    semi = directory / "semigeodesic"
    cheb.mkdir(exist_ok=True)
    semi.mkdir(exist_ok=True)
    chart.fields["g12"].to_csv(cheb / "g12.csv")
    for m, c in enumerate(poly.coeffs):
        c.to_csv(cheb / f"a{m}.csv")
    refs = [f"a{m}.csv" for m in range(poly.degree + 1)]
    (cheb / "integral.json").write_text(_dump(poly.to_json(refs)))
    rec.g12.to_csv(semi / "g12.csv")
    rec.a_N_1.to_csv(semi / "a_N_1.csv")
    G = bridge.metric_semigeodesic(rec.a_N_1, rec.g12).components["G"]
    ScalarField2D(rec.g12.grid, G).to_csv(semi / "G.csv")


def _control_field(g: ScalarField2D, amplitude: float, seed: int) -> ScalarField2D:
    """``g`` plus a smooth random trigonometric perturbation."""
    rng = np.random.default_rng(seed)
    X1, X2 = g.grid.mesh()
    L1 = max(g.grid.nx * g.grid.dx, 1e-12)
    L2 = g.grid.ny * g.grid.dy
    pert = np.zeros_like(X1)
    for _ in range(4):
        k1 = rng.integers(1, 4)
        k2 = rng.integers(1, 4)
        ph = rng.uniform(0, 2 * math.pi, 2)
        pert += np.sin(2 * math.pi * k1 * X1 / L1 + ph[0]) * np.cos(2 * math.pi * k2 * X2 / L2 + ph[1])
    vals = g.values + amplitude * pert / 4.0
    return ScalarField2D(g.grid, np.clip(vals, -0.95, 0.95))


def stage_geodesic(g: ScalarField2D, poly: MomentaPolynomial, initial, t_end: float, dt: float):
    H = geodesics.InterpolatedHamiltonian(HamiltonianForm(g))
    fi = geodesics.InterpolatedPolynomial(poly)
    return [geodesics.integrate_geodesic(H, fi, s, t_end, dt) for s in initial]


def _chart_states(grid, items):
    lo, hi = grid.x0, grid.x0 + (grid.nx - 1) * grid.dx
    return [geodesics.PhaseState(lo + it["x1_frac"] * (hi - lo), it["x2"], it["p1"], it["p2"]) for it in items]


def run_pipeline(cfg: dict, seed: int, nx: int | None = None, output: Path | None = None) -> dict:
    """Evolve, invariants, reconstruct, transform the integral, integrate geodesics."""
    if cfg["N"] not in (2, 3):
        raise InputError("pipeline supports N = 2 and N = 3")
    for sec in ("bridge", "geodesic"):
        if sec not in cfg:
            raise InputError(f"pipeline config needs a '{sec}' section")
    N = cfg["N"]
    zero_mask = tuple(cfg.get("zero_mask", ()))
    try:
        build_raz(N, zero_mask)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    report: dict = {"N": N, "seed": seed, "zero_mask": list(zero_mask)}
    res, report["evolve"] = stage_evolve(cfg, nx)
    series = res.snapshots
    if output:
        write_series(series, output / "series")
    if res.halted:
        raise NumericalHalt(f"evolution halted: {res.reason}", report)
    if N == 2:
        s0 = series[0]
        rd0 = riemann_from_state(s0.a.values, s0.b_values)
        dres = evolve_diagonal(rd0.r, n2_closure, EvolutionConfig(y_end=series[-1].y, scheme="upwind_diagonal",
                                                                  output_dy=series[-1].y), s0.a.dx)
        r_lw = riemann_from_state(series[-1].a.values, series[-1].b_values).r
        report["cross_scheme"] = float(np.max(np.abs(dres.r[-1] - r_lw)))
    try:
        _, report["invariants"] = stage_invariants(series, seed)
    except ArithmeticError as exc:
        report["invariants"] = {"error": str(exc)}
    b = cfg["bridge"]
    if not 1 <= b["k"] <= N - 1:
        raise InputError(f"bridge.k must lie in 1..{N - 1}")
    nxe = series[0].a.nx
    n1 = max(8, int(round(b.get("n1_over_nx", 0.5) * nxe)))
    try:
        rec, chart, poly, report["reconstruct"] = stage_reconstruct(
            series, b["k"], N, zero_mask, n1, b.get("margin", 0.0), cfg.get("thresholds", {}).get("closedness"))
    except NumericalHalt as exc:
        exc.report = report
        raise
    if output:
        _write_chart(output / "metric", chart, poly, rec)
    geo = cfg["geodesic"]
    g = chart.fields["g12"]
    states = _chart_states(chart.grid, geo["initial"])
    trajs = stage_geodesic(g, poly, states, geo["t_end"], geo["dt"])
    report["geodesic"] = [t.report for t in trajs]
    amp = geo.get("control_amplitude", 0.1)
    if amp > 0:
        ctrl = stage_geodesic(_control_field(g, amp, seed), poly, states[:1], geo["t_end"], geo["dt"])
        report["geodesic_control"] = ctrl[0].report
    if output:
        for i, t in enumerate(trajs):
            _write_traj(output / f"trajectory_{i:03d}.csv", t)
    return report


def _write_traj(path: Path, t) -> None:
    header = "t,x1,x2,p1,p2,H,f"
    np.savetxt(path, t.rows(), delimiter=",", header=header, comments="", fmt="%.17g")


# ---------------------------------------------------------------- commands

def _parse_mask(text: str | None) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise InputError(f"invalid zero mask {text!r}") from exc


def cmd_derive(args) -> tuple[int, dict | None, str | None]:
    try:
        sysr = build_raz(args.degree, _parse_mask(args.zero))
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    text = render_system(sysr)
    js = system_to_json(sysr)
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "system.txt").write_text(text + "\n")
        (out / "system.json").write_text(_dump(js))
    return EXIT_OK, js if args.json else None, None if args.json else text


def cmd_verify(args):
    N = args.degree
    mask = _parse_mask(args.zero)
    try:
        sysr = build_raz(N, mask)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    g, a = read_fields(Path(args.fields), N)
    live = {k: f for k, f in a.items() if k not in mask}
    try:
        res = raz_residual(sysr, live, g)
        eq = bracket_equivalence(N, {k: a[k] for k in range(1, N)}, g, mask)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    report = {"N": N, "zero_mask": list(mask),
              "residual_max": {str(k): _max(r) for (k, _), r in zip(sysr.equations, res)},
              "bracket_equivalence": eq}
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.json").write_text(_dump(report))
    return EXIT_OK, report, None


def cmd_evolve(args):
    cfg = load_config(args.config)
    res, summary = stage_evolve(cfg, args.nx)
    report = {"evolve": summary, "conservation": res.report.to_json() if len(res.snapshots) >= 4 else None}
    if args.output_dir:
        out = Path(args.output_dir)
        write_series(res.snapshots, out / "series")
        (out / "report.json").write_text(_dump(report))
    return (EXIT_HALT if res.halted else EXIT_OK), report, None


def cmd_invariants(args):
    series = read_series(Path(args.series))
    try:
        rd, summary = stage_invariants(series, args.seed)
    except ArithmeticError as exc:
        raise NumericalHalt(str(exc))
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        N = series[0].N
        cols = (["y", "x", "a"] + [f"b{m + 1}" for m in range(N - 1)] + [f"q{i + 1}" for i in range(N)]
                + [f"r{i + 1}" for i in range(N)] + [f"mu{i + 1}" for i in range(N)])
        rows = [np.column_stack([np.full(s.a.nx, s.y), s.a.x, s.a.values, s.b_values.T, d.q.T, d.r.T, d.mu.T])
                for s, d in zip(series, rd)]
        np.savetxt(out / "invariants.csv", np.vstack(rows), delimiter=",", header=",".join(cols),
                   comments="", fmt="%.17g")
        (out / "invariants.json").write_text(_dump(summary))
    return EXIT_OK, summary, None


def cmd_reconstruct(args):
    series = read_series(Path(args.series))
    N = series[0].N
    if not 1 <= args.k <= N - 1:
        raise InputError(f"k must lie in 1..{N - 1}")
    n1 = args.n1 or max(8, series[0].a.nx // 2)
    rec, chart, poly, report = stage_reconstruct(series, args.k, N, _parse_mask(args.zero), n1)
    if args.output_dir:
        out = Path(args.output_dir)
        _write_chart(out, chart, poly, rec)
        (out / "reconstruct.json").write_text(_dump(report))
    return EXIT_OK, report, None


def cmd_geodesic(args):
    fields = Path(args.fields)
    g, a = read_fields(fields, args.degree, optional_ends=True)
    if (fields / "integral.json").is_file():
        try:
            poly = MomentaPolynomial.from_json(json.loads((fields / "integral.json").read_text()), fields)
        except (ValueError, KeyError) as exc:
            raise InputError(f"integral.json: {exc}") from exc
        if poly.degree != args.degree:
            raise InputError(f"integral.json has degree {poly.degree}, expected {args.degree}")
    else:
        poly = MomentaPolynomial([a.get(m, 0.0) for m in range(args.degree + 1)])
    ic = Path(args.initial)
    if not ic.is_file():
        raise InputError(f"initial-condition file not found: {ic}")
    try:
        data = np.loadtxt(ic, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise InputError(f"{ic}: {exc}") from exc
    if data.shape[1] != 4:
        raise InputError("initial conditions need columns x1,x2,p1,p2")
    try:
        trajs = stage_geodesic(g, poly, [geodesics.PhaseState(*row) for row in data],
                               args.t_end, args.dt)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    summary = {"trajectories": [t.report for t in trajs]}
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, t in enumerate(trajs):
            _write_traj(out / f"trajectory_{i:03d}.csv", t)
        (out / "summary.json").write_text(_dump(summary))
    return EXIT_OK, summary, None


def cmd_pipeline(args):
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    out = Path(args.output_dir) if args.output_dir else None
    try:
        report = run_pipeline(cfg, seed, args.nx, out)
        code = EXIT_OK
    except NumericalHalt as exc:
        report = dict(exc.report or {})
        report["error"] = str(exc)
        code = EXIT_HALT
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "pipeline.json").write_text(_dump(report))
    return code, report, None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS lets the flags appear before or after the command
    common.add_argument("--output-dir", default=argparse.SUPPRESS, help="directory for output files")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for randomized controls")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="suppress stdout")

    p = argparse.ArgumentParser(prog="hydrogeo", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("derive", parents=[common], help="print the coefficient system for degree N")
    d.add_argument("--degree", type=int, required=True)
    d.add_argument("--zero", help="comma-separated indices k with a_k identically zero")
    d.add_argument("--json", action="store_true", help="print JSON instead of text")
    d.set_defaults(func=cmd_derive)

    v = sub.add_parser("verify", parents=[common], help="residuals of the system on field files")
    v.add_argument("--fields", required=True, help="directory with g12.csv and a<k>.csv")
    v.add_argument("--degree", type=int, required=True)
    v.add_argument("--zero")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("evolve", parents=[common], help="evolve a config's initial data")
    e.add_argument("--config", required=True, help="config path or bundled:<name>")
    e.add_argument("--nx", type=int, help="override grid.nx")
    e.set_defaults(func=cmd_evolve)

    i = sub.add_parser("invariants", parents=[common], help="Riemann invariants of a snapshot series")
    i.add_argument("--series", required=True)
    i.set_defaults(func=cmd_invariants)

    r = sub.add_parser("reconstruct", parents=[common], help="metrics in both charts from a series")
    r.add_argument("--series", required=True)
    r.add_argument("--k", type=int, required=True, help="root index of the bridge (1..N-1)")
    r.add_argument("--n1", type=int, help="x1 nodes of the resampled chart")
    r.add_argument("--zero")
    r.set_defaults(func=cmd_reconstruct)

    g = sub.add_parser("geodesic", parents=[common], help="integrate geodesics on field files")
    g.add_argument("--fields", required=True)
    g.add_argument("--degree", type=int, required=True)
    g.add_argument("--initial", required=True, help="CSV with header x1,x2,p1,p2")
    g.add_argument("--t-end", type=float, required=True)
    g.add_argument("--dt", type=float, required=True)
    g.set_defaults(func=cmd_geodesic)

    pl = sub.add_parser("pipeline", parents=[common], help="evolve, reconstruct and verify geodesics")
    pl.add_argument("--config", required=True)
    pl.add_argument("--nx", type=int)
    pl.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    for name, default in (("output_dir", None), ("seed", None), ("quiet", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        code, obj, text = args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalHalt as exc:
        print(f"numerical halt: {exc}", file=sys.stderr)
        return EXIT_HALT
    if not args.quiet:
        if text is not None:
            print(text)
        if obj is not None:
            sys.stdout.write(_dump(obj))
    return code


if __name__ == "__main__":
    sys.exit(main())
