"""Scenario runner: ``edge-spectral-lab <config> [--out DIR] [--threads N] [--verify]``.

The configuration is line-oriented ``key = value`` text with ``#`` comments;
potential parameters use dotted keys (``potential.m = 4``).  Every run writes
CSV tables, a ``summary.json`` echoing the fully defaulted configuration, and
a separate ``timing.json`` so that the deterministic outputs are
byte-identical across reruns.

Exit codes: 0 success, 1 property failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .acceptance import run_all
from .bands import (
    band_minimum,
    build_inverse_band,
    format_float,
    gap_asymptotic_ratio,
    invert_band,
    mode_defect,
    rho_derivative,
    tabulate_band,
    trust_window,
)
from .effective import H_MINUS, H_PLUS, SsfSolver, counting, toeplitz_vj_spectrum, toeplitz_window, weyl_count
from .fiber import DIRICHLET, NEUMANN, FiberSpec, band_value
from .numerics import NumericalError
from .potentials import FULL_PLANE, HALF_PLANE, KINDS, PotentialModel, admissibility_report, volume_function

SCENARIOS = ("bands", "invert", "defect", "ssf", "toeplitz", "neumann", "volume", "verify")
SSF_HEADER = ("lambda", "eps", "nodes", "n_minus_hi", "n_minus_lo", "n_plus_hi", "n_plus_lo", "trace_norm", "volume",
              "ratio")
EXIT_OK, EXIT_PROPERTY, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters; every field has a documented default except ``scenario``."""

    scenario: str
    # fiber
    b: float = 1.0
    bc: str = DIRICHLET
    n_x: int = 400
    pad: float = 12.0
    richardson: int = 3
    # potential
    potential_kind: str = "radial_power"
    potential_C: float = 1.0
    potential_m: float = 4.0
    potential_R: float = 2.0
    potential_A: float = 1.0
    # bands / invert / defect
    j: tuple[int, ...] = (1,)
    k_min: float = -6.0
    k_max: float = 6.0
    n_nodes: int = 41
    s_values: tuple[float, ...] = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2)
    k_values: tuple[float, ...] = (1.0, 1.5, 2.0, 2.5, 3.0, 3.5)
    # sweeps
    lambdas: tuple[float, ...] = ()
    lambda_min: float = 1e-4
    lambda_max: float = 1e-3
    per_decade: int = 6
    side: str = "above"
    operator: str = H_PLUS
    r: float = 0.2
    node_budget: int = 1200
    grid_step: float = 0.025
    eps_scale: float = 1.0
    dk: float = 0.05
    seed: int = 0
    out: str = "out"

    def fiber(self) -> FiberSpec:
        return FiberSpec(b=self.b, bc=self.bc, n_x=self.n_x, pad=self.pad, richardson=self.richardson)

    def potential(self) -> PotentialModel:
        return PotentialModel(kind=self.potential_kind, C=self.potential_C, m=self.potential_m,
                              R=self.potential_R, A=self.potential_A)

    def lambda_grid(self) -> np.ndarray:
        """Positive offsets, largest first; explicit ``lambdas`` win over the decade range."""
        if self.lambdas:
            return np.array(sorted(self.lambdas, reverse=True))
        decades = math.log10(self.lambda_max / self.lambda_min)
        n = int(round(decades * self.per_decade)) + 1
        return np.geomspace(self.lambda_max, self.lambda_min, n)

    def echo(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            key = f.name.replace("potential_", "potential.", 1)
            v = getattr(self, f.name)
            out[key] = list(v) if isinstance(v, tuple) else v
        return out


_KEYS = {f.name.replace("potential_", "potential.", 1): f for f in dataclasses.fields(RunConfig)}
_CONVERTERS = {
    "j": _ints, "s_values": _floats, "k_values": _floats, "lambdas": _floats,
    "n_x": int, "richardson": int, "n_nodes": int, "per_decade": int, "node_budget": int, "seed": int,
    "scenario": str.lower, "bc": str.lower, "potential.kind": str.lower, "side": str.lower, "operator": str, "out": str,
}


def _check(cfg: RunConfig, line_of: dict):
    def need(cond, key, msg):
        if not cond:
            where = f"line {line_of[key]}: " if key in line_of else ""
            raise ConfigError(f"{where}{key}: {msg}")

    need(cfg.scenario in SCENARIOS, "scenario", f"must be one of {', '.join(SCENARIOS)}")
    need(cfg.b > 0 and math.isfinite(cfg.b), "b", "must be positive")
    need(cfg.bc in (DIRICHLET, NEUMANN), "bc", "must be dirichlet or neumann")
    need(cfg.n_x >= 200, "n_x", "must be >= 200")
    need(cfg.pad >= 8, "pad", "must be >= 8")
    need(cfg.richardson in (1, 2, 3), "richardson", "must be 1, 2 or 3")
    need(cfg.potential_kind in KINDS, "potential.kind", f"must be one of {', '.join(KINDS)}")
    need(cfg.potential_C > 0, "potential.C", "must be positive")
    need(cfg.potential_m > 2, "potential.m", "decay exponent must exceed 2")
    need(cfg.potential_R > 0, "potential.R", "must be positive")
    need(cfg.potential_A > 0, "potential.A", "must be positive")
    need(len(cfg.j) > 0 and all(v >= 1 for v in cfg.j), "j", "band indices must be >= 1")
    need(cfg.k_min < cfg.k_max, "k_max", "need k_min < k_max")
    need(cfg.n_nodes >= 16, "n_nodes", "must be >= 16")
    need(all(0 < s for s in cfg.s_values), "s_values", "must be positive")
    need(all(k >= 1 for k in cfg.k_values), "k_values", "defect momenta must be >= 1")
    need(all(l > 0 for l in cfg.lambdas), "lambdas", "give positive offsets; the side key selects the sign")
    need(0 < cfg.lambda_min < cfg.lambda_max, "lambda_min", "need 0 < lambda_min < lambda_max")
    need(cfg.per_decade >= 1, "per_decade", "must be >= 1")
    need(cfg.side in ("above", "below"), "side", "must be above or below")
    need(cfg.operator in (H_PLUS, H_MINUS), "operator", f"must be {H_PLUS} or {H_MINUS}")
    need(0 < cfg.r < 1, "r", "must lie in (0, 1)")
    need(64 <= cfg.node_budget <= 4000, "node_budget", "must lie in [64, 4000]")
    need(0 < cfg.grid_step <= 0.1, "grid_step", "must lie in (0, 0.1]")
    need(0 < cfg.eps_scale <= 1, "eps_scale", "must lie in (0, 1]")
    need(0 < cfg.dk <= 0.5, "dk", "must lie in (0, 0.5]")
    need(cfg.seed >= 0, "seed", "must be >= 0")


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines into a validated :class:`RunConfig`."""
    values, line_of = {}, {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {no}: unknown key {key!r}")
        if key in line_of:
            raise ConfigError(f"line {no}: duplicate key {key!r} (first set on line {line_of[key]})")
        conv = _CONVERTERS.get(key, float)
        try:
            values[_KEYS[key].name] = conv(val)
        except ValueError as exc:
            raise ConfigError(f"line {no}: bad value for {key!r}: {exc}") from None
        line_of[key] = no
    if "scenario" not in values:
        raise ConfigError("missing required key 'scenario'")
    cfg = RunConfig(**values)
    _check(cfg, line_of)
    return cfg


# ---------------------------------------------------------------------------
# reports


@dataclass
class RunReport:
    config: dict
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    results: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format_float(float(v))


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def emit_report(rep: RunReport, out_dir) -> list[Path]:
    """Write ``<table>.csv`` files, ``summary.json`` and ``timing.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, (header, rows) in rep.tables.items():
        lines = [",".join(header)] + [",".join(_cell(v) for v in row) for row in rows]
        path = out / f"{name}.csv"
        _atomic_write(path, "\n".join(lines) + "\n")
        written.append(path)
    summary = {"version": __version__, "config": rep.config, "results": rep.results, "flags": rep.flags,
               "passed": rep.passed, "tables": sorted(rep.tables)}
    path = out / "summary.json"
    _atomic_write(path, json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    written.append(path)
    path = out / "timing.json"
    _atomic_write(path, json.dumps(_jsonable(rep.timing), indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written


# ---------------------------------------------------------------------------
# scenarios


def _run_bands(cfg: RunConfig, rep: RunReport):
    spec = cfg.fiber()
    tables = {}
    for j in sorted(cfg.j):
        tab = tabulate_band(spec, j, cfg.k_min, cfg.k_max, cfg.n_nodes)
        tables[j] = tab
        rep.tables[f"band_j{j}"] = (("k", "E", "dE", "disc_error"),
                                    list(zip(tab.k_nodes, tab.energies, tab.derivatives, tab.disc_errors)))
        thr = spec.b * (2 * j - 1)
        rep.results[f"band_j{j}"] = tab.report
        if spec.bc == DIRICHLET:
            rep.flags[f"j{j}_monotone"] = tab.report["violations"] == 0
            # nodes whose gap is below resolution cannot be judged either way
            rep.flags[f"j{j}_above_threshold"] = bool(np.all(tab.energies - thr > -tab.disc_errors))
    js = sorted(tables)
    for a, b in zip(js[:-1], js[1:]):
        rep.flags[f"j{b}_dominates_j{a}"] = bool(np.all(tables[b].energies > tables[a].energies))


def _run_invert(cfg: RunConfig, rep: RunReport):
    spec = cfg.fiber()
    rows = []
    for j in cfg.j:
        inv = build_inverse_band(spec, j, "decreasing")
        for s in cfg.s_values:
            k = invert_band(inv, s)
            E, err = band_value(spec, j, k)
            rows.append((j, s, k, rho_derivative(inv, s), E - spec.b * (2 * j - 1) - s, err))
        ks = [row[2] for row in rows if row[0] == j]
        order = np.argsort([row[1] for row in rows if row[0] == j])
        rep.flags[f"j{j}_rho_decreasing"] = bool(np.all(np.diff(np.array(ks)[order]) < 0))
    rep.tables["inverse_band"] = (("j", "s", "rho", "drho", "residual", "disc_error"), rows)


def _run_defect(cfg: RunConfig, rep: RunReport):
    spec = cfg.fiber()
    rows = []
    for j in cfg.j:
        lo, hi = trust_window(spec, j)
        rep.results[f"trust_window_j{j}"] = (lo, hi)
        for k in cfg.k_values:
            E, err = band_value(spec, j, k)
            gap = E - spec.b * (2 * j - 1)
            d = mode_defect(spec, j, k)
            inside = lo <= k <= hi
            ratio = gap_asymptotic_ratio(spec, j, k) if inside else math.nan
            rows.append((j, k, gap, err, d, d * k / math.sqrt(abs(gap)) if gap else math.nan, ratio, inside))
    rep.tables["defect"] = (("j", "k", "gap", "disc_error", "defect", "scaled_defect", "gap_ratio", "in_window"), rows)


def _ssf_rows(solver: SsfSolver, cfg: RunConfig, lams, operator: str):
    rows, results = [], []
    for lam in lams:
        try:
            res = solver.solve(float(lam), cfg.r, eps_scale=cfg.eps_scale)
        except NumericalError as exc:
            raise NumericalError(f"lambda={lam:.6g}: {exc}", residual=exc.residual) from exc
        br = res.bracket(operator)
        vol = volume_function(solver.P, abs(lam), HALF_PLANE)
        bN = solver.spec.b * vol
        ratio = br.midpoint / bN if bN > 0 else math.nan
        rows.append((lam, res.scheme.epsilon, res.scheme.n, res.n_minus_hi, res.n_minus_lo, res.n_plus_hi,
                     res.n_plus_lo, res.spectrum.trace_norm, vol, ratio))
        results.append({"lambda": lam, "operator": operator, "lower": br.lower, "upper": br.upper,
                        "h_max": res.scheme.meta["h_max"], "window_estimate": res.scheme.meta["window_estimate"],
                        "omitted": br.meta["omitted"]})
    return rows, results


def _run_ssf(cfg: RunConfig, rep: RunReport):
    P = cfg.potential()
    solver = SsfSolver(P, cfg.fiber(), cfg.j[0], node_budget=cfg.node_budget, grid_step=cfg.grid_step)
    sign = 1.0 if cfg.side == "above" else -1.0
    lams = sign * cfg.lambda_grid()
    rows, results = _ssf_rows(solver, cfg, lams, cfg.operator)
    rep.tables["ssf_sweep"] = (SSF_HEADER, rows)
    rep.results["sweep"] = results
    rep.results["admissibility"] = admissibility_report(P, seed=cfg.seed)
    if cfg.side == "below" and cfg.bc == DIRICHLET:
        # below the threshold every D_q > 0, so R D R is positive semidefinite and n_- vanishes
        rep.flags["below_sign_definite"] = all(row[3] == 0 and row[4] == 0 for row in rows)


def _run_toeplitz(cfg: RunConfig, rep: RunReport):
    P = cfg.potential()
    rows = []
    for lam in cfg.lambda_grid():
        win = toeplitz_window(P, lam, cfg.b)
        n = int(round((win[1] - win[0]) / cfg.dk)) + 1
        spec_rep = toeplitz_vj_spectrum(P, cfg.j[0], cfg.b, win, n)
        c = counting(spec_rep, lam).n_plus
        N = weyl_count(P, lam, cfg.b)
        rows.append((lam, n, c, N, c / N if N > 0 else math.nan, float(spec_rep.eigenvalues.min(initial=0.0))))
    rep.tables["toeplitz"] = (("lambda", "nodes", "count", "weyl", "ratio", "min_eigenvalue"), rows)
    rep.flags["psd"] = all(row[5] >= -1e-10 for row in rows)


def _run_neumann(cfg: RunConfig, rep: RunReport):
    spec = dataclasses.replace(cfg.fiber(), bc=NEUMANN)
    j = cfg.j[0]
    k_min, E_min = band_minimum(spec, j)
    k_fine, E_fine = band_minimum(dataclasses.replace(spec, n_x=2 * spec.n_x), j)
    thr = spec.b * (2 * j - 1)
    tab = tabulate_band(spec, j, cfg.k_min, cfg.k_max, cfg.n_nodes)
    rep.tables[f"neumann_band_j{j}"] = (("k", "E", "dE", "disc_error"),
                                        list(zip(tab.k_nodes, tab.energies, tab.derivatives, tab.disc_errors)))
    sign_changes = int(np.sum(np.diff(np.sign(tab.derivatives)) != 0))
    rep.results["minimum"] = {"k": k_min, "E": E_min, "E_over_b": E_min / spec.b, "E_doubled_grid": E_fine,
                              "derivative_sign_changes": sign_changes}
    rep.flags["minimum_below_threshold"] = E_min < thr
    rep.flags["minimum_stable"] = abs(E_min - E_fine) <= 1e-6
    rep.flags["unique_minimum"] = sign_changes == 1
    if cfg.node_budget:
        P = cfg.potential()
        solver = SsfSolver(P, spec, j, node_budget=cfg.node_budget, grid_step=cfg.grid_step)
        lams = cfg.lambda_grid()
        rows_a, res_a = _ssf_rows(solver, cfg, lams, H_MINUS)
        rows_b, res_b = _ssf_rows(solver, cfg, -lams, H_MINUS)
        rep.tables["neumann_ssf"] = (SSF_HEADER, rows_a + rows_b)
        rep.results["sweep"] = res_a + res_b


def _run_volume(cfg: RunConfig, rep: RunReport):
    P = cfg.potential()
    rows = []
    for lam in cfg.lambda_grid():
        rows.append((lam, volume_function(P, lam, HALF_PLANE), volume_function(P, lam, FULL_PLANE)))
    rep.tables["volume"] = (("lambda", "half_plane", "full_plane"), rows)
    half = np.array([row[1] for row in rows])
    rep.flags["nonincreasing"] = bool(np.all(np.diff(half) >= 0))  # lambdas are sorted descending
    rep.results["admissibility"] = admissibility_report(P, seed=cfg.seed)


def _run_verify(cfg: RunConfig, rep: RunReport):
    results = run_all(log=lambda line: print(line, flush=True))
    rows = [(r.number, r.status, r.passed, r.warning_only) for r in results]
    rep.tables["acceptance"] = (("criterion", "status", "passed", "warning_only"), rows)
    rep.results["criteria"] = {r.number: {"title": r.title, "status": r.status, "details": r.details}
                               for r in results}
    rep.timing.update({f"criterion_{r.number}": r.seconds for r in results})
    for r in results:
        if not r.warning_only:
            rep.flags[f"criterion_{r.number}"] = r.passed


RUNNERS = {"bands": _run_bands, "invert": _run_invert, "defect": _run_defect, "ssf": _run_ssf,
           "toeplitz": _run_toeplitz, "neumann": _run_neumann, "volume": _run_volume, "verify": _run_verify}


def run_scenario(cfg: RunConfig) -> RunReport:
    rep = RunReport(config=cfg.echo())
    t0 = time.perf_counter()
    RUNNERS[cfg.scenario](cfg, rep)
    rep.timing["wall_seconds"] = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# entry point


def _threads(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("ESL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"ESL_THREADS must be an integer, got {env!r}") from None
    return 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="edge-spectral-lab", description=__doc__.split("\n\n")[0])
    ap.add_argument("config", nargs="?", help="key = value configuration file")
    ap.add_argument("--out", help="output directory (overrides the config's 'out')")
    ap.add_argument("--threads", type=int, help="worker threads (default: ESL_THREADS or 1)")
    ap.add_argument("--verify", action="store_true", help="run the acceptance criteria after the scenario")
    args = ap.parse_args(argv)
    try:
        if args.config is None and not args.verify:
            raise ConfigError("a configuration file is required unless --verify is given")
        if args.config is not None:
            try:
                text = Path(args.config).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read {args.config}: {exc}") from None
            cfg = parse_config(text)
        else:
            cfg = RunConfig(scenario="verify")
        threads = _threads(args.threads)
        if threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out or cfg.out)
    try:
        with threadpool_limits(limits=threads):
            rep = run_scenario(cfg)
            if args.verify and cfg.scenario != "verify":
                _run_verify(cfg, rep)
        rep.timing["threads"] = threads
        emit_report(rep, out)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for name, ok in rep.flags.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return EXIT_OK if rep.passed else EXIT_PROPERTY


if __name__ == "__main__":
    sys.exit(main())
