"""Command-line experiment runner.

Subcommands
-----------
sweep    Monte-Carlo sweep over CR, Eb/N0, criteria and solvers.
rtilde   Convexity-transition radius table at ``d_min = 1``.
bounds   Cardinality-bound table for a CR grid.

Every subcommand accepts ``--config FILE`` naming a JSON object whose keys
are flag names (``"ebn0-db"`` or ``"ebn0_db"``).  Explicit flags override the
file, and the file overrides the built-in defaults.

Exit codes: 0 success, 2 configuration error, 3 runtime or solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import channel, pipeline, reliability, selection, stats
from .pipeline import LinkParams, ReceiverConfig

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

SWEEP_COLUMNS = ("cr", "ebn0_db", "criterion", "solver", "stage", "nsr_mean", "nsr_se",
                 "ser_mean", "ser_se", "ser_unmit", "rate_unmit", "rate_mit", "rate_oracle",
                 "m_used", "wall_ms", "wall_pct")
RTILDE_COLUMNS = ("sigma_d2_ratio", "r_exact", "r_approx", "status")
BOUNDS_COLUMNS = ("cr", "ebn0_db", "sigma_d2_ratio", "r_o_ratio", "disk_ratio", "square_ratio",
                  "m_tau_disk", "m_tau_square", "m_gamma")


class ConfigError(ValueError):
    pass


# --- parsing ----------------------------------------------------------------------

def parse_grid(text: str) -> list[float]:
    """``"1.2,1.4"`` or ``"1.2:2.4:0.2"`` (inclusive end)."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(t) for t in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
                raise ConfigError(f"bad range {text!r}; expected start:stop:step")
            a, b, step = parts
            count = int(math.floor((b - a) / step + 1e-9)) + 1
            vals = [round(a + i * step, 10) for i in range(count)]
        else:
            vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse grid {text!r}") from exc
    if not vals:
        raise ConfigError("empty grid")
    return vals


_LEAF = re.compile(r"^leaf(?:\((?P<a>[^)]*)\)|:(?P<b>.*))?$")


@dataclass(frozen=True)
class CriterionSpec:
    criterion: str
    mu: float

    @property
    def label(self) -> str:
        if self.criterion == "leaf" or self.criterion == "adaptive":
            return f"{self.criterion}({self.mu:g})"
        return self.criterion


def parse_criterion(text: str, default_mu: float) -> CriterionSpec:
    text = text.strip().lower()
    m = _LEAF.match(text)
    if m:
        raw = m.group("a") or m.group("b")
        try:
            mu = float(raw) if raw else default_mu
        except ValueError as exc:
            raise ConfigError(f"bad leaf parameter in {text!r}") from exc
        if not 0.5 <= mu <= 1.0:
            raise ConfigError("leaf parameter must lie in [0.5, 1]")
        return CriterionSpec("leaf", mu)
    try:
        crit = reliability.Criterion(text)
    except ValueError as exc:
        names = ", ".join(c.value for c in reliability.Criterion)
        raise ConfigError(f"unknown criterion {text!r} (choose from {names})") from exc
    return CriterionSpec(crit.value, default_mu)


def split_list(text: str) -> list[str]:
    # commas inside parentheses belong to the item
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return [s.strip() for s in out if s.strip()]


# --- sweep --------------------------------------------------------------------------

@dataclass
class SweepConfig:
    n: int = 256
    qam: int = 64
    cr_grid: list = field(default_factory=lambda: [1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4])
    ebn0_db_grid: list = field(default_factory=lambda: [20.0])
    trials: int = 100
    l_h: int = 16
    criteria: list = field(default_factory=lambda: [CriterionSpec("exact", 0.95)])
    solvers: list = field(default_factory=lambda: ["none"])
    stage1_m: int | None = 64
    stage2_m: int | None = None
    tau: float = 0.9
    seed: int = 0
    threads: int = 1
    timing: bool = False
    cnr: str = "lambda"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.cr_grid or not self.ebn0_db_grid or not self.criteria or not self.solvers:
            raise ConfigError("grids must be nonempty")
        if any(c <= 0 for c in self.cr_grid):
            raise ConfigError("CR values must be positive")
        for s in self.solvers:
            if s not in ("none", "pabmp", "wpal"):
                raise ConfigError(f"unknown solver {s!r}")
        if self.qam not in (4, 16, 64, 256):
            raise ConfigError(f"unsupported QAM order {self.qam}")
        if self.n < 2 or self.l_h < 1 or self.l_h > self.n:
            raise ConfigError("need N >= 2 and 1 <= L_h <= N")
        for m in (self.stage1_m, self.stage2_m):
            if m is not None and not 0 < m <= self.n:
                raise ConfigError("tone budgets must lie in [1, N]")
        if not 0 < self.tau < 1:
            raise ConfigError("tau must lie in (0, 1)")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.cnr not in ("lambda", "ecs"):
            raise ConfigError(f"unknown reselection rule {self.cnr!r}")

    def receivers(self) -> list[tuple[CriterionSpec, str, ReceiverConfig]]:
        out = []
        for spec in self.criteria:
            for solver in self.solvers:
                out.append((spec, solver, ReceiverConfig(
                    criterion=spec.criterion, mu=spec.mu, tau=self.tau, stage1_m=self.stage1_m,
                    solver=solver, stage2_enabled=self.stage2_m is not None and solver != "none",
                    stage2_m=self.stage2_m, cnr=self.cnr)))
        return out


def _cell_task(args):
    cfg, cell, cr, ebn0, trial_ids = args
    link = LinkParams(n=cfg.n, order=cfg.qam, cr=cr, ebn0_db=ebn0, l_h=cfg.l_h)
    rx = cfg.receivers()
    per = {j: [] for j in range(len(rx))}
    for t in trial_ids:
        trial = pipeline.simulate_trial(link, np.random.default_rng([cfg.seed, cell, t]))
        for j, (_, _, rcfg) in enumerate(rx):
            rng = np.random.default_rng([cfg.seed, cell, t, 1 + j])
            t0 = time.perf_counter()
            out = pipeline.run_receiver(trial.received, trial.channel, link, rcfg, rng=rng)
            wall = time.perf_counter() - t0
            res = pipeline.score_trial(trial, out, link)
            per[j].append((res, out.timings, wall))
    return cell, per


def _mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def _stage_wall(timings: dict, stage: int) -> float:
    keys = ["scoring"] + [f"stage{s}" for s in range(1, stage + 1)]
    return sum(timings.get(k, 0.0) for k in keys)


def run_sweep(cfg: SweepConfig) -> list[dict]:
    cells = [(c, cr, e) for c, (cr, e) in
             enumerate((cr, e) for cr in cfg.cr_grid for e in cfg.ebn0_db_grid)]
    tasks = [(cfg, c, cr, e, list(range(cfg.trials))) for c, cr, e in cells]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as ex:
            results = dict(ex.map(_cell_task, tasks))
    else:
        results = dict(_cell_task(t) for t in tasks)

    rx = cfg.receivers()
    rows = []
    for c, cr, e in cells:
        for j, (spec, solver, rcfg) in enumerate(rx):
            trials = results[c][j]
            stages = [2] if rcfg.stage2_enabled else []
            stages = [1] + stages
            for s in stages:
                nsr_m, nsr_se = _mean_se([r.nsr[s] for r, _, _ in trials if s in r.nsr])
                dec_stage = s if solver != "none" else 0
                ser_m, ser_se = _mean_se([r.ser[dec_stage] for r, _, _ in trials])
                rate_mit = (float(np.mean([r.rate_mitigated[s] for r, _, _ in trials]))
                            if solver != "none" else float("nan"))
                m_key = "stage1" if s == 1 else "stage2"
                rows.append({
                    "cr": cr, "ebn0_db": e, "criterion": spec.label, "solver": solver,
                    "stage": s if solver != "none" else 0,
                    "nsr_mean": nsr_m, "nsr_se": nsr_se, "ser_mean": ser_m, "ser_se": ser_se,
                    "ser_unmit": float(np.mean([r.ser[0] for r, _, _ in trials])),
                    "rate_unmit": float(np.mean([r.rate_unmitigated for r, _, _ in trials])),
                    "rate_mit": rate_mit,
                    "rate_oracle": float(np.nanmean([r.rate_oracle for r, _, _ in trials]))
                    if solver != "none" else float("nan"),
                    "m_used": float(np.mean([r.m[m_key] for r, _, _ in trials])),
                    "wall_ms": 1e3 * float(np.mean([_stage_wall(tm, s) for _, tm, _ in trials]))
                    if cfg.timing else None,
                    "wall_pct": None,
                })
    if cfg.timing and rows:
        top = max(r["wall_ms"] for r in rows)
        for r in rows:
            r["wall_pct"] = 100.0 * r["wall_ms"] / top if top > 0 else 0.0
    return rows


# --- tables ---------------------------------------------------------------------------

def emit_rtilde_table(sigma_grid, d_min: float = 1.0) -> list[dict]:
    rows = []
    for ratio in sigma_grid:
        try:
            exact, approx = reliability.r_tilde(d_min, ratio * d_min**2)
            rows.append({"sigma_d2_ratio": ratio, "r_exact": exact, "r_approx": approx,
                         "status": "ok"})
        except (reliability.RegimeError, ValueError) as exc:
            rows.append({"sigma_d2_ratio": ratio, "r_exact": None, "r_approx": None,
                         "status": f"domain: {exc}"})
    return rows


def emit_bounds_table(cr_grid, ebn0_grid, ro_grid, n: int, order: int, tau: float,
                      kappa: float = 2.0) -> list[dict]:
    """Per-tone ratios and cardinalities at unit channel gain."""
    link0 = LinkParams(n=n, order=order)
    d = link0.constellation.d_min
    rows = []
    for cr in cr_grid:
        for e in ebn0_grid:
            link = replace(link0, cr=cr, ebn0_db=e)
            sc2 = stats.sigma_c2(stats.SIGMA_ABS_X, link.gamma)
            sd2 = sc2 + link.noise_var
            m_gamma = selection.gamma_cardinality(
                stats.expected_support(n, stats.SIGMA_ABS_X, link.gamma), n, kappa)
            for ro in ro_grid:
                r_o = ro * d
                rows.append({
                    "cr": cr, "ebn0_db": e, "sigma_d2_ratio": sd2 / d**2, "r_o_ratio": ro,
                    "disk_ratio": selection.disk_ratio(r_o, d, sd2),
                    "square_ratio": selection.square_ratio(r_o, d, sd2),
                    "m_tau_disk": min(n, selection.tau_cardinality(tau, d, sd2, r_o=r_o)),
                    "m_tau_square": min(n, selection.tau_cardinality(tau, d, sd2, r_o=r_o,
                                                                     bound="square")),
                    "m_gamma": m_gamma,
                })
    return rows


# --- output ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(round(v, 12))
    return str(v)


def to_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def to_json(rows: list[dict], columns) -> str:
    def clean(v):
        if isinstance(v, float) and math.isnan(v):
            return None
        return v
    return json.dumps({"columns": list(columns),
                       "rows": [{c: clean(r[c]) for c in columns} for r in rows]}, indent=1) + "\n"


def write_output(rows, columns, out: str | None, fmt: str) -> None:
    text = to_csv(rows, columns) if fmt == "csv" else to_json(rows, columns)
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


# --- argument handling ----------------------------------------------------------------

def load_config_file(path: str) -> dict:
    """Read a JSON config file into argparse defaults keyed by destination name."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    out = {}
    for key, val in raw.items():
        if isinstance(val, list):
            val = ",".join(str(v) for v in val)
        elif isinstance(val, (int, float)) and not isinstance(val, bool) \
                and key.replace("-", "_") in _STRING_FLAGS:
            val = str(val)
        out[key.replace("-", "_")] = val
    return out


# flags parsed from text after argparse; config values for these are stringified
_STRING_FLAGS = {"cr", "ebn0_db", "criterion", "solver", "stage1_m", "sigma", "ro"}


def build_parser(file_defaults: dict | None = None) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clipfix", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--n", type=int, default=256)
        p.add_argument("--qam", type=int, default=64)
        p.add_argument("--cr", default="1.2:2.4:0.2")
        p.add_argument("--ebn0-db", default="20")
        p.add_argument("--tau", type=float, default=0.9)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    sw = sub.add_parser("sweep", help="Monte-Carlo sweep")
    common(sw)
    sw.add_argument("--trials", type=int, default=100)
    sw.add_argument("--lh", type=int, default=16)
    sw.add_argument("--criterion", default="exact",
                    help="comma list, e.g. exact,trunc,circle,leaf(0.65),leaf:0.95")
    sw.add_argument("--solver", default="none", help="comma list of none, pabmp, wpal")
    sw.add_argument("--stage1-m", default="64", help="tone budget or 'auto'")
    sw.add_argument("--stage2-m", type=int, default=None)
    sw.add_argument("--mu", type=float, default=0.95)
    sw.add_argument("--cnr", choices=("lambda", "ecs"), default="lambda",
                    help="second-stage reselection rule (high- or low-SNR form)")
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--threads", type=int, default=None)
    sw.add_argument("--timing", action="store_true",
                    help="fill wall_ms/wall_pct (makes output run-dependent)")

    rt = sub.add_parser("rtilde", help="transition radius table at d_min = 1")
    rt.add_argument("--sigma", default="0.01:0.5:0.01", help="grid of sigma_D^2 / d_min^2")
    rt.add_argument("--out", default=None)
    rt.add_argument("--format", choices=("csv", "json"), default="csv")

    bd = sub.add_parser("bounds", help="cardinality-bound table")
    common(bd)
    bd.add_argument("--ro", default="0.1,0.2,0.3,0.4", help="r_o / d_min grid")
    bd.add_argument("--kappa", type=float, default=2.0)

    for sp in (sw, rt, bd):
        sp.add_argument("--config", default=None, help="JSON file of flag defaults")
    if file_defaults:
        known = {a.dest for sp in (sw, rt, bd) for a in sp._actions}
        unknown = sorted(set(file_defaults) - known - {"help", "config"})
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for sp in (sw, rt, bd):
            dests = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in file_defaults.items() if k in dests})
    return ap


def _threads(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("CLIPFIX_THREADS")
    if env is None:
        return 1
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError(f"CLIPFIX_THREADS must be an integer, got {env!r}") from exc


def sweep_config_from_args(a) -> SweepConfig:
    crits = [parse_criterion(t, a.mu) for t in split_list(a.criterion)]
    stage1 = None if a.stage1_m.strip().lower() == "auto" else int(a.stage1_m)
    return SweepConfig(n=a.n, qam=a.qam, cr_grid=parse_grid(a.cr), ebn0_db_grid=parse_grid(a.ebn0_db),
                       trials=a.trials, l_h=a.lh, criteria=crits, solvers=split_list(a.solver),
                       stage1_m=stage1, stage2_m=a.stage2_m, tau=a.tau, seed=a.seed,
                       threads=_threads(a.threads), timing=a.timing, cnr=a.cnr)


def main(argv=None) -> int:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    try:
        path = pre.parse_known_args(argv)[0].config
        ap = build_parser(load_config_file(path) if path else None)
    except ConfigError as exc:
        print(f"clipfix: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if a.command == "sweep":
            cfg = sweep_config_from_args(a)
        elif a.command == "rtilde":
            grid = parse_grid(a.sigma)
        else:
            grid = (parse_grid(a.cr), parse_grid(a.ebn0_db), parse_grid(a.ro))
            if not 0 < a.tau < 1:
                raise ConfigError("tau must lie in (0, 1)")
            if any(not 0 < r < 0.5 for r in grid[2]):
                raise ConfigError("r_o / d_min must lie in (0, 0.5)")
            if a.qam not in (4, 16, 64, 256):
                raise ConfigError(f"unsupported QAM order {a.qam}")
    except (ConfigError, ValueError) as exc:
        print(f"clipfix: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if a.command == "sweep":
            rows, cols = run_sweep(cfg), SWEEP_COLUMNS
        elif a.command == "rtilde":
            rows, cols = emit_rtilde_table(grid), RTILDE_COLUMNS
        else:
            rows, cols = emit_bounds_table(*grid, n=a.n, order=a.qam, tau=a.tau,
                                           kappa=a.kappa), BOUNDS_COLUMNS
        write_output(rows, cols, a.out, a.format)
    except (channel.SingularChannelError, FloatingPointError, np.linalg.LinAlgError,
            OSError, RuntimeError, ValueError) as exc:
        print(f"clipfix: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
