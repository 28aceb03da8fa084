"""Command-line front end.

Every command takes the same configuration keys.  Values come from the
built-in defaults, then an optional ``--config`` file of ``key = value``
lines (``#`` starts a comment), then command-line flags, later sources
winning.  Exit codes: 0 ok, 2 configuration error, 3 validity violation
(boundary touched under ``--strict``, or an exhausted half-line window),
4 internal consistency failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .engine import (ConsistencyError, auto_half_width, run_faithful, run_optimized,
                     run_optimized_replay, trajectory_csv)
from .marks import LogFormatError, deserialize_log, generate_marks, serialize_log
from .parallel import default_jobs, map_replicas, replica_seeds

EXIT_OK, EXIT_CONFIG, EXIT_INVALID, EXIT_CONSISTENCY = 0, 2, 3, 4

log = logging.getLogger("rpng")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    lam: float = 0.0
    lam0: float = 0.0
    L: int | None = None
    T: float = 100.0
    replicas: int = 1
    seed: int = 0
    grid: str = "200"
    engine: str = "optimized"
    jobs: int | None = None
    out: str = "rpng_out"
    strict: bool = False
    svg: bool = False
    replay: str | None = None

    def validate(self) -> "RunConfig":
        for name in ("lam", "lam0", "T"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
                raise ConfigError(f"{name} must be a finite non-negative number, got {v!r}")
        if self.T <= 0:
            raise ConfigError("T must be positive")
        if self.L is not None and self.L < 1:
            raise ConfigError("L must be >= 1")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        if self.engine not in ("faithful", "optimized"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        return self

    @property
    def half_width(self) -> int:
        return self.L if self.L is not None else auto_half_width(self.lam, self.T)

    def sample_times(self, horizon: float | None = None) -> np.ndarray:
        """``grid`` is a count of uniform times on (0, T] or a comma list of times."""
        T = self.T if horizon is None else horizon
        text = str(self.grid).strip()
        try:
            if "," in text or "." in text:
                st = np.array([float(v) for v in text.split(",") if v.strip()])
            else:
                n = int(text)
                if n < 1:
                    raise ConfigError("sample grid needs at least one point")
                st = np.linspace(0.0, T, n + 1)[1:]
        except ValueError as exc:
            raise ConfigError(f"bad sample grid {text!r}: {exc}") from None
        if len(st) == 0 or np.any(np.diff(st) <= 0) or st[0] < 0 or st[-1] > T:
            raise ConfigError("sample grid must be strictly increasing inside [0, T]")
        return st


_KEYS = {f.name: f for f in fields(RunConfig)}
_ALIASES = {"lambda": "lam", "lambda0": "lam0"}
_BOOLS = {"strict", "svg"}
_INTS = {"L", "replicas", "seed", "jobs"}
_FLOATS = {"lam", "lam0", "T"}


def _coerce(key, raw):
    if raw is None:
        return None
    try:
        if key in _BOOLS:
            if isinstance(raw, bool):
                return raw
            low = str(raw).strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(raw)
            return low in ("1", "true", "yes")
        if key in _INTS:
            s = str(raw).strip()
            if s.lower() == "auto" and key == "L":
                return None
            return int(s)
        if key in _FLOATS:
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return str(raw)


def read_config_file(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        k = _ALIASES.get(k, k)
        if k not in _KEYS:
            raise ConfigError(f"{path}:{n}: unknown key {k!r}")
        out[k] = _coerce(k, v)
    return out


def build_config(ns: argparse.Namespace) -> RunConfig:
    merged = {}
    if getattr(ns, "config", None):
        merged.update(read_config_file(ns.config))
    for k in _KEYS:
        v = getattr(ns, k, None)
        if v is not None and v is not False:
            merged[k] = _coerce(k, v)
    return RunConfig(**merged).validate()


def _outdir(cfg) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_summary(cfg, outdir, command, **payload):
    doc = {"command": command, "version": __version__, "config": asdict(cfg),
           "half_width": cfg.half_width, "seed": cfg.seed, **payload}
    (outdir / "summary.json").write_text(json.dumps(doc, indent=2, default=_jsonable) + "\n")
    return doc


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v))


def _load_log(path):
    try:
        return deserialize_log(Path(path).read_bytes())
    except OSError as exc:
        raise ConfigError(f"cannot read mark log: {exc}") from None


# --- commands ---------------------------------------------------------------

def cmd_simulate(cfg: RunConfig) -> int:
    from .height import HeightProfile, profile_svg

    outdir = _outdir(cfg)
    if cfg.replay:
        logs = [_load_log(cfg.replay)]
        st = cfg.sample_times(logs[0].horizon)
        run = run_faithful if cfg.engine == "faithful" else run_optimized_replay
        trajs = [run(logs[0], st)]
    else:
        st = cfg.sample_times()
        seeds = replica_seeds(cfg.seed, cfg.replicas)
        L = cfg.half_width
        if cfg.engine == "faithful":
            def one(s):
                return run_faithful(generate_marks(cfg.lam, cfg.lam0, L, cfg.T, s), st)
        else:
            def one(s):
                return run_optimized(cfg.lam, cfg.lam0, L, cfg.T, s, st)
        trajs = map_replicas(one, seeds, cfg.jobs)
    for r, tr in enumerate(trajs):
        (outdir / f"trajectory_{r}.csv").write_text(trajectory_csv([tr]))
    if cfg.svg:
        profiles = [HeightProfile(-tr.half_width, tr.final_heights, float(tr.times[-1]))
                    for tr in trajs[:4]]
        (outdir / "profile.svg").write_text(profile_svg(profiles))
    touched = [tr.boundary_touched for tr in trajs]
    _write_summary(cfg, outdir, "simulate",
                   final_h_e0=[int(tr.origin_heights[-1]) for tr in trajs],
                   boundary_touched=touched)
    if cfg.strict and any(touched):
        log.error("boundary touched in %d replica(s)", sum(touched))
        return EXIT_INVALID
    return EXIT_OK


def cmd_couple(cfg: RunConfig) -> int:
    from .coupling import (coupled_trace_csv, delta_csv, run_coupled, run_coupled_stream,
                           virtual_field_csv, virtual_symmetry_audit)

    outdir = _outdir(cfg)
    if cfg.replay:
        lg = _load_log(cfg.replay)
        runs = [run_coupled(lg, cfg.sample_times(lg.horizon), strict=False)]
    else:
        st = cfg.sample_times()
        runs = map_replicas(lambda s: run_coupled_stream(cfg.lam, cfg.lam0, cfg.half_width, cfg.T, s,
                                                         st, strict=False),
                            replica_seeds(cfg.seed, cfg.replicas), cfg.jobs)
    for r, run in enumerate(runs):
        (outdir / f"coupled_trace_{r}.csv").write_text(coupled_trace_csv(run))
        (outdir / f"virtual_field_{r}.csv").write_text(virtual_field_csv(run))
        (outdir / f"delta_{r}.csv").write_text(delta_csv(run))
    mono = sum(r.monotonicity_violations for r in runs)
    dom = sum(sum(r.domination_violations) for r in runs)
    audit = virtual_symmetry_audit(runs)
    _write_summary(cfg, outdir, "couple",
                   monotonicity_violations=mono, domination_violations=dom,
                   t_star=[r.t_star for r in runs],
                   final_h_tilde_e0=[int(r.column(0, True)[-1] - r.column(0)[-1]) for r in runs],
                   virtual_jumps={"left": audit.left, "right": audit.right, "pvalue": audit.pvalue},
                   boundary_touched=[r.touched for r in runs])
    if mono or dom:
        log.error("coupling check failed: %d monotonicity, %d domination violations", mono, dom)
        return EXIT_CONSISTENCY
    if cfg.strict and any(r.touched for r in runs):
        return EXIT_INVALID
    return EXIT_OK


def cmd_scan(cfg: RunConfig, lam0_grid) -> int:
    from .estimators import phase_scan, phase_scan_csv, phase_scan_svg, theory_speed

    outdir = _outdir(cfg)
    scan = phase_scan(cfg.lam, lam0_grid, cfg.T, cfg.replicas, cfg.seed, jobs=cfg.jobs,
                      half_width=cfg.L)
    (outdir / "phase_scan.csv").write_text(phase_scan_csv(scan))
    (outdir / "phase_scan.svg").write_text(phase_scan_svg(scan))
    _write_summary(cfg, outdir, "scan", grid=list(lam0_grid), critical_estimate=scan.critical,
                   supercritical_slope=scan.supercritical_slope(),
                   points=[{"lambda0": p.lam0, "v_hat_e0": p.origin.v_hat,
                            "stderr_e0": p.origin.stderr, "theory": theory_speed(cfg.lam, p.lam0)}
                           for p in scan.points])
    return EXIT_OK


def cmd_halfline(cfg: RunConfig, exclusion: bool) -> int:
    from .halfline import halfline_csv, run_exclusion_replicas, run_halfline_replicas

    outdir = _outdir(cfg)
    st = cfg.sample_times()
    if cfg.lam0 <= 0:
        raise ConfigError("halfline needs lambda0 > 0")
    runs = run_halfline_replicas(cfg.lam0, cfg.T, cfg.replicas, cfg.seed, sample_times=st,
                                 jobs=cfg.jobs, strict=False)
    (outdir / "halfline.csv").write_text(halfline_csv(runs, "N_t"))
    nt = np.array([r.final for r in runs]) / cfg.T
    payload = {"mean_N_T_over_T": float(nt.mean()), "exhausted": any(r.exhausted for r in runs)}
    if exclusion:
        ex = run_exclusion_replicas(cfg.T, cfg.replicas, cfg.seed + 1, sample_times=st,
                                    jobs=cfg.jobs, strict=False)
        (outdir / "exclusion.csv").write_text(halfline_csv(ex, "rightmost"))
        payload["mean_rightmost_over_T"] = float(np.mean([r.final for r in ex]) / cfg.T)
        payload["exhausted"] = payload["exhausted"] or any(r.exhausted for r in ex)
    _write_summary(cfg, outdir, "halfline", **payload)
    print(f"N_T/T = {payload['mean_N_T_over_T']:.4f} over {cfg.replicas} replicas")
    return EXIT_INVALID if payload["exhausted"] else EXIT_OK


def cmd_levellines(cfg: RunConfig) -> int:
    from .level_lines import level_lines_json, level_lines_svg, trace_level_lines

    outdir = _outdir(cfg)
    lg = _load_log(cfg.replay) if cfg.replay else generate_marks(cfg.lam, cfg.lam0, cfg.half_width,
                                                                 cfg.T, cfg.seed)
    lines = trace_level_lines(lg)
    (outdir / "level_lines.json").write_text(level_lines_json(lines))
    (outdir / "level_lines.svg").write_text(level_lines_svg(lines))
    _write_summary(cfg, outdir, "levellines", layers=len(lines.layers),
                   loops=len(lines.loops()), open_curves=len(lines.open_curves()))
    return EXIT_OK


def cmd_replay(cfg: RunConfig, compare: bool, save_log: str | None) -> int:
    outdir = _outdir(cfg)
    if save_log:
        lg = generate_marks(cfg.lam, cfg.lam0, cfg.half_width, cfg.T, cfg.seed)
        Path(save_log).write_bytes(serialize_log(lg))
        print(f"wrote {len(lg)} marks to {save_log}")
        return EXIT_OK
    if not cfg.replay:
        raise ConfigError("replay needs --log FILE (or --save FILE to create one)")
    lg = _load_log(cfg.replay)
    st = cfg.sample_times(lg.horizon)
    run = run_faithful if cfg.engine == "faithful" else run_optimized_replay
    tr = run(lg, st)
    (outdir / "trajectory_0.csv").write_text(trajectory_csv([tr]))
    identical = None
    if compare:
        a = run_faithful(lg, st).to_bytes()
        b = run_optimized_replay(lg, st).to_bytes()
        identical = a == b
    _write_summary(cfg, outdir, "replay", marks=len(lg), engines_identical=identical,
                   final_h_e0=int(tr.origin_heights[-1]))
    if identical is False:
        log.error("faithful and optimized replays differ")
        return EXIT_CONSISTENCY
    return EXIT_OK


# --- argument parsing -------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--lambda", dest="lam", type=str, help="bulk nucleation rate")
    common.add_argument("--lambda0", dest="lam0", type=str, help="defect nucleation rate")
    common.add_argument("--L", dest="L", type=str, help="window half-width or 'auto'")
    common.add_argument("--T", dest="T", type=str, help="horizon")
    common.add_argument("--replicas", type=str)
    common.add_argument("--seed", type=str)
    common.add_argument("--grid", type=str,
                        help="sample grid: count or comma list of times (scan: lambda0 values)")
    common.add_argument("--engine", choices=("faithful", "optimized"))
    common.add_argument("--jobs", type=str, help=f"worker threads (default {default_jobs()})")
    common.add_argument("--out", type=str, help="output directory")
    common.add_argument("--strict", action="store_true", help="exit 3 if the window is touched")
    common.add_argument("--svg", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="rpng", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="homogeneous or defect runs")
    s.add_argument("--replay", help="serialized mark log to drive the run")
    s = sub.add_parser("couple", parents=[common], help="base and defect systems on shared marks")
    s.add_argument("--replay", help="serialized mark log")
    sub.add_parser("scan", parents=[common], help="phase scan over --grid lambda0 values")
    s = sub.add_parser("halfline", parents=[common], help="wall model pedestal count")
    s.add_argument("--exclusion", action="store_true", help="also run the exclusion process")
    s = sub.add_parser("levellines", parents=[common], help="space-time level lines")
    s.add_argument("--replay", help="serialized mark log")
    s = sub.add_parser("replay", parents=[common], help="replay a serialized mark log")
    s.add_argument("--log", dest="replay", help="serialized mark log")
    s.add_argument("--compare", action="store_true", help="check both engines agree byte for byte")
    s.add_argument("--save", help="generate a log from the configuration and write it here")
    return p


def main(argv=None) -> int:
    parser = _parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        lam0_grid = None
        if ns.command == "scan":
            if not ns.grid:
                raise ConfigError("scan needs --grid with lambda0 values")
            try:
                lam0_grid = [float(v) for v in ns.grid.split(",") if v.strip()]
            except ValueError:
                raise ConfigError(f"bad lambda0 grid {ns.grid!r}") from None
            if any(b <= a for a, b in zip(lam0_grid, lam0_grid[1:])) or any(v < 0 for v in lam0_grid):
                raise ConfigError("lambda0 grid must be non-negative and strictly increasing")
            ns.grid = None
        cfg = build_config(ns)
        if ns.command == "simulate":
            return cmd_simulate(cfg)
        if ns.command == "couple":
            return cmd_couple(cfg)
        if ns.command == "scan":
            return cmd_scan(cfg, lam0_grid)
        if ns.command == "halfline":
            return cmd_halfline(cfg, ns.exclusion)
        if ns.command == "levellines":
            return cmd_levellines(cfg)
        return cmd_replay(cfg, ns.compare, ns.save)
    except (ConfigError, LogFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConsistencyError as exc:
        print(f"consistency failure: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY


if __name__ == "__main__":
    sys.exit(main())
