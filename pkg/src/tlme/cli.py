"""Command-line front end.

Subcommands: simulate, compare, terms, stable, initcorr. Settings come from
flags and from an optional key=value file (``--config``); flags win.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .analysis import backflow_witness, distance_series, ic_superoperators_closed_form, superoperator_norm
from .bath import BathSpec, QuadratureError
from .evolve import ExperimentConfig, InvariantError, Trajectory, run_experiment
from .generator import ConvergenceError
from .markov_terms import enumerate_terms
from .stable import CUTOFFS, STable, build_stable, table_is_complete
from .superop import ELEMENT_LABELS

log = logging.getLogger("tlme")

SCHEMES = {"bm": "BM", "born": "Born", "nbm": "NBM"}
TRAJECTORY_HEADER = "t,p_excited,re_coh,im_coh,trace_err"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    g_c: float = 0.2
    g_d: float = 0.2
    beta: float = 10.0
    omega_c: float = 10.0
    scheme: str = "nbm"
    cutoff: int = 5
    markov_order: int = 2
    t_max: float = 50.0
    dt: float = 0.005
    out: str | None = None
    sweep: tuple[float, ...] = ()
    n: int = 3

    def validate(self) -> "SimConfig":
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {sorted(SCHEMES)}")
        if self.cutoff not in CUTOFFS:
            raise ConfigError(f"cutoff must be one of {CUTOFFS}")
        if not 0 <= self.markov_order <= 2:
            raise ConfigError("markov-order must lie in 0..2")
        for name in ("g_d", "beta", "omega_c", "t_max", "dt"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name.replace('_', '-')} must be positive")
        for g in (self.g_c, *self.sweep):
            if not (g >= 0 and math.isfinite(g)):
                raise ConfigError("coupling must be finite and nonnegative")
        if not math.isfinite(self.omega_c) or not math.isfinite(self.dt) or not math.isfinite(self.t_max):
            raise ConfigError("omega-c, t-max and dt must be finite")
        if self.dt > self.t_max:
            raise ConfigError("dt exceeds t-max")
        return self

    @property
    def bath(self) -> BathSpec:
        return BathSpec(self.beta, self.omega_c)

    def experiment(self, g_c: float | None = None) -> ExperimentConfig:
        return ExperimentConfig(
            g_c=self.g_c if g_c is None else g_c,
            g_d=self.g_d,
            bath=self.bath,
            t_max=self.t_max,
            dt=self.dt,
            cutoff=self.cutoff,
            markov_order=self.markov_order,
        )


# key -> (field, parser)
_KEYS = {
    "gc": ("g_c", None),
    "g_c": ("g_c", None),
    "gd": ("g_d", float),
    "g_d": ("g_d", float),
    "beta": ("beta", float),
    "omega_c": ("omega_c", float),
    "omega-c": ("omega_c", float),
    "scheme": ("scheme", str),
    "cutoff": ("cutoff", int),
    "markov_order": ("markov_order", int),
    "markov-order": ("markov_order", int),
    "t_max": ("t_max", float),
    "t-max": ("t_max", float),
    "dt": ("dt", float),
    "out": ("out", str),
    "n": ("n", int),
}


def _parse_couplings(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad coupling list {text!r}") from exc
    if not values:
        raise ConfigError("empty coupling list")
    return values


def _assign(values: dict, key: str, raw: str, origin: str) -> None:
    if key not in _KEYS:
        raise ConfigError(f"{origin}: unknown key {key!r}")
    name, parse = _KEYS[key]
    try:
        if name == "g_c":
            couplings = _parse_couplings(raw)
            values["g_c"] = couplings[0]
            values["sweep"] = couplings
        else:
            values[name] = parse(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{origin}: bad value for {key!r}: {raw!r}") from exc


def read_config_file(path: str | os.PathLike) -> dict:
    values: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, raw = line.split("=", 1)
        _assign(values, key.strip().lower(), raw, f"{path}:{lineno}")
    return values


def resolve_config(args: argparse.Namespace) -> SimConfig:
    values: dict = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key in ("gc", "gd", "beta", "omega_c", "scheme", "cutoff", "markov_order", "t_max", "dt", "out"):
        raw = getattr(args, key, None)
        if raw is not None:
            _assign(values, key, str(raw), "command line")
    if getattr(args, "n", None) is not None:
        values["n"] = args.n
    known = {f.name for f in fields(SimConfig)}
    return replace(SimConfig(), **{k: v for k, v in values.items() if k in known}).validate()


# --- output --------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_atomic(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trajectory_csv(traj: Trajectory) -> str:
    lines = [TRAJECTORY_HEADER]
    coh = traj.coherence
    for t, p, c, e in zip(traj.times, traj.p_excited, coh, traj.trace_error):
        lines.append(",".join((_fmt(t), _fmt(p), _fmt(c.real), _fmt(c.imag), _fmt(e))))
    return "\n".join(lines) + "\n"


def series_csv(times, columns: dict[str, np.ndarray]) -> str:
    lines = [",".join(["t", *columns])]
    for i, t in enumerate(times):
        lines.append(",".join([_fmt(t), *(_fmt(col[i]) for col in columns.values())]))
    return "\n".join(lines) + "\n"


def _gc_tag(g: float) -> str:
    return f"gc_{g:g}"


def _print_config(cfg: SimConfig, out) -> None:
    print("# configuration", file=out)
    for f in fields(SimConfig):
        value = getattr(cfg, f.name)
        if f.name == "sweep":
            value = ",".join(f"{g:g}" for g in value) if value else "-"
        print(f"#   {f.name} = {value}", file=out)


def _print_table_summary(table: STable, out) -> None:
    status = "complete" if table.complete else "incomplete (unvalidated results)"
    print(f"# S-table cutoff {table.cutoff}: {status}", file=out)
    for key in table.orders:
        label = "validated" if STable.is_validated(key) else "unvalidated order"
        print(f"#   S^({key[0]})_{key[1]}: {label}", file=out)


def _thread_count(jobs: int) -> int:
    raw = os.environ.get("TLME_THREADS")
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = max(1, int(raw))
        except ValueError:
            raise ConfigError("TLME_THREADS must be an integer")
    return max(1, min(cap, jobs))


# --- subcommands ---------------------------------------------------------


def cmd_simulate(cfg: SimConfig, out) -> int:
    table = build_stable(cfg.g_c, cfg.bath, cfg.cutoff)
    _print_config(cfg, out)
    _print_table_summary(table, out)
    result = run_experiment(cfg.experiment(), table)
    traj = result.trajectories[SCHEMES[cfg.scheme]]
    path = cfg.out or f"trajectory_{cfg.scheme}_{_gc_tag(cfg.g_c)}.csv"
    write_atomic(path, trajectory_csv(traj))
    print(f"wrote {path}", file=out)
    return 0


def _compare_point(cfg: SimConfig, base: STable, g: float, root: Path) -> tuple[float, float, float, float, float]:
    table = base.scaled(g) if base.g_c != 0 else build_stable(g, cfg.bath, cfg.cutoff)
    result = run_experiment(cfg.experiment(g), table)
    folder = root / _gc_tag(g)
    for name, traj in result.trajectories.items():
        write_atomic(folder / f"trajectory_{name}.csv", trajectory_csv(traj))
    d_bm = distance_series(result.bm, result.nbm, "D_BM_NBM")
    d_born = distance_series(result.born, result.nbm, "D_Born_NBM")
    for s in (d_bm, d_born):
        write_atomic(folder / f"{s.label}.csv", series_csv(s.times, {"D": s.values}))
    return g, d_bm.peak, d_bm.peak_time, backflow_witness(d_bm), d_born.peak


def cmd_compare(cfg: SimConfig, out) -> int:
    couplings = cfg.sweep or (cfg.g_c,)
    base = build_stable(1.0, cfg.bath, cfg.cutoff)
    _print_config(cfg, out)
    _print_table_summary(base, out)
    root = Path(cfg.out or "compare")
    with ThreadPoolExecutor(max_workers=_thread_count(len(couplings))) as pool:
        rows = list(pool.map(lambda g: _compare_point(cfg, base, g, root), couplings))
    print("g_c,peak_D_BM_NBM,peak_time,backflow,peak_D_Born_NBM", file=out)
    for row in rows:
        print(",".join(_fmt(x) for x in row), file=out)
    return 0


def cmd_terms(cfg: SimConfig, out) -> int:
    for seq in enumerate_terms(cfg.n):
        print(",".join(str(f) for f in seq), file=out)
    return 0


def cmd_stable(cfg: SimConfig, out) -> int:
    table = build_stable(cfg.g_c, cfg.bath, cfg.cutoff)
    _print_config(cfg, out)
    _print_table_summary(table, out)
    lines = ["k,l,row,col,re,im,status"]
    for k, l in table.orders:
        status = "validated" if STable.is_validated((k, l)) else "unvalidated order"
        m = table[(k, l)]
        for i in range(4):
            for j in range(4):
                lines.append(f"{k},{l},{ELEMENT_LABELS[i]},{ELEMENT_LABELS[j]},{_fmt(m[i, j].real)},{_fmt(m[i, j].imag)},{status}")
    text = "\n".join(lines) + "\n"
    if cfg.out:
        write_atomic(cfg.out, text)
        print(f"wrote {cfg.out}", file=out)
    else:
        out.write(text)
    return 0


def cmd_initcorr(cfg: SimConfig, out) -> int:
    _print_config(cfg, out)
    n = int(round(cfg.t_max / cfg.dt))
    times = cfg.dt * np.arange(n + 1)
    columns = {}
    for k in range(3):
        values = ic_superoperators_closed_form(k, times, cfg.g_c, cfg.bath)
        columns[f"norm_k{k}"] = superoperator_norm(values)
    path = cfg.out or f"initcorr_{_gc_tag(cfg.g_c)}.csv"
    write_atomic(path, series_csv(times, columns))
    print(f"wrote {path}", file=out)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "terms": cmd_terms,
    "stable": cmd_stable,
    "initcorr": cmd_initcorr,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value settings file")
    common.add_argument("--scheme", choices=sorted(SCHEMES))
    common.add_argument("--gc", help="coupling, or a comma-separated list for compare")
    common.add_argument("--gd", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--omega-c", dest="omega_c", type=float)
    common.add_argument("--cutoff", type=int)
    common.add_argument("--markov-order", dest="markov_order", type=int)
    common.add_argument("--t-max", dest="t_max", type=float)
    common.add_argument("--dt", type=float)
    common.add_argument("--out")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="tlme", description="Time-local master equation for a driven qubit.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="one decay trajectory")
    sub.add_parser("compare", parents=[common], help="BM, Born and NBM runs with distance series")
    terms = sub.add_parser("terms", parents=[common], help="list the product terms A_n")
    terms.add_argument("--n", type=int)
    sub.add_parser("stable", parents=[common], help="print the S-table")
    sub.add_parser("initcorr", parents=[common], help="initial-correlation term norms")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command in ("simulate", "stable", "initcorr") and len(cfg.sweep) > 1:
            raise ConfigError(f"{args.command} takes a single coupling")
        if args.command != "terms" and not table_is_complete(cfg.cutoff):
            log.warning("cutoff %d results are unvalidated", cfg.cutoff)
        return COMMANDS[args.command](cfg, sys.stdout)
    except ConfigError as exc:
        print(f"tlme: error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, InvariantError, QuadratureError) as exc:
        print(f"tlme: numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"tlme: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
