"""Command-line experiment driver.

Configs are flat ``key = value`` files (``#`` starts a comment); ``--set
key=value`` flags override file entries, and the environment variables
``PINT4TH_OUTPUT_DIR`` / ``PINT4TH_WORKERS`` sit in between.

Exit codes: 0 converged, 1 not converged (or solver failure), 2 config error.
"""

from __future__ import annotations

import argparse
import enum
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from .diagnostics import ConvergenceReport, PhysicsTrace, write_report
from .pint_ch import run_pint_ch
from .pint_linear import PintConfig, run_pint_linear
from .spatial import Mesh1D, Mesh2D, OperatorKind, assemble_operator
from .steppers import ChProblem, TimeGrid, solve_ch_sequential, solve_linear_sequential

log = logging.getLogger("pint4th")

MAX_INTERVALS_2D = 64
LARGE_NT = 20000


class Problem(str, enum.Enum):
    BIHARMONIC_1D = "Biharmonic1D"
    BIHARMONIC_2D = "Biharmonic2D"
    LINCH_1D = "LinCH1D"
    LINCH_2D = "LinCH2D"
    CH1D_PINT_I = "CH1D_PintI"
    CH1D_PINT_II = "CH1D_PintII"
    CH2D_PINT_I = "CH2D_PintI"
    CH2D_PINT_II = "CH2D_PintII"
    GENERAL4TH_1D = "General4th1D"

    @property
    def dim(self) -> int:
        return 2 if "2D" in self.value else 1

    @property
    def is_ch(self) -> bool:
        return self.value.startswith("CH")

    @property
    def variant(self) -> str | None:
        if not self.is_ch:
            return None
        return "pint_ii" if self.value.endswith("PintII") else "pint_i"

    @property
    def operator_kind(self) -> OperatorKind:
        if self.is_ch:
            return OperatorKind.LAPLACIAN_ONLY
        if self.value.startswith("LinCH"):
            return OperatorKind.LINEARIZED_CH
        if self is Problem.GENERAL4TH_1D:
            return OperatorKind.GENERAL_FOURTH_ORDER
        return OperatorKind.BIHARMONIC


class InitialCondition(str, enum.Enum):
    AUTO = "auto"
    CH_PROFILE_1D = "PaperCH1D"
    CH_NOISE_2D = "PaperCH2D_random"
    CUSTOM = "Custom"


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass
class ExperimentConfig:
    problem: Problem = Problem.BIHARMONIC_1D
    h: float = 1.0 / 64
    dt: float = 1e-3
    T: float = 1.0
    alpha: float = 1e-3
    theta: float = 1.0
    eps2: float = 0.01
    beta: float = 0.2
    tol: float = 1e-10
    max_iter: int = 20
    seed: int = 0
    workers: int = 1
    output_path: str = "pint4th_out"
    initial_condition: InitialCondition = InitialCondition.AUTO
    u0_file: str = ""
    domain_length: float = 0.0  # 0 means the problem's default
    norm_kind: str = "linf_l2"
    jacobian: str = "printed"
    qn_form: str = "correction"
    inner_tol: float = 1e-12
    inner_max: int = 50
    step2: str = "spectral"

    @property
    def length(self) -> float:
        if self.domain_length > 0:
            return self.domain_length
        # linear 2D problems live on (0, pi)^2, everything else on (0, 1)
        return math.pi if self.problem.dim == 2 and not self.problem.is_ch else 1.0

    @property
    def intervals(self) -> int:
        return max(1, round(self.length / self.h))

    def mesh(self):
        n = self.intervals
        h = self.length / n
        return Mesh2D(n + 1, h) if self.problem.dim == 2 else Mesh1D(n + 1, h)

    def grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.dt)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["problem"] = self.problem.value
        d["initial_condition"] = self.initial_condition.value
        return d


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_ONLY_FOR = {
    "theta": lambda p: not p.is_ch,
    "beta": lambda p: p.operator_kind is OperatorKind.LINEARIZED_CH,
    "eps2": lambda p: p.is_ch or p.operator_kind is OperatorKind.LINEARIZED_CH,
    "jacobian": lambda p: p.is_ch,
    "qn_form": lambda p: p.is_ch,
    "inner_tol": lambda p: p.is_ch,
    "inner_max": lambda p: p.is_ch,
    "step2": lambda p: not p.is_ch,
}
_CHOICES = {
    "norm_kind": ("linf_l2", "linf_linf"),
    "jacobian": ("printed", "analytic"),
    "qn_form": ("correction", "rearranged"),
    "step2": ("spectral", "banded"),
}


def _convert(name: str, raw: str):
    ftype = _FIELDS[name].type
    raw = raw.strip()
    if name == "problem":
        return Problem(raw)
    if name == "initial_condition":
        return InitialCondition(raw)
    if ftype == "int":
        return int(raw)
    if ftype == "float":
        # accepts 1/64 as well as 0.015625 or 1e-3
        return float(Fraction(raw)) if "/" in raw else float(raw)
    return raw


def read_config_file(path) -> dict:
    entries = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError([f"{path}:{lineno}: expected key = value, got {line!r}"])
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def parse_config(entries: dict | None = None, path=None, overrides=None,
                 env: dict | None = None) -> ExperimentConfig:
    """Build and validate a config from a file, environment and ``key=value`` overrides.

    Every offending field is reported in a single :class:`ConfigError`.
    """
    raw = {}
    if path is not None:
        raw.update(read_config_file(path))
    if entries:
        raw.update({k: str(v) for k, v in entries.items()})
    env = os.environ if env is None else env
    if env.get("PINT4TH_OUTPUT_DIR"):
        raw["output_path"] = env["PINT4TH_OUTPUT_DIR"]
    if env.get("PINT4TH_WORKERS"):
        raw["workers"] = env["PINT4TH_WORKERS"]
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError([f"override {item!r} is not key=value"])
        key, value = item.split("=", 1)
        raw[key.strip()] = value.strip()

    problems, values = [], {}
    for key, value in raw.items():
        if key not in _FIELDS:
            problems.append(f"unknown key {key!r}")
            continue
        try:
            values[key] = _convert(key, value)
        except (ValueError, ZeroDivisionError) as exc:
            problems.append(f"{key}: cannot parse {value!r} ({exc})")
    if problems:
        raise ConfigError(problems)
    cfg = ExperimentConfig(**values)
    _validate(cfg, set(values), problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def _validate(cfg: ExperimentConfig, given: set, problems: list) -> None:
    p = cfg.problem
    if not 0.0 < cfg.alpha < 1.0:
        problems.append(f"alpha={cfg.alpha} must lie in (0, 1)")
    for name in ("h", "dt", "T", "tol", "eps2", "inner_tol"):
        if not getattr(cfg, name) > 0:
            problems.append(f"{name}={getattr(cfg, name)} must be positive")
    if not 0.0 <= cfg.theta <= 1.0:
        problems.append(f"theta={cfg.theta} must lie in [0, 1]")
    for name in ("max_iter", "workers", "inner_max"):
        if getattr(cfg, name) < 1:
            problems.append(f"{name}={getattr(cfg, name)} must be >= 1")
    if cfg.domain_length < 0:
        problems.append("domain_length must be positive (or 0 for the default)")
    for name, choices in _CHOICES.items():
        if getattr(cfg, name) not in choices:
            problems.append(f"{name}={getattr(cfg, name)!r} not in {choices}")
    for name, applies in _ONLY_FOR.items():
        if name in given and not applies(p):
            problems.append(f"{name} does not apply to {p.value}")
    if cfg.T > 0 and cfg.dt > 0:
        try:
            cfg.grid()
        except ValueError as exc:
            problems.append(str(exc))
    if cfg.h > 0 and cfg.length > 0:
        n = cfg.length / cfg.h
        if n < 2:
            problems.append(f"h={cfg.h} leaves fewer than 3 grid points")
        elif p.dim == 2 and round(n) > MAX_INTERVALS_2D:
            problems.append(f"2D mesh with {round(n)} intervals per direction exceeds the "
                            f"cap of {MAX_INTERVALS_2D}")
        elif abs(n - round(n)) > 1e-9 * n:
            warnings.warn(f"L/h = {n:.6g} is not an integer; using {round(n)} intervals of "
                          f"width {cfg.length / round(n):.6g}", stacklevel=3)
    ic = cfg.initial_condition
    if ic is InitialCondition.CH_PROFILE_1D and p.dim != 1:
        problems.append("PaperCH1D initial condition needs a 1D problem")
    if ic is InitialCondition.CH_NOISE_2D and p.dim != 2:
        problems.append("PaperCH2D_random initial condition needs a 2D problem")
    if ic is InitialCondition.CUSTOM and not cfg.u0_file:
        problems.append("Custom initial condition needs u0_file")
    if not problems and cfg.grid().n_t > LARGE_NT:
        warnings.warn(f"n_t={cfg.grid().n_t} is large; expect long runtimes", stacklevel=3)


def builtin_initial_condition(kind, mesh, seed: int = 0, samples=None) -> np.ndarray:
    """Initial data on the mesh nodes.

    ``PaperCH1D`` is ``0.75 sin(2 pi x) + 0.25 cos(4 pi x)``; ``PaperCH2D_random``
    is ``0.1`` times uniform noise on ``[-1, 1]`` drawn from a generator seeded
    with ``(seed, 1)`` so it never shares a stream with the initial guess.
    """
    kind = InitialCondition(kind)
    if kind is InitialCondition.CH_PROFILE_1D:
        if mesh.dim != 1:
            raise ValueError("PaperCH1D needs a 1D mesh")
        x = mesh.nodes()
        return 0.75 * np.sin(2 * np.pi * x) + 0.25 * np.cos(4 * np.pi * x)
    if kind is InitialCondition.CH_NOISE_2D:
        if mesh.dim != 2:
            raise ValueError("PaperCH2D_random needs a 2D mesh")
        return 0.1 * np.random.default_rng((seed, 1)).uniform(-1.0, 1.0, mesh.n_dof)
    if kind is InitialCondition.CUSTOM:
        u0 = np.asarray(samples, dtype=float).ravel()
        if u0.size != mesh.n_dof:
            raise ValueError(f"custom initial condition has {u0.size} values, mesh has {mesh.n_dof}")
        return u0
    raise ValueError("resolve 'auto' before calling builtin_initial_condition")


def initial_condition_for(cfg: ExperimentConfig, mesh) -> np.ndarray:
    ic = cfg.initial_condition
    if ic is InitialCondition.AUTO:
        ic = InitialCondition.CH_PROFILE_1D if mesh.dim == 1 else InitialCondition.CH_NOISE_2D
    samples = np.loadtxt(cfg.u0_file) if ic is InitialCondition.CUSTOM else None
    return builtin_initial_condition(ic, mesh, cfg.seed, samples)


@dataclass
class RunSummary:
    config: dict
    report: ConvergenceReport
    trace: PhysicsTrace | None
    solver_health: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"config": self.config, "report": self.report.to_dict(),
                "trace": asdict(self.trace) if self.trace is not None else None,
                "solver_health": self.solver_health}

    @classmethod
    def from_dict(cls, data: dict) -> "RunSummary":
        trace = data.get("trace")
        return cls(data["config"], ConvergenceReport.from_dict(data["report"]),
                   PhysicsTrace(**trace) if trace is not None else None,
                   data.get("solver_health", {}))


def run_experiment(cfg: ExperimentConfig, stem: str | None = None, write: bool = True) -> RunSummary:
    """Sequential reference, PinT run from the seeded random guess, report files."""
    p = cfg.problem
    mesh = cfg.mesh()
    grid = cfg.grid()
    u0 = initial_condition_for(cfg, mesh)
    pint_cfg = PintConfig(cfg.alpha, tol=cfg.tol, max_iter=cfg.max_iter, norm_kind=cfg.norm_kind,
                          seed=cfg.seed, workers=cfg.workers, step2=cfg.step2)
    log.info("%s: n_x=%d h=%.4g n_t=%d", p.value, mesh.n_x, mesh.h, grid.n_t)
    trace = None
    if p.is_ch:
        lap = assemble_operator(OperatorKind.LAPLACIAN_ONLY, mesh)
        prob = ChProblem(math.sqrt(cfg.eps2))
        scheme = "implicit" if p.variant == "pint_i" else "eyre"
        reference = solve_ch_sequential(lap, prob, grid, u0, scheme)
        report = run_pint_ch(p.variant, prob, lap, grid, pint_cfg, u0, reference,
                             inner_tol=cfg.inner_tol, inner_max=cfg.inner_max,
                             jacobian=cfg.jacobian, form=cfg.qn_form)
        trace = PhysicsTrace.from_states(np.vstack([u0, report.solution]), prob.eps, mesh.h,
                                         mesh.dim)
    else:
        kw = {}
        if p.operator_kind is OperatorKind.LINEARIZED_CH:
            kw = {"eps": math.sqrt(cfg.eps2), "beta": cfg.beta}
        op = assemble_operator(p.operator_kind, mesh, **kw)
        reference = solve_linear_sequential(op, cfg.theta, grid, u0)
        report = run_pint_linear(op, grid, pint_cfg, u0, reference, cfg.theta)
    health = {"imag_residue_max": report.imag_residue_max,
              "inner_iterations": list(report.inner_iterations),
              "notes": list(report.notes)}
    summary = RunSummary(cfg.to_dict(), report, trace, health)
    if write:
        out = Path(cfg.output_path)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or p.value
        write_report(report, None, out / f"{stem}.csv")
        (out / f"{stem}.json").write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True)
                                          + "\n")
    return summary


def _print_summary(summary: RunSummary, stream=sys.stdout) -> None:
    r = summary.report
    status = "converged" if r.converged else "NOT converged"
    final = r.errors_per_iteration[-1] if r.errors_per_iteration else float("nan")
    print(f"{summary.config['problem']}: {status} after {r.iterations} iterations, "
          f"final error {final:.3e} ({r.norm_kind}), wallclock {r.wallclock:.2f} s", file=stream)
    for note in r.notes:
        print(f"  note: {note}", file=stream)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pint4th", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", nargs="?", help="key = value config file (defaults if omitted)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override one config entry (repeatable)")

    common(sub.add_parser("run", help="run one experiment"))
    sw = sub.add_parser("sweep", help="vary one key, one CSV per value")
    common(sw)
    sw.add_argument("--key", required=True)
    sw.add_argument("--values", required=True, help="comma-separated values")
    common(sub.add_parser("check", help="validate the config only"))
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(path=args.config, overrides=args.overrides)
        if args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            configs = [parse_config(path=args.config, overrides=args.overrides + [f"{args.key}={v}"])
                       for v in values]
    except (ConfigError, OSError) as exc:
        print(exc, file=sys.stderr)
        return 2
    if args.command == "check":
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        return 0
    try:
        if args.command == "run":
            summaries = [run_experiment(cfg)]
        else:
            summaries = [run_experiment(c, stem=f"{c.problem.value}_{args.key}={v}")
                         for c, v in zip(configs, values)]
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError, MemoryError, OSError) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for s in summaries:
        _print_summary(s)
    return 0 if all(s.report.converged for s in summaries) else 1


if __name__ == "__main__":
    sys.exit(main())
