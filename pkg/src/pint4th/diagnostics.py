"""Error norms, discrete energy and mass, and report serialization."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .steppers import ChProblem, Trajectory

NORM_KINDS = ("linf_l2", "linf_linf")


def _weights(n_dof: int, dim: int) -> np.ndarray:
    n_x = round(n_dof ** (1.0 / dim))
    if n_x**dim != n_dof:
        raise ValueError(f"{n_dof} unknowns do not form a {dim}D square grid")
    w = np.ones(n_x)
    w[0] = w[-1] = 0.5
    return np.outer(w, w).ravel() if dim == 2 else w


def _rows(x) -> np.ndarray:
    if isinstance(x, Trajectory):
        return x.states
    return np.atleast_2d(np.asarray(x))


def _difference(candidate, reference) -> np.ndarray:
    cand = _rows(candidate)
    ref = _rows(reference)
    if cand.shape[0] == ref.shape[0] - 1 and isinstance(reference, Trajectory):
        ref = ref[1:]
    if cand.shape != ref.shape:
        raise ValueError(f"shape mismatch: candidate {cand.shape} vs reference {ref.shape}")
    return cand - ref


def error_linf_l2(candidate, reference, h: float, dim: int = 1) -> float:
    """``max_n sqrt(h^dim sum_i w_i (u_i - v_i)^2)`` with trapezoid weights.

    A candidate holding only the unknowns ``u_1..u_{N_t}`` is compared with
    states ``1..N_t`` of a reference :class:`Trajectory`.
    """
    diff = _difference(candidate, reference)
    w = _weights(diff.shape[1], dim)
    if diff.size == 0:
        return 0.0
    # scale first so tiny or huge differences neither underflow nor overflow
    scale = np.abs(diff).max(axis=1, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    per_time = scale[:, 0] * np.sqrt(h**dim * (np.abs(diff / safe) ** 2 @ w))
    return float(per_time.max())


def error_linf_linf(candidate, reference) -> float:
    diff = _difference(candidate, reference)
    return float(np.abs(diff).max()) if diff.size else 0.0


def discrete_energy(u, eps: float, h: float, dim: int = 1) -> float:
    """Trapezoid potential energy plus forward-difference gradient energy."""
    u = np.asarray(u, dtype=float)
    w = _weights(u.size, dim)
    potential = h**dim * np.dot(w, ChProblem.potential(u))
    if dim == 1:
        grad = h * np.sum((np.diff(u) / h) ** 2)
    else:
        n = round(math.sqrt(u.size))
        grid = u.reshape(n, n)
        w1 = np.ones(n)
        w1[0] = w1[-1] = 0.5
        gx = (np.diff(grid, axis=0) / h) ** 2  # differences along the first index
        gy = (np.diff(grid, axis=1) / h) ** 2
        grad = h**2 * (np.sum(gx * w1[None, :]) + np.sum(gy * w1[:, None]))
    return float(potential + 0.5 * eps**2 * grad)


def total_mass(u, h: float, dim: int = 1) -> float:
    u = np.asarray(u, dtype=float)
    return float(h**dim * np.dot(_weights(u.size, dim), u))


@dataclass
class PhysicsTrace:
    energy: list = field(default_factory=list)
    mass: list = field(default_factory=list)

    @classmethod
    def from_states(cls, states, eps: float, h: float, dim: int = 1) -> "PhysicsTrace":
        states = _rows(states)
        return cls(energy=[discrete_energy(u, eps, h, dim) for u in states],
                   mass=[total_mass(u, h, dim) for u in states])

    def energy_increments(self) -> np.ndarray:
        return np.diff(self.energy)

    def relative_mass_drift(self, u0=None, h=None, dim=1) -> float:
        """``max_n |m_n - m_0|`` over a scale.

        The scale is ``max(|m_0|, ||u0||_{L1})`` when ``u0`` is given, which
        keeps the measure meaningful for zero-mean initial data.
        """
        m = np.asarray(self.mass)
        scale = abs(m[0])
        if u0 is not None:
            w = _weights(np.size(u0), dim)
            scale = max(scale, h**dim * float(np.dot(w, np.abs(u0))))
        return float(np.abs(m - m[0]).max() / scale) if scale > 0 else float(np.abs(m - m[0]).max())


@dataclass
class ConvergenceReport:
    """Outer-iteration history.  ``errors_per_iteration[k-1]`` is the error of iterate k."""

    errors_per_iteration: list
    norm_kind: str
    theoretical_rho: float | None
    converged: bool
    iterations: int
    imag_residue_max: float = 0.0
    wallclock: float = 0.0
    tol: float = 1e-10
    initial_error: float = float("nan")
    modal_errors: list = field(default_factory=list)
    initial_modal_error: float = float("nan")
    inner_iterations: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def ratios(self, modal: bool = False) -> np.ndarray:
        """Successive contraction ratios e_k / e_{k-1} for k >= 2."""
        e = np.asarray(self.modal_errors if modal else self.errors_per_iteration, dtype=float)
        return e[1:] / e[:-1]

    def bound_curve(self) -> list:
        rho = self.theoretical_rho
        if rho is None:
            return [float("nan")] * len(self.errors_per_iteration)
        return [self.initial_error * rho**k if math.isfinite(rho) else float("inf")
                for k in range(1, len(self.errors_per_iteration) + 1)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ConvergenceReport":
        return cls(**data)


def _fmt(x) -> str:
    return repr(float(x))


def write_report(report: ConvergenceReport, trace: PhysicsTrace | None, path, fmt: str | None = None,
                 config: dict | None = None) -> Path:
    """Write ``report`` as CSV (``k,error,bound`` rows) or JSON (everything).

    The format defaults to the file suffix.  Output is byte-stable for equal inputs.
    """
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".") or "csv").lower()
    try:
        if fmt == "csv":
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["k", "error", "bound"])
                for k, (err, bound) in enumerate(
                        zip(report.errors_per_iteration, report.bound_curve()), start=1):
                    writer.writerow([k, _fmt(err), _fmt(bound)])
        elif fmt == "json":
            payload = {"report": report.to_dict(),
                       "trace": asdict(trace) if trace is not None else None,
                       "config": config}
            path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return path


def read_report_json(path) -> tuple[ConvergenceReport, PhysicsTrace | None, dict | None]:
    payload = json.loads(Path(path).read_text())
    trace = payload.get("trace")
    return (ConvergenceReport.from_dict(payload["report"]),
            PhysicsTrace(**trace) if trace is not None else None,
            payload.get("config"))
