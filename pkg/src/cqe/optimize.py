"""CQE driver: steepest descent, Fletcher-Reeves CG, BFGS and l-BFGS.

Every iteration works in the local chart spanned by the pool generators
around the current state.  Search directions, steps ``s_n`` and residual
differences ``y_n`` are compared across iterations as plain pool-aligned
vectors (identity transport between successive charts).
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ansatz import Ansatz, SparsifierConfig, append_step, cost_report, merge_window, prepare_state, sparsify
from .fcidump import MolecularIntegrals, reference_determinant
from .pauli import hamiltonian_to_pauli
from .residual import build_pool, residual_vector
from .statevector import StateVector, compile_operator

__all__ = [
    "OPTIMIZERS",
    "OptimizerConfig",
    "CQEProblem",
    "IterationRecord",
    "ConvergenceTrace",
    "LineSearchError",
    "LineSearchResult",
    "wolfe_line_search",
    "bfgs_update",
    "lbfgs_direction",
    "fr_beta",
    "quadratic_alpha",
    "run_cqe",
]

log = logging.getLogger(__name__)

OPTIMIZERS = ("gd", "gd-quad", "cg-fr", "bfgs", "lbfgs")
CURVATURE_TOL = 1e-12


@dataclass(frozen=True)
class OptimizerConfig:
    """Optimizer settings.

    ``c2=None`` picks 0.9 for the quasi-Newton methods and 0.4 for CG.
    ``gd_step`` is the fixed step of ``gd`` and the trial step of ``gd-quad``,
    whose fitted step is capped at ``quad_alpha_max``.
    """

    kind: str = "bfgs"
    threshold: float = 1e-5
    max_iter: int = 300
    lbfgs_memory: int = 3
    c1: float = 1e-4
    c2: float | None = None
    alpha_first: float = 0.5
    alpha_lo: float = 0.5
    alpha_hi: float = 1.0
    max_ls_evals: int = 20
    gd_step: float = 0.2
    quad_alpha_max: float = 4.0
    cg_restart: float = 0.9
    bfgs_scale_initial: bool = False
    alpha_policy: str = "previous-line"
    sparsifier: SparsifierConfig = field(default_factory=SparsifierConfig)

    def __post_init__(self):
        if self.kind not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.kind!r}; choose from {OPTIMIZERS}")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        if self.lbfgs_memory < 1:
            raise ValueError("lbfgs_memory must be at least 1")
        if not 0 < self.c1 < self.wolfe_c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")
        if not 0 < self.alpha_lo <= self.alpha_hi:
            raise ValueError("need 0 < alpha_lo <= alpha_hi")

    @property
    def wolfe_c2(self) -> float:
        if self.c2 is not None:
            return self.c2
        return 0.4 if self.kind == "cg-fr" else 0.9


@dataclass(frozen=True)
class CQEProblem:
    ints: MolecularIntegrals
    encoding: str = "fermionic"


@dataclass(frozen=True)
class IterationRecord:
    n: int
    energy: float
    grad_norm: float
    alpha: float
    ls_evals: int
    layer_count: int
    term_count: int
    circuit_cnots: int
    cumulative_cnots: int
    # directional derivatives A.d at alpha=0 and at the accepted alpha
    slope0: float = math.nan
    slope: float = math.nan
    # max |Binv_{n+1} y_n - s_n| after the BFGS update (nan unless an update happened)
    secant_error: float = math.nan


@dataclass
class ConvergenceTrace:
    records: list[IterationRecord]
    termination: str
    threshold: float
    pool_size: int
    ansatz: Ansatz | None = None
    state: StateVector | None = None

    @property
    def iterations(self) -> int:
        return self.records[-1].n

    @property
    def final_energy(self) -> float:
        return self.records[-1].energy

    @property
    def final_grad_norm(self) -> float:
        return self.records[-1].grad_norm

    @property
    def converged(self) -> bool:
        return self.termination == "converged"

    @property
    def residual_evaluations(self) -> int:
        return self.iterations * self.pool_size

    @property
    def grad_norms(self) -> np.ndarray:
        return np.array([r.grad_norm for r in self.records])

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])


class LineSearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class LineSearchResult:
    alpha: float
    value: float
    slope: float
    evaluations: int


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimizer of the cubic interpolant through two points with slopes, or None."""
    d1 = ga + gb - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = gb - ga + 2 * d2
    if denom == 0:
        return None
    return b - (b - a) * (gb + d2 - d1) / denom


def wolfe_line_search(
    phi: Callable[[float], tuple[float, float]],
    phi0: float,
    dphi0: float,
    alpha0: float,
    c1: float = 1e-4,
    c2: float = 0.9,
    max_evals: int = 20,
    alpha_max: float = 50.0,
) -> LineSearchResult:
    """Strong-Wolfe bracketing and zoom line search.

    ``phi(alpha)`` returns the value and directional derivative at
    ``alpha``.  The accepted step satisfies
    ``phi(a) <= phi0 + c1 a dphi0`` and ``|phi'(a)| <= c2 |dphi0|``.
    Raises :class:`LineSearchError` when no such step is found within
    ``max_evals`` evaluations.

    Reference: Nocedal & Wright, Numerical Optimization, algorithms 3.5/3.6.
    """
    if not dphi0 < 0:
        raise LineSearchError(f"not a descent direction (phi'(0) = {dphi0:.3e})")
    evals = 0

    def evaluate(a):
        nonlocal evals
        if evals >= max_evals:
            raise LineSearchError(f"no Wolfe step within {max_evals} evaluations")
        evals += 1
        return phi(a)

    def armijo(a, f):
        return f <= phi0 + c1 * a * dphi0

    def zoom(lo, f_lo, g_lo, hi, f_hi, g_hi):
        while True:
            width = hi - lo
            a = _cubic_min(lo, f_lo, g_lo, hi, f_hi, g_hi)
            left, right = min(lo, hi), max(lo, hi)
            margin = 0.1 * abs(width)
            if a is None or not (left + margin <= a <= right - margin):
                a = lo + 0.5 * width
            f, g = evaluate(a)
            if not armijo(a, f) or f >= f_lo:
                hi, f_hi, g_hi = a, f, g
            else:
                if abs(g) <= -c2 * dphi0:
                    return LineSearchResult(a, f, g, evals)
                if g * (hi - lo) >= 0:
                    hi, f_hi, g_hi = lo, f_lo, g_lo
                lo, f_lo, g_lo = a, f, g
            if abs(hi - lo) < 1e-12 * max(1.0, abs(lo)):
                raise LineSearchError("zoom interval collapsed")

    a_prev, f_prev, g_prev = 0.0, phi0, dphi0
    a = min(alpha0, alpha_max)
    first = True
    while True:
        f, g = evaluate(a)
        if not armijo(a, f) or (not first and f >= f_prev):
            return zoom(a_prev, f_prev, g_prev, a, f, g)
        if abs(g) <= -c2 * dphi0:
            return LineSearchResult(a, f, g, evals)
        if g >= 0:
            return zoom(a, f, g, a_prev, f_prev, g_prev)
        if a >= alpha_max:
            raise LineSearchError("step reached alpha_max without satisfying Wolfe")
        a_prev, f_prev, g_prev = a, f, g
        a = min(2.0 * a, alpha_max)
        first = False


def bfgs_update(binv: np.ndarray, s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Inverse-Hessian BFGS update; returns ``binv`` unchanged if ``y.s <= 1e-12``."""
    ys = float(y @ s)
    if ys <= CURVATURE_TOL:
        return binv
    rho = 1.0 / ys
    by = binv @ y
    # (I - rho s y^T) B (I - rho y s^T) + rho s s^T, expanded
    out = binv - rho * (np.outer(s, by) + np.outer(by, s)) + (rho * rho * (y @ by) + rho) * np.outer(s, s)
    return 0.5 * (out + out.T)


def lbfgs_direction(history: Sequence[tuple[np.ndarray, np.ndarray]], g: np.ndarray) -> np.ndarray:
    """Two-loop recursion ``-H g`` over stored ``(s, y)`` pairs, oldest first."""
    q = np.array(g, dtype=float)
    pairs = [(s, y, 1.0 / float(y @ s)) for s, y in history if float(y @ s) > CURVATURE_TOL]
    if not pairs:
        return -q
    coef = []
    for s, y, rho in reversed(pairs):
        a = rho * float(s @ q)
        coef.append(a)
        q -= a * y
    s, y, _ = pairs[-1]
    r = (float(s @ y) / float(y @ y)) * q
    for (s, y, rho), a in zip(pairs, reversed(coef)):
        b = rho * float(y @ r)
        r += (a - b) * s
    return -r


def fr_beta(g_new: np.ndarray, g_old: np.ndarray) -> float:
    return float(g_new @ g_new) / float(g_old @ g_old)


def quadratic_alpha(e0: float, slope0: float, e_trial: float, alpha_trial: float,
                    alpha_max: float = 4.0) -> float:
    """Minimizer of the parabola with value ``e0`` and slope ``slope0`` at 0 through the trial point."""
    curv = (e_trial - e0 - slope0 * alpha_trial) / (alpha_trial * alpha_trial)
    if curv <= 0:
        return alpha_trial
    alpha = -slope0 / (2.0 * curv)
    if alpha <= 0:
        return alpha_trial
    return min(alpha, alpha_max)


class _Evaluator:
    """Energies and residuals along ``alpha * d`` appended to a fixed ansatz."""

    def __init__(self, ansatz, ham, pool, direction, p_depth):
        self.ansatz = ansatz
        self.ham = ham
        self.pool = pool
        self.direction = direction
        self.p_depth = p_depth
        self.cache: dict[float, tuple] = {}

    def point(self, alpha: float):
        if alpha not in self.cache:
            trial = self.ansatz.copy()
            append_step(trial, alpha * self.direction, self.p_depth)
            psi = prepare_state(trial)
            energy = float(np.vdot(psi.amps, self.ham @ psi.amps).real)
            grad = residual_vector(psi, self.ham, self.pool)
            self.cache[alpha] = (trial, psi, energy, grad)
        return self.cache[alpha]

    def phi(self, alpha: float) -> tuple[float, float]:
        _, _, energy, grad = self.point(alpha)
        return energy, float(grad @ self.direction)


def run_cqe(problem: CQEProblem, cfg: OptimizerConfig, initial_state: StateVector | None = None,
            callback: Callable[[IterationRecord], None] | None = None) -> ConvergenceTrace:
    """Solve the ACSE for ``problem`` by iterated two-body exponential updates."""
    ints = problem.ints
    ham = compile_operator(hamiltonian_to_pauli(ints))
    pool = build_pool(ints.norb, problem.encoding)
    ansatz = Ansatz(reference_determinant(ints), pool, initial_state)
    sparse_cfg = cfg.sparsifier
    p_depth = sparse_cfg.p_depth
    mu = pool.mu

    psi = prepare_state(ansatz)
    energy = float(np.vdot(psi.amps, ham @ psi.amps).real)
    grad = residual_vector(psi, ham, pool)
    records = [IterationRecord(0, energy, float(np.linalg.norm(grad)), 0.0, 0, 0, 0, 0, 0)]
    if callback:
        callback(records[-1])

    binv = np.eye(mu) if cfg.kind == "bfgs" else None
    history: deque = deque(maxlen=cfg.lbfgs_memory)
    prev_dir = None
    prev_energy = None
    termination = "max_iter"

    for n in range(1, cfg.max_iter + 2):
        if records[-1].grad_norm < cfg.threshold:
            termination = "converged"
            break
        if n > cfg.max_iter:
            break

        if cfg.kind in ("gd", "gd-quad"):
            direction = -grad
        elif cfg.kind == "cg-fr":
            direction = -grad if prev_dir is None else -grad + cg_beta * prev_dir
            if float(direction @ grad) >= 0:
                direction = -grad
        elif cfg.kind == "bfgs":
            direction = -(binv @ grad)
        else:
            direction = lbfgs_direction(history, grad)

        window = merge_window(ansatz, p_depth)
        step_dir = sparsify(direction, grad, sparse_cfg, window.keys())
        if not step_dir.any():
            termination = "stalled"
            break
        slope0 = float(grad @ step_dir)
        ev = _Evaluator(ansatz, ham, pool, step_dir, p_depth)

        if cfg.kind == "gd":
            alpha, n_evals = cfg.gd_step, 1
        elif cfg.kind == "gd-quad":
            e_trial, _ = ev.phi(cfg.gd_step)
            alpha = quadratic_alpha(energy, slope0, e_trial, cfg.gd_step, cfg.quad_alpha_max)
            n_evals = 1 if alpha == cfg.gd_step else 2
        else:
            if prev_energy is None:
                alpha0 = cfg.alpha_first
            else:
                # parabola along the previous line: E_{n-1}, its slope, and E_n at alpha_{n-1}
                last = records[-1]
                if cfg.alpha_policy == "nocedal":
                    guess = 2.0 * (energy - prev_energy) / slope0
                else:
                    guess = quadratic_alpha(prev_energy, last.slope0, energy, last.alpha, cfg.alpha_hi)
                alpha0 = min(max(guess, cfg.alpha_lo), cfg.alpha_hi)
            try:
                res = wolfe_line_search(ev.phi, energy, slope0, alpha0, cfg.c1, cfg.wolfe_c2, cfg.max_ls_evals)
            except LineSearchError as exc:
                log.info("iteration %d: line search failed: %s", n, exc)
                termination = "line_search_failed"
                break
            alpha, n_evals = res.alpha, res.evaluations

        trial, new_psi, new_energy, new_grad = ev.point(alpha)
        s = alpha * step_dir
        y = new_grad - grad
        secant = math.nan
        if cfg.kind == "bfgs":
            if n == 1 and cfg.bfgs_scale_initial and float(y @ s) > CURVATURE_TOL:
                binv = (float(y @ s) / float(y @ y)) * binv
            updated = bfgs_update(binv, s, y)
            if updated is not binv:
                secant = float(np.max(np.abs(updated @ y - s)))
            binv = updated
        elif cfg.kind == "lbfgs":
            if float(y @ s) > CURVATURE_TOL:
                history.append((s, y))
        elif cfg.kind == "cg-fr":
            cg_beta = fr_beta(new_grad, grad)
            g2 = float(new_grad @ new_grad)
            if g2 == 0 or float(new_grad @ grad) / g2 > cfg.cg_restart:
                cg_beta = 0.0
            prev_dir = step_dir

        prev_energy, energy, grad = energy, new_energy, new_grad
        ansatz, psi = trial, new_psi
        cost = cost_report(ansatz, records[-1].cumulative_cnots)
        records.append(IterationRecord(
            n, energy, float(np.linalg.norm(grad)), float(alpha), n_evals, cost.layer_count,
            cost.term_count, cost.circuit_cnots, cost.cumulative_cnots, slope0, float(new_grad @ step_dir), secant,
        ))
        if callback:
            callback(records[-1])

    return ConvergenceTrace(records, termination, cfg.threshold, mu, ansatz, psi)
