"""
Riemann-Hilbert solver service for the NLS-GI engine
Jump matrices and the projection fixed-point equations on both half-lines
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from nlsgi.core.errors import ConvergenceError, DataCorruptionError, InputError
from nlsgi.services.projector import DeltaSet, ProjectorPlan, apply
from nlsgi.services.scattering import ScatteringData

logger = logging.getLogger(__name__)

POSITIVE = "positive_x"
NEGATIVE = "negative_x"

STATE_HEADER = ["z", "re_xi1", "im_xi1", "re_xi2", "im_xi2", "re_eta1", "im_eta1", "re_eta2", "im_eta2"]


@dataclass(frozen=True)
class SolverOptions:
    rh_tol: float = 1e-10
    max_iter: int = 200
    contraction_switch: float = 0.9
    gmres_restart: int = 50
    delta_tol: float = 1e-6


@dataclass(frozen=True, eq=False)
class JumpData:
    """R(x; z) = [[conj(r+) r-, conj(r+) e^{-2i lam x}], [r- e^{2i lam x}, 0]]

    Arrays are indexed R[i, j, m]. upper and lower hold the strictly
    triangular parts; the delta-conjugated coefficients are filled when
    deltas are supplied.
    """

    x: float
    R: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    r_plus: np.ndarray
    r_minus: np.ndarray
    conjugated: bool = False
    modulus_gap: float = 0.0


@dataclass(frozen=True, eq=False)
class RHSolveState:
    """Columns xi and eta of the solved RH matrix

    positive_x: xi = xi_-, eta = eta_+; negative_x: xi = xi_{+,delta},
    eta = eta_{-,delta}. Both are (2, M) arrays.
    """

    branch: str
    x: float
    xi: np.ndarray
    eta: np.ndarray
    iterations: int
    method: str
    residual: float
    contraction: float
    r_plus: np.ndarray
    r_minus: np.ndarray
    diagnostics: Dict[str, Any] = field(default_factory=dict)


def phase(x: float, scattering: ScatteringData) -> np.ndarray:
    """e^{2i(z+1)x} on the z-grid"""
    return np.exp(2j * scattering.zgrid.lam * x)


def conjugated_coefficients(scattering: ScatteringData, deltas: DeltaSet) -> Tuple[np.ndarray, np.ndarray]:
    """r+-,delta = conj(delta+ delta-) r+-"""
    factor = np.conj(deltas.delta_plus * deltas.delta_minus)
    return factor * scattering.r_plus, factor * scattering.r_minus


def build_jump(x: float, scattering: ScatteringData, deltas: Optional[DeltaSet] = None, branch: Optional[str] = None) -> JumpData:
    """Assemble the jump matrix at x, delta-conjugated when deltas are given"""
    if branch == NEGATIVE and deltas is None:
        raise InputError("the negative_x branch needs the delta functions")

    r_plus, r_minus = scattering.r_plus, scattering.r_minus
    modulus_gap = 0.0
    if deltas is not None:
        r_plus, r_minus = conjugated_coefficients(scattering, deltas)
        modulus_gap = float(
            max(
                np.max(np.abs(np.abs(r_plus) - np.abs(scattering.r_plus))),
                np.max(np.abs(np.abs(r_minus) - np.abs(scattering.r_minus))),
            )
        )

    e = phase(x, scattering)
    m = scattering.zgrid.point_count
    R = np.zeros((2, 2, m), dtype=complex)
    R[0, 0] = np.conj(r_plus) * r_minus
    R[0, 1] = np.conj(r_plus) * np.conj(e)
    R[1, 0] = r_minus * e
    upper = np.zeros_like(R)
    lower = np.zeros_like(R)
    upper[0, 1] = R[0, 1]
    lower[1, 0] = R[1, 0]
    return JumpData(
        x=x, R=R, upper=upper, lower=lower, r_plus=r_plus, r_minus=r_minus,
        conjugated=deltas is not None, modulus_gap=modulus_gap,
    )


def tau_scale(k: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Diagonals of tau1 = diag(1, 2k) and tau2 = tau1 / (2k)"""
    tau1 = np.stack([np.ones_like(k), 2.0 * k])
    return tau1, tau1 / (2.0 * k)


def jump_in_k(x: float, scattering: ScatteringData) -> np.ndarray:
    """S(x; k) = tau1^{-1} R tau1 written directly from r(k)"""
    k = scattering.zgrid.k
    r = scattering.r
    e = phase(x, scattering)
    # conj(r+) * 2k reduces to +-conj(r) on the two branches
    sign = np.where(scattering.zgrid.nodes > 0, 1.0, -1.0)
    S = np.zeros((2, 2, k.size), dtype=complex)
    S[0, 0] = sign * np.abs(r) ** 2
    S[0, 1] = sign * np.conj(r) * np.conj(e)
    S[1, 0] = r * e
    return S


class _CoupledSystem:
    """X = P^{s1}(c1 (e2 + Y)), Y = P^{s2}(c2 (e1 + X)) for deviations X = xi - e1, Y = eta - e2"""

    def __init__(self, s1: int, c1: np.ndarray, s2: int, c2: np.ndarray, plan: ProjectorPlan):
        self.s1, self.c1, self.s2, self.c2 = s1, c1, s2, c2
        self.plan = plan
        self.m = c1.size
        self.weight = math.sqrt(plan.zgrid.spacing)

    def first(self, Y: np.ndarray) -> np.ndarray:
        rhs = np.stack([self.c1 * Y[0], self.c1 * (1.0 + Y[1])])
        return apply(rhs, self.s1, self.plan)

    def second(self, X: np.ndarray) -> np.ndarray:
        rhs = np.stack([self.c2 * (1.0 + X[0]), self.c2 * X[1]])
        return apply(rhs, self.s2, self.plan)

    def norm(self, *parts: np.ndarray) -> float:
        return self.weight * math.sqrt(sum(float(np.sum(np.abs(p) ** 2)) for p in parts))

    def residual(self, X: np.ndarray, Y: np.ndarray) -> float:
        return self.norm(X - self.first(Y), Y - self.second(X))

    def pack(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return np.concatenate([X.ravel(), Y.ravel()])

    def unpack(self, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        half = 2 * self.m
        return v[:half].reshape(2, self.m), v[half:].reshape(2, self.m)

    def rhs(self) -> np.ndarray:
        zero = np.zeros((2, self.m), dtype=complex)
        return self.pack(self.first(zero), self.second(zero))

    def operator(self) -> LinearOperator:
        def matvec(v: np.ndarray) -> np.ndarray:
            X, Y = self.unpack(np.asarray(v, dtype=complex).ravel())
            first = apply(np.stack([self.c1 * Y[0], self.c1 * Y[1]]), self.s1, self.plan)
            second = apply(np.stack([self.c2 * X[0], self.c2 * X[1]]), self.s2, self.plan)
            return self.pack(X - first, Y - second)

        size = 4 * self.m
        return LinearOperator((size, size), matvec=matvec, dtype=complex)


def _solve(system: _CoupledSystem, options: SolverOptions) -> Tuple[np.ndarray, np.ndarray, int, str, float, float]:
    X = np.zeros((2, system.m), dtype=complex)
    Y = np.zeros((2, system.m), dtype=complex)
    previous_update = None
    contraction = 0.0

    # Gauss-Seidel sweeps of the fixed-point form
    for iteration in range(1, options.max_iter + 1):
        X_new = system.first(Y)
        Y_new = system.second(X_new)
        update = system.norm(X_new - X, Y_new - Y)
        X, Y = X_new, Y_new
        if previous_update:
            contraction = update / previous_update
        previous_update = update

        residual = system.residual(X, Y)
        if residual <= options.rh_tol:
            return X, Y, iteration, "neumann", residual, contraction
        if not np.isfinite(residual):
            break
        if iteration >= 3 and contraction > options.contraction_switch:
            logger.debug(f"Neumann contraction {contraction:.3f} above {options.contraction_switch}; switching to GMRES")
            break

    A = system.operator()
    rhs = system.rhs()
    x0 = system.pack(X, Y) if np.all(np.isfinite(X)) and np.all(np.isfinite(Y)) else None
    atol = 0.5 * options.rh_tol / system.weight
    solution, info = gmres(A, rhs, x0=x0, rtol=0.0, atol=atol, restart=options.gmres_restart, maxiter=options.max_iter)
    X, Y = system.unpack(solution)
    residual = system.residual(X, Y)
    if info != 0 or residual > options.rh_tol:
        raise ConvergenceError(
            f"RH solve did not converge: residual {residual:.3e} > {options.rh_tol:.1e} "
            f"(Neumann contraction estimate {contraction:.3f}, gmres info {info})",
            residual=residual,
            contraction=contraction,
        )
    return X, Y, iteration, "gmres", residual, contraction


def solve_rh_positive(x: float, scattering: ScatteringData, plan: ProjectorPlan, options: SolverOptions = SolverOptions()) -> RHSolveState:
    """xi_- = e1 + P-(r- e^{2i lam x} eta_+), eta_+ = e2 + P+(conj(r+) e^{-2i lam x} xi_-)"""
    if x < 0:
        raise InputError(f"positive branch needs x >= 0, got {x}")
    e = phase(x, scattering)
    system = _CoupledSystem(
        -1, scattering.r_minus * e,
        +1, np.conj(scattering.r_plus) * np.conj(e),
        plan,
    )
    return _finish(POSITIVE, x, system, scattering.r_plus, scattering.r_minus, options)


def solve_rh_negative(
    x: float, scattering: ScatteringData, deltas: DeltaSet, plan: ProjectorPlan, options: SolverOptions = SolverOptions()
) -> RHSolveState:
    """xi_{+,d} = e1 + P+(r-_d e^{2i lam x} eta_{-,d}), eta_{-,d} = e2 + P-(conj(r+_d) e^{-2i lam x} xi_{+,d})"""
    if deltas is None:
        raise InputError("the negative_x branch needs the delta functions")
    if x > 0:
        raise InputError(f"negative branch needs x <= 0, got {x}")
    rho = (np.conj(scattering.r_plus) * scattering.r_minus).real
    jump_residual = float(np.max(np.abs(deltas.delta_plus - deltas.delta_minus - rho * deltas.delta_minus)))
    if jump_residual > options.delta_tol:
        raise DataCorruptionError(
            f"delta jump residual {jump_residual:.2e} exceeds {options.delta_tol:.1e}; deltas do not match the scattering data"
        )

    r_plus_d, r_minus_d = conjugated_coefficients(scattering, deltas)
    e = phase(x, scattering)
    system = _CoupledSystem(
        +1, r_minus_d * e,
        -1, np.conj(r_plus_d) * np.conj(e),
        plan,
    )
    state = _finish(NEGATIVE, x, system, r_plus_d, r_minus_d, options)
    state.diagnostics["delta_jump_residual"] = jump_residual
    return state


def _finish(branch: str, x: float, system: _CoupledSystem, r_plus, r_minus, options: SolverOptions) -> RHSolveState:
    try:
        X, Y, iterations, method, residual, contraction = _solve(system, options)
    except ConvergenceError as e:
        logger.error(f"RH solve failed at x = {x:.6f} ({branch}): {e}")
        raise
    m = system.m
    xi = X + np.array([[1.0], [0.0]])
    eta = Y + np.array([[0.0], [1.0]])
    return RHSolveState(
        branch=branch, x=x, xi=xi, eta=eta,
        iterations=iterations, method=method, residual=residual, contraction=contraction,
        r_plus=r_plus, r_minus=r_minus,
        diagnostics={"points": m},
    )


def rh_residual(state: RHSolveState, plan: ProjectorPlan) -> float:
    """Discrete L2 residual of the projection equations for a solved state"""
    e = np.exp(2j * plan.zgrid.lam * state.x)
    if state.branch == POSITIVE:
        system = _CoupledSystem(-1, state.r_minus * e, +1, np.conj(state.r_plus) * np.conj(e), plan)
    else:
        system = _CoupledSystem(+1, state.r_minus * e, -1, np.conj(state.r_plus) * np.conj(e), plan)
    X = state.xi - np.array([[1.0], [0.0]])
    Y = state.eta - np.array([[0.0], [1.0]])
    return system.residual(X, Y)


def deviation_norm(state: RHSolveState, spacing: float) -> float:
    """Discrete L2 norm over z of M - I"""
    X = state.xi - np.array([[1.0], [0.0]])
    Y = state.eta - np.array([[0.0], [1.0]])
    return math.sqrt(spacing * float(np.sum(np.abs(X) ** 2) + np.sum(np.abs(Y) ** 2)))


def write_state_csv(path: Union[str, Path], state: RHSolveState, z: np.ndarray) -> Path:
    """Debug dump of one solved state"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(STATE_HEADER)
        for m in range(z.size):
            row = [repr(float(z[m]))]
            for value in (state.xi[0, m], state.xi[1, m], state.eta[0, m], state.eta[1, m]):
                row += [repr(float(value.real)), repr(float(value.imag))]
            writer.writerow(row)
    return path
