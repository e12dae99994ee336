"""
Direct scattering service for the NLS-GI engine
Jost functions by integrating-factor stepping, scattering data a, b, r and r+-
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from nlsgi.core.errors import ConvergenceError, InputError, SolitonGateError, StepSizeError
from nlsgi.services.grid import PotentialField, SpatialGrid, SpectralGrid, spectral_shift

logger = logging.getLogger(__name__)

JOST_KINDS = ("m+", "m-", "n+", "n-")
STEPPERS = ("magnus4", "trapezoid")

_GAUSS_OFFSETS = (0.5 - math.sqrt(3.0) / 6.0, 0.5 + math.sqrt(3.0) / 6.0)


@dataclass(frozen=True, eq=False)
class JostField:
    """A modified Jost function on the z-grid

    origin holds the 2-vector at x = 0 (shape (2, M)); values holds the whole
    (N, 2, M) field only when requested. sup_deviation is sup over x of
    |m - e| per z node; a_integral and b_integral are filled for m- only.
    """

    which: str
    grid: SpatialGrid
    zgrid: SpectralGrid
    origin: np.ndarray
    far_end: np.ndarray
    sup_deviation: np.ndarray
    a_integral: Optional[np.ndarray] = None
    b_integral: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class JostAsymptotics:
    """q+-(x) = 1/2 int_{+-inf}^x u conj(w) and second-order coefficients at x = 0"""

    q_plus: np.ndarray
    q_minus: np.ndarray
    m2_plus: Optional[np.ndarray] = None
    m2_minus: Optional[np.ndarray] = None
    n2_plus: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class ScatteringData:
    zgrid: SpectralGrid
    a: np.ndarray
    b: np.ndarray
    r: np.ndarray
    r_plus: np.ndarray
    r_minus: np.ndarray
    min_abs_a: float
    unitarity_max_err: float
    unitarity_pos_err: float = 0.0
    unitarity_neg_err: float = 0.0
    parity_max_err: float = 0.0
    zero_count: int = 0
    a_integral: Optional[np.ndarray] = None
    t: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def replace(self, **changes: Any) -> "ScatteringData":
        return dataclasses.replace(self, **changes)


def _coefficients(potential: PotentialField, zgrid: SpectralGrid, which: str):
    """Diagonal d1, d2 over z and off-diagonal p, q over x for A = [[d1, p], [q, d2]]"""
    u, w = potential.u, potential.w
    lam = zgrid.lam.astype(complex)
    zeros = np.zeros_like(lam)
    if which[0] == "m":
        # m' = [[0, u/2], [conj(w), 2i lam]] m
        return zeros, 2j * lam, 0.5 * u, np.conj(w)
    # n' = [[-2i lam, w], [conj(u)/2, 0]] n
    return -2j * lam, zeros, w, 0.5 * np.conj(u)


def _expm2(o11, o12, o21, o22):
    """Exponential of a batch of 2x2 matrices"""
    half_trace = 0.5 * (o11 + o22)
    delta = 0.5 * (o11 - o22)
    mu = np.sqrt(delta * delta + o12 * o21)
    small = np.abs(mu) < 1e-6
    safe_mu = np.where(small, 1.0, mu)
    cosh = np.cosh(mu)
    sinhc = np.where(small, 1.0 + mu * mu / 6.0, np.sinh(mu) / safe_mu)
    scale = np.exp(half_trace)
    return (
        scale * (cosh + sinhc * delta),
        scale * sinhc * o12,
        scale * sinhc * o21,
        scale * (cosh - sinhc * delta),
    )


def _phi_weights(c: np.ndarray, h: float):
    """Product-integration weights for int_0^h e^{c(h-s)} f(s) ds with f linear"""
    ch = c * h
    small = np.abs(ch) < 1e-3
    safe_c = np.where(small, 1.0, c)
    e = np.exp(ch)
    beta = np.where(small, h * (0.5 + ch / 6.0 + ch ** 2 / 24.0 + ch ** 3 / 120.0), (e - 1.0 - ch) / (safe_c ** 2 * h))
    alpha = np.where(small, h * (0.5 + ch / 3.0 + ch ** 2 / 8.0 + ch ** 3 / 30.0), (e - 1.0) / safe_c - beta)
    return e, alpha, beta


def solve_jost(
    potential: PotentialField,
    zgrid: SpectralGrid,
    which: str,
    stepper: str = "magnus4",
    keep_full: bool = False,
    max_phase_step: float = 3.0,
) -> JostField:
    """Integrate a modified Jost function from its normalizing end across the grid

    m+-: m' = [[0, u/2], [conj(w), 2i lam]] m, m -> e1 at +-inf.
    n+-: n' = [[-2i lam, w], [conj(u)/2, 0]] n, n -> e2 at +-inf.
    The diagonal part is propagated exactly on every cell.
    """
    if which not in JOST_KINDS:
        raise InputError(f"unknown Jost function '{which}' (expected one of {JOST_KINDS})")
    if stepper not in STEPPERS:
        raise InputError(f"unknown stepper '{stepper}' (expected one of {STEPPERS})")

    grid = potential.grid
    n_points = grid.point_count
    dx = grid.spacing
    phase_step = float(np.max(np.abs(zgrid.lam))) * dx
    if phase_step > max_phase_step:
        raise StepSizeError(
            f"|z+1|*dx = {phase_step:.3f} exceeds {max_phase_step}; use a finer spatial grid or a smaller Z",
            phase_step=phase_step,
        )

    d1, d2, p, q = _coefficients(potential, zgrid, which)
    downward = which.endswith("+")
    h = -dx if downward else dx
    order = range(n_points - 1, -1, -1) if downward else range(n_points)
    order = list(order)

    boundary = np.array([1.0, 0.0]) if which[0] == "m" else np.array([0.0, 1.0])
    v1 = np.full(zgrid.point_count, boundary[0], dtype=complex)
    v2 = np.full(zgrid.point_count, boundary[1], dtype=complex)

    if stepper == "magnus4":
        p_gauss = [spectral_shift(p, grid, c * h) for c in _GAUSS_OFFSETS]
        q_gauss = [spectral_shift(q, grid, c * h) for c in _GAUSS_OFFSETS]
        s = math.sqrt(3.0) * h * h / 12.0
        d_diff = d1 - d2
    else:
        e1w, alpha1, beta1 = _phi_weights(d1, h)
        e2w, alpha2, beta2 = _phi_weights(d2, h)

    origin = None
    sup_dev = np.zeros(zgrid.point_count)
    a_acc = np.zeros(zgrid.point_count, dtype=complex) if which == "m-" else None
    b_acc = np.zeros(zgrid.point_count, dtype=complex) if which == "m-" else None
    values = np.empty((n_points, 2, zgrid.point_count), dtype=complex) if keep_full else None
    u = potential.u
    w_bar = np.conj(potential.w)
    x = grid.nodes
    lam = zgrid.lam

    for step, j in enumerate(order):
        if values is not None:
            values[j, 0], values[j, 1] = v1, v2
        if j == grid.origin_index:
            origin = np.stack([v1.copy(), v2.copy()])
        np.maximum(sup_dev, np.sqrt(np.abs(v1 - boundary[0]) ** 2 + np.abs(v2 - boundary[1]) ** 2), out=sup_dev)
        if a_acc is not None:
            # a = m1(+inf) and b = e^{-2i lam x} m2(x) / (2k) as x -> +inf
            a_acc += 0.5 * dx * u[j] * v2
            b_acc += dx * w_bar[j] * np.exp(-2j * lam * x[j]) * v1

        if step == len(order) - 1:
            break

        if stepper == "magnus4":
            p1, p2 = p_gauss[0][j], p_gauss[1][j]
            q1, q2 = q_gauss[0][j], q_gauss[1][j]
            commutator = s * (p2 * q1 - p1 * q2)
            o11 = h * d1 + commutator
            o22 = h * d2 - commutator
            o12 = 0.5 * h * (p1 + p2) + s * d_diff * (p1 - p2)
            o21 = 0.5 * h * (q1 + q2) - s * d_diff * (q1 - q2)
            e11, e12, e21, e22 = _expm2(o11, o12, o21, o22)
            v1, v2 = e11 * v1 + e12 * v2, e21 * v1 + e22 * v2
        else:
            nxt = order[step + 1]
            r1 = e1w * v1 + alpha1 * p[j] * v2
            r2 = e2w * v2 + alpha2 * q[j] * v1
            bp = beta1 * p[nxt]
            bq = beta2 * q[nxt]
            v1 = (r1 + bp * r2) / (1.0 - bp * bq)
            v2 = r2 + bq * v1

    bad = ~(np.isfinite(v1) & np.isfinite(v2))
    if np.any(bad):
        z_bad = zgrid.nodes[bad]
        raise ConvergenceError(
            f"Jost stepper for {which} produced non-finite values at {bad.sum()} z nodes (first z = {z_bad[0]:.4f})",
            z=float(z_bad[0]),
        )

    return JostField(
        which=which,
        grid=grid,
        zgrid=zgrid,
        origin=origin,
        far_end=np.stack([v1, v2]),
        sup_deviation=sup_dev,
        a_integral=None if a_acc is None else 1.0 + a_acc,
        b_integral=None if b_acc is None else b_acc / (2.0 * zgrid.k),
        values=values,
    )


def jost_asymptotics(potential: PotentialField, zgrid: SpectralGrid, fields: Optional[Dict[str, JostField]] = None) -> JostAsymptotics:
    """q+- by cumulative quadrature and the second-order coefficients at x = 0"""
    grid = potential.grid
    integrand = 0.5 * potential.u * np.conj(potential.w)
    q_minus = cumulative_trapezoid(integrand, dx=grid.spacing, initial=0.0)
    q_plus = q_minus - q_minus[-1]

    fields = fields or {}
    j0 = grid.origin_index
    z = zgrid.nodes
    w0 = potential.w[j0]
    e1 = np.array([[1.0], [0.0]])
    e2 = np.array([[0.0], [1.0]])

    def m2(jost: Optional[JostField], q0: complex):
        if jost is None:
            return None
        return 2j * z * (jost.origin - e1) + q0 * e1 + np.conj(w0) * e2

    n_plus = fields.get("n+")
    n2_plus = None
    if n_plus is not None:
        n2_plus = 2j * z * (n_plus.origin - e2) - w0 * e1 - np.conj(q_plus[j0]) * e2

    return JostAsymptotics(
        q_plus=q_plus,
        q_minus=q_minus,
        m2_plus=m2(fields.get("m+"), q_plus[j0]),
        m2_minus=m2(fields.get("m-"), q_minus[j0]),
        n2_plus=n2_plus,
    )


def _wronskians(m_minus: np.ndarray, m_plus: np.ndarray, n_plus: np.ndarray, u0: complex, k: np.ndarray):
    """a and b from the x = 0 columns repackaged as phi+- and varphi+"""
    two_k = 2.0 * k
    phi_minus = (m_minus[0], (-1j * np.conj(u0) * m_minus[0] + m_minus[1]) / two_k)
    phi_plus = (m_plus[0], (-1j * np.conj(u0) * m_plus[0] + m_plus[1]) / two_k)
    varphi_plus = (-(n_plus[0] + 1j * u0 * n_plus[1]) / two_k, n_plus[1])

    a = phi_minus[0] * varphi_plus[1] - phi_minus[1] * varphi_plus[0]
    b = phi_plus[0] * phi_minus[1] - phi_plus[1] * phi_minus[0]
    return a, b


def _parity_error(a: np.ndarray, b: np.ndarray, m_minus: JostField, k: np.ndarray) -> float:
    """Wronskians at +k against the integral representations at -k

    The a representation carries no k; the b representation is B / (2k) with B
    accumulated along m-, so at -k it is -b_integral.
    """
    if m_minus.a_integral is None or m_minus.b_integral is None:
        return float("nan")
    b_flip = -m_minus.b_integral
    scale = np.maximum(np.abs(a), 1.0)
    return float(max(np.max(np.abs(a - m_minus.a_integral) / scale), np.max(np.abs(b + b_flip) / scale)))


def winding_number(a: np.ndarray) -> int:
    """Net turns of a(z) around 0 along the real z line (zeros of a in Im z > 0)"""
    phase = np.unwrap(np.angle(a))
    return int(round((phase[-1] - phase[0]) / (2.0 * np.pi)))


def scattering_ab(
    m_minus: JostField,
    m_plus: JostField,
    n_plus: JostField,
    potential: PotentialField,
    gate_tol: Optional[float] = None,
) -> ScatteringData:
    """Assemble a, b, r, r+- from the x = 0 Jost columns"""
    zgrid = m_minus.zgrid
    k = zgrid.k
    z = zgrid.nodes
    u0 = potential.u[potential.grid.origin_index]

    a, b = _wronskians(m_minus.origin, m_plus.origin, n_plus.origin, u0, k)
    parity_max_err = _parity_error(a, b, m_minus, k)

    r = b / a
    r_plus = r / (2.0 * k)
    r_minus = 2.0 * k * r

    abs_a2, abs_b2 = np.abs(a) ** 2, np.abs(b) ** 2
    positive = z > 0
    pos_err = float(np.max(np.abs(abs_a2[positive] + abs_b2[positive] - 1.0), initial=0.0))
    neg_err = float(np.max(np.abs(abs_a2[~positive] - abs_b2[~positive] - 1.0), initial=0.0))

    data = ScatteringData(
        zgrid=zgrid,
        a=a,
        b=b,
        r=r,
        r_plus=r_plus,
        r_minus=r_minus,
        min_abs_a=float(np.min(np.abs(a))),
        unitarity_max_err=max(pos_err, neg_err),
        unitarity_pos_err=pos_err,
        unitarity_neg_err=neg_err,
        parity_max_err=parity_max_err,
        zero_count=winding_number(a),
        a_integral=m_minus.a_integral,
        metadata={"source": potential.metadata.get("source", "samples")},
    )
    if data.a_integral is not None:
        data.metadata["representation_gap"] = float(np.max(np.abs(a - data.a_integral)))
    if m_minus.b_integral is not None:
        data.metadata["b_representation_gap"] = float(np.max(np.abs(b - m_minus.b_integral)))

    logger.info(
        f"Scattering data: min|a| = {data.min_abs_a:.6f}, unitarity error = {data.unitarity_max_err:.2e}, "
        f"parity error = {parity_max_err:.2e}, zero count = {data.zero_count}"
    )
    if gate_tol is not None:
        check_gate(data, gate_tol)
    return data


def check_gate(data: ScatteringData, gate_tol: float) -> None:
    """Refuse data that may carry eigenvalues or resonances"""
    if data.min_abs_a <= gate_tol or data.zero_count != 0:
        raise SolitonGateError(
            f"soliton-free gate failed: min|a| = {data.min_abs_a:.3e} (gate_tol {gate_tol:.1e}), "
            f"winding count = {data.zero_count}",
            min_abs_a=data.min_abs_a,
            zero_count=data.zero_count,
        )


def direct_scattering(
    potential: PotentialField,
    zgrid: SpectralGrid,
    stepper: str = "magnus4",
    gate_tol: Optional[float] = None,
    max_phase_step: float = 3.0,
) -> ScatteringData:
    """Solve m-, m+, n+ and assemble the scattering data"""
    try:
        fields = {
            which: solve_jost(potential, zgrid, which, stepper=stepper, max_phase_step=max_phase_step)
            for which in ("m-", "m+", "n+")
        }
        data = scattering_ab(fields["m-"], fields["m+"], fields["n+"], potential, gate_tol=gate_tol)
    except SolitonGateError:
        raise
    except Exception as e:
        logger.error(f"Direct scattering failed: {e}")
        raise
    data.metadata["stepper"] = stepper
    data.metadata["sup_deviation_m_plus"] = float(np.max(fields["m+"].sup_deviation))
    return data


def soliton_free_bound(potential: PotentialField) -> float:
    """1 - ||u||_1 exp(||W1||_1) / 2; positive means a(z) has no zeros"""
    dx = potential.grid.spacing
    u, w = potential.u, potential.w
    l1_u = float(dx * np.sum(np.abs(u)))
    l1_w1 = float(dx * np.sum(np.sqrt(0.25 * np.abs(u) ** 2 + np.abs(w) ** 2)))
    return 1.0 - 0.5 * l1_u * math.exp(l1_w1)


def jost_majorant(potential: PotentialField) -> float:
    """exp(||W1||_1) - 1, a bound on sup |m+- - e1|"""
    dx = potential.grid.spacing
    l1_w1 = float(dx * np.sum(np.sqrt(0.25 * np.abs(potential.u) ** 2 + np.abs(potential.w) ** 2)))
    return math.expm1(l1_w1)


def born_b(potential: PotentialField, zgrid: SpectralGrid, chunk: int = 256) -> np.ndarray:
    """First Born term b(k) ~ -k int e^{-2i(k^2+1)y} conj(u(y)) dy"""
    x = potential.grid.nodes
    u_bar = np.conj(potential.u) * potential.grid.spacing
    lam = zgrid.lam
    out = np.empty(zgrid.point_count, dtype=complex)
    for start in range(0, zgrid.point_count, chunk):
        stop = min(start + chunk, zgrid.point_count)
        kernel = np.exp(-2j * np.outer(lam[start:stop], x))
        out[start:stop] = kernel @ u_bar
    return -zgrid.k * out
