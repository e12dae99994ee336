"""
Grid service for the NLS-GI engine
Spatial and spectral grids, potential ingestion, the derived field w and norms
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
from scipy import fft

from nlsgi.core.errors import InputError

logger = logging.getLogger(__name__)

POTENTIAL_HEADER = ["x", "re_u", "im_u"]


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid x_j = -L + j*dx, j = 0..N-1"""

    half_width: float
    point_count: int

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.point_count

    @cached_property
    def nodes(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.point_count)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * fft.fftfreq(self.point_count, d=self.spacing)

    @property
    def origin_index(self) -> int:
        """Index of the node x = 0"""
        return self.point_count // 2


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform grid in z = k**2, offset by dz/2 so z = 0 is never a node"""

    half_width: float
    point_count: int

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.point_count

    @cached_property
    def nodes(self) -> np.ndarray:
        return -self.half_width + self.spacing * (np.arange(self.point_count) + 0.5)

    @cached_property
    def k(self) -> np.ndarray:
        """Branch map: sqrt(z) for z > 0, i*sqrt(-z) for z < 0"""
        z = self.nodes
        return np.where(z > 0, np.sqrt(np.abs(z)) + 0j, 1j * np.sqrt(np.abs(z)))

    @cached_property
    def lam(self) -> np.ndarray:
        return self.nodes + 1.0


@dataclass(frozen=True)
class PotentialField:
    grid: SpatialGrid
    u: np.ndarray
    w: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class NormReport:
    L1: float
    L2: float
    L21: float
    H1: float
    H2: float
    H11: float

    @property
    def H2_H11(self) -> float:
        """Norm of H^2 intersected with H^{1,1}"""
        return self.H2 + self.H11

    def as_dict(self) -> Dict[str, float]:
        return {
            "L1": self.L1, "L2": self.L2, "L21": self.L21,
            "H1": self.H1, "H2": self.H2, "H11": self.H11,
        }


def make_grids(L: float, N: int, Z: float, M: int) -> Tuple[SpatialGrid, SpectralGrid]:
    """Build the spatial and spectral grids"""
    if not (L > 0 and Z > 0):
        raise InputError(f"half widths must be positive (L={L}, Z={Z})")
    if N < 8 or M < 8:
        raise InputError(f"point counts must be at least 8 (N={N}, M={M})")
    if N % 2 or M % 2:
        raise InputError(f"point counts must be even (N={N}, M={M})")
    return SpatialGrid(float(L), int(N)), SpectralGrid(float(Z), int(M))


def spectral_derivative(f: np.ndarray, grid: SpatialGrid, order: int = 1) -> np.ndarray:
    """Derivative of the periodic extension by Fourier multiplication"""
    kappa = grid.wavenumbers
    multiplier = (1j * kappa) ** order
    if order % 2:
        multiplier[grid.point_count // 2] = 0.0
    return fft.ifft(multiplier * fft.fft(f))


def spectral_shift(f: np.ndarray, grid: SpatialGrid, shift: float) -> np.ndarray:
    """Band-limited values f(x_j + shift)"""
    kappa = grid.wavenumbers
    multiplier = np.exp(1j * kappa * shift)
    multiplier[grid.point_count // 2] = math.cos(kappa[grid.point_count // 2] * shift)
    return fft.ifft(multiplier * fft.fft(f))


def compute_w(u: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """w = -i u_x + 2u - |u|^2 u / 2"""
    u = np.asarray(u, dtype=complex)
    u_x = spectral_derivative(u, grid)
    return -1j * u_x + 2.0 * u - 0.5 * np.abs(u) ** 2 * u


def parse_preset(descriptor: str) -> Tuple[str, Dict[str, float]]:
    """Parse `name:key=value,...` into (name, params)"""
    name, _, rest = descriptor.strip().partition(":")
    name = name.strip().lower()
    params: Dict[str, float] = {}
    for item in filter(None, (part.strip() for part in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"malformed preset parameter '{item}' in '{descriptor}'")
        try:
            params[key.strip()] = float(value)
        except ValueError as e:
            raise InputError(f"preset parameter '{key.strip()}' is not a number: {value!r}") from e

    allowed = {
        "sech": {"A", "x0", "phase", "v"},
        "gaussian": {"A", "x0", "sigma", "phase", "v"},
        "zero": set(),
    }
    if name not in allowed:
        raise InputError(f"unknown preset '{name}' (expected sech, gaussian or zero)")
    unknown = set(params) - allowed[name]
    if unknown:
        raise InputError(f"unknown parameters for preset '{name}': {sorted(unknown)}")
    if name == "gaussian" and params.get("sigma", 1.0) <= 0:
        raise InputError("gaussian sigma must be positive")
    return name, params


def preset_samples(descriptor: str, grid: SpatialGrid) -> np.ndarray:
    name, params = parse_preset(descriptor)
    x = grid.nodes
    if name == "zero":
        return np.zeros(grid.point_count, dtype=complex)

    amplitude = params.get("A", 1.0)
    x0 = params.get("x0", 0.0)
    carrier = np.exp(1j * (params.get("v", 0.0) * x + params.get("phase", 0.0)))
    if name == "sech":
        envelope = 1.0 / np.cosh(x - x0)
    else:
        sigma = params.get("sigma", 1.0)
        envelope = np.exp(-((x - x0) ** 2) / (2.0 * sigma ** 2))
    return amplitude * envelope * carrier


def read_potential_csv(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """Read `x,re_u,im_u` rows; returns (x, u)"""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except OSError as e:
        raise InputError(f"cannot read potential file {path}: {e}") from e

    if not rows or [cell.strip() for cell in rows[0]] != POTENTIAL_HEADER:
        raise InputError(f"{path}: header must be {','.join(POTENTIAL_HEADER)}")

    xs, us = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise InputError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
        try:
            x, re_u, im_u = (float(cell) for cell in row)
        except ValueError as e:
            raise InputError(f"{path}:{lineno}: malformed number in {row}") from e
        xs.append(x)
        us.append(complex(re_u, im_u))

    x = np.asarray(xs)
    if x.size < 2 or np.any(np.diff(x) <= 0):
        raise InputError(f"{path}: x must be strictly ascending with at least two rows")
    steps = np.diff(x)
    if np.max(np.abs(steps - steps[0])) > 1e-6 * steps[0]:
        raise InputError(f"{path}: x must be uniformly spaced")
    return x, np.asarray(us, dtype=complex)


def write_potential_csv(path: Union[str, Path], x: np.ndarray, u: np.ndarray, extra: Dict[str, np.ndarray] = None) -> Path:
    """Write `x,re_u,im_u[,extra...]` rows"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    extra = extra or {}
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(POTENTIAL_HEADER + list(extra))
        for j in range(len(x)):
            writer.writerow(
                [repr(float(x[j])), repr(float(u[j].real)), repr(float(u[j].imag))]
                + [repr(float(column[j])) for column in extra.values()]
            )
    return path


def resample(x_src: np.ndarray, u_src: np.ndarray, x_dst: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation of uniform samples; zero outside the source span"""
    n = x_src.size
    dx = x_src[1] - x_src[0]
    coefficients = fft.fft(u_src) / n
    kappa = 2.0 * np.pi * fft.fftfreq(n, d=dx)
    if n % 2 == 0:
        coefficients[n // 2] *= 0.5
        coefficients = np.append(coefficients, coefficients[n // 2])
        kappa = np.append(kappa, -kappa[n // 2])
    phases = np.exp(1j * np.outer(x_dst - x_src[0], kappa))
    values = phases @ coefficients
    inside = (x_dst >= x_src[0]) & (x_dst <= x_src[-1] + dx)
    return np.where(inside, values, 0.0)


def sample_potential(
    descriptor: Union[str, Path],
    grid: SpatialGrid,
    boundary_tol: float = 1e-10,
    allow_resample: bool = False,
) -> PotentialField:
    """Build a PotentialField from a preset descriptor or a CSV file"""
    text = str(descriptor)
    looks_like_file = isinstance(descriptor, Path) or text.endswith(".csv") or Path(text).is_file()

    if looks_like_file:
        x_src, u_src = read_potential_csv(text)
        if x_src.size == grid.point_count and np.allclose(x_src, grid.nodes, rtol=0, atol=1e-9 * grid.half_width):
            u = u_src
        elif allow_resample:
            logger.info(f"Resampling {x_src.size} input rows onto {grid.point_count} grid nodes")
            u = resample(x_src, u_src, grid.nodes)
        else:
            raise InputError(
                f"{text}: {x_src.size} rows do not match the grid "
                f"(N={grid.point_count}, L={grid.half_width}); set resample_input = true to resample"
            )
        source = text
    else:
        u = preset_samples(text, grid)
        source = text.strip()

    return potential_from_samples(u, grid, source=source, boundary_tol=boundary_tol)


def potential_from_samples(
    u: np.ndarray, grid: SpatialGrid, source: str = "samples", boundary_tol: float = 1e-10
) -> PotentialField:
    """Wrap samples as a PotentialField, derive w and check boundary decay"""
    u = np.asarray(u, dtype=complex)
    if u.shape != (grid.point_count,):
        raise InputError(f"expected {grid.point_count} samples, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise InputError(f"potential '{source}' has non-finite samples")

    boundary = float(max(abs(u[0]), abs(u[-1])))
    decay_ok = boundary <= boundary_tol
    if not decay_ok:
        logger.warning(f"Potential '{source}' does not decay at the grid ends: |u(+-L)| = {boundary:.3e} > {boundary_tol:.1e}")

    metadata = {"source": source, "boundary_value": boundary, "boundary_tol": boundary_tol, "decay_ok": decay_ok}
    return PotentialField(grid=grid, u=u, w=compute_w(u, grid), metadata=metadata)


def norms(potential: PotentialField) -> NormReport:
    """Weighted and Sobolev norms by the periodic trapezoid rule"""
    grid = potential.grid
    dx = grid.spacing
    u = potential.u
    u_x = spectral_derivative(u, grid)
    u_xx = spectral_derivative(u, grid, order=2)
    weight = 1.0 + grid.nodes ** 2

    def sq(f: np.ndarray, w: Union[float, np.ndarray] = 1.0) -> float:
        return float(dx * np.sum(w * np.abs(f) ** 2))

    l2 = sq(u)
    l21 = sq(u, weight)
    return NormReport(
        L1=float(dx * np.sum(np.abs(u))),
        L2=math.sqrt(l2),
        L21=math.sqrt(l21),
        H1=math.sqrt(l2 + sq(u_x)),
        H2=math.sqrt(l2 + sq(u_x) + sq(u_xx)),
        H11=math.sqrt(l21 + sq(u_x, weight)),
    )
