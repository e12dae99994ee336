"""
Archive service for the NLS-GI engine
Readers and writers for scattering archives, reconstructions, snapshots and reports
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from nlsgi.core.errors import InputError
from nlsgi.services.grid import SpectralGrid, read_potential_csv, write_potential_csv
from nlsgi.services.projector import DeltaSet
from nlsgi.services.scattering import ScatteringData, winding_number

logger = logging.getLogger(__name__)

SCATTERING_CSV_HEADER = ["z", "re_a", "im_a", "re_rp", "im_rp", "re_rm", "im_rm"]
DELTA_CSV_HEADER = ["z", "re_dp", "im_dp", "re_dm", "im_dm"]
RECONSTRUCTION_HEADER = ["x", "re_u", "im_u", "w_residual"]

PathLike = Union[str, Path]


def _floats(values: np.ndarray) -> List[float]:
    return [float(v) for v in values]


def write_json(path: PathLike, payload: Dict[str, Any]) -> Path:
    """Deterministic JSON (sorted keys, repr floats)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(payload, dict):
        raise InputError(f"{path}: expected a JSON object")
    return payload


def scattering_payload(data: ScatteringData) -> Dict[str, Any]:
    return {
        "zgrid": {"Z": data.zgrid.half_width, "M": data.zgrid.point_count},
        "a_re": _floats(data.a.real),
        "a_im": _floats(data.a.imag),
        "b_re": _floats(data.b.real),
        "b_im": _floats(data.b.imag),
        "rp_re": _floats(data.r_plus.real),
        "rp_im": _floats(data.r_plus.imag),
        "rm_re": _floats(data.r_minus.real),
        "rm_im": _floats(data.r_minus.imag),
        "min_abs_a": data.min_abs_a,
        "unitarity_max_err": data.unitarity_max_err,
        "unitarity_pos_err": data.unitarity_pos_err,
        "unitarity_neg_err": data.unitarity_neg_err,
        "parity_max_err": data.parity_max_err,
        "zero_count": data.zero_count,
        "t": data.t,
        "potential_source": data.metadata.get("source"),
    }


def write_scattering_archive(data: ScatteringData, out_dir: PathLike, stem: str = "scattering") -> Tuple[Path, Path]:
    """JSON archive plus its CSV mirror"""
    out_dir = Path(out_dir)
    json_path = write_json(out_dir / f"{stem}.json", scattering_payload(data))

    csv_path = out_dir / f"{stem}.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(SCATTERING_CSV_HEADER)
        z = data.zgrid.nodes
        for m in range(z.size):
            writer.writerow([
                repr(float(z[m])),
                repr(float(data.a[m].real)), repr(float(data.a[m].imag)),
                repr(float(data.r_plus[m].real)), repr(float(data.r_plus[m].imag)),
                repr(float(data.r_minus[m].real)), repr(float(data.r_minus[m].imag)),
            ])
    logger.info(f"Wrote scattering archive {json_path}")
    return json_path, csv_path


def read_scattering_archive(path: PathLike) -> ScatteringData:
    """Rebuild ScatteringData from a JSON archive, validating shapes and the r+- relation"""
    payload = read_json(path)
    try:
        zgrid = SpectralGrid(float(payload["zgrid"]["Z"]), int(payload["zgrid"]["M"]))

        def pair(prefix: str) -> np.ndarray:
            re = np.asarray(payload[f"{prefix}_re"], dtype=float)
            im = np.asarray(payload[f"{prefix}_im"], dtype=float)
            if re.shape != (zgrid.point_count,) or im.shape != (zgrid.point_count,):
                raise InputError(f"{path}: array {prefix} has the wrong length")
            return re + 1j * im

        a, b = pair("a"), pair("b")
        r_plus, r_minus = pair("rp"), pair("rm")
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"{path}: malformed scattering archive ({e})") from e

    if not all(np.all(np.isfinite(arr)) for arr in (a, b, r_plus, r_minus)):
        raise InputError(f"{path}: archive contains non-finite values")
    if zgrid.point_count < 8 or zgrid.half_width <= 0:
        raise InputError(f"{path}: invalid spectral grid")
    gap = np.max(np.abs(r_minus - 4.0 * zgrid.nodes * r_plus) / (1.0 + np.abs(r_minus)))
    if gap > 1e-8:
        raise InputError(f"{path}: r- != 4 z r+ (max relative gap {gap:.2e})")

    abs_a = np.abs(a)
    return ScatteringData(
        zgrid=zgrid,
        a=a,
        b=b,
        r=r_plus * 2.0 * zgrid.k,
        r_plus=r_plus,
        r_minus=r_minus,
        min_abs_a=float(np.min(abs_a)),
        unitarity_max_err=float(payload.get("unitarity_max_err", 0.0)),
        unitarity_pos_err=float(payload.get("unitarity_pos_err", 0.0)),
        unitarity_neg_err=float(payload.get("unitarity_neg_err", 0.0)),
        parity_max_err=float(payload.get("parity_max_err", 0.0)),
        zero_count=winding_number(a),
        t=float(payload.get("t", 0.0)),
        metadata={"archive": str(path), "source": payload.get("potential_source")},
    )


def write_reconstruction(out_dir: PathLike, x: np.ndarray, u_rec: np.ndarray, residual: np.ndarray, summary: Dict[str, Any]) -> Tuple[Path, Path]:
    out_dir = Path(out_dir)
    csv_path = write_potential_csv(out_dir / "reconstruction.csv", x, u_rec, extra={"w_residual": residual})
    json_path = write_json(out_dir / "summary.json", summary)
    return csv_path, json_path


def read_reconstruction_csv(path: PathLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e
    if not rows or rows[0] != RECONSTRUCTION_HEADER:
        raise InputError(f"{path}: header must be {','.join(RECONSTRUCTION_HEADER)}")
    try:
        table = np.array([[float(cell) for cell in row] for row in rows[1:] if row])
    except ValueError as e:
        raise InputError(f"{path}: malformed row ({e})") from e
    return table[:, 0], table[:, 1] + 1j * table[:, 2], table[:, 3]


def write_snapshot(out_dir: PathLike, label: str, t: float, x: np.ndarray, u: np.ndarray) -> Path:
    return write_potential_csv(Path(out_dir) / f"snapshot_{label}_t{t:.6f}.csv", x, u)


def read_snapshot(path: PathLike) -> Tuple[np.ndarray, np.ndarray]:
    return read_potential_csv(path)


def write_delta_csv(path: PathLike, deltas: DeltaSet, z: np.ndarray) -> Path:
    """Debug dump of delta+-"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(DELTA_CSV_HEADER)
        for m in range(z.size):
            dp, dm = deltas.delta_plus[m], deltas.delta_minus[m]
            writer.writerow([repr(float(z[m])), repr(float(dp.real)), repr(float(dp.imag)), repr(float(dm.real)), repr(float(dm.imag))])
    return path
