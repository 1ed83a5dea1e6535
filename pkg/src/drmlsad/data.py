"""CSV ingestion, the synthetic factor-model generator and JSON helpers."""
import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DrMlsadProblem, ReturnsDataset, build_scenario_model
from .exceptions import InfeasibleProblemError, MissingValuesError, ParseError

MISSING_SENTINELS = (-99.99, -999.0)


def _is_missing(v):
    return any(math.isclose(v, s, rel_tol=0.0, abs_tol=1e-9) for s in MISSING_SENTINELS)


def load_returns_csv(path, missing="reject", unit="percent", label_column=None):
    """Read a header-plus-rows returns panel.

    Parameters
    ----------
    path : str or Path
    missing : {"reject", "drop-assets"}
        What to do with sentinel values (-99.99, -999): raise
        :class:`MissingValuesError`, or remove every asset column that has one.
    unit : {"percent", "fraction"}
        Unit recorded on the dataset.
    label_column : bool, optional
        Treat the first column as period labels.  By default it is a label
        column when its header is empty or one of ``date``/``period``/``t``.
    """
    path = Path(path)
    if missing not in ("reject", "drop-assets"):
        raise ValueError(f"unknown missing-value policy {missing!r}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise ParseError(1, "empty file")
    header = [c.strip() for c in rows[0]]
    if label_column is None:
        label_column = header[0].lower() in ("", "date", "period", "t")
    names = header[1:] if label_column else header
    labels, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(lineno, f"expected {len(header)} fields, got {len(row)}")
        cells = row[1:] if label_column else row
        if label_column:
            labels.append(row[0].strip())
        try:
            values.append([float(c) for c in cells])
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
    if not values:
        raise ParseError(2, "no data rows")
    r = np.array(values, dtype=float)
    if not np.all(np.isfinite(r)):
        bad = int(np.argwhere(~np.isfinite(r))[0, 0]) + 2
        raise ParseError(bad, "non-finite value")
    miss = np.vectorize(_is_missing)(r)
    if miss.any():
        cols = np.flatnonzero(miss.any(axis=0))
        if missing == "reject":
            raise MissingValuesError(names[cols[0]])
        keep = np.setdiff1d(np.arange(r.shape[1]), cols)
        r = r[:, keep]
        names = [names[j] for j in keep]
    return ReturnsDataset(r, names, labels if label_column else None, unit)


def save_returns_csv(data, path):
    """Write ``data`` so that :func:`load_returns_csv` reads it back exactly."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["period", *data.asset_names])
        labels = data.period_labels or [str(i) for i in range(data.n_periods)]
        for lab, row in zip(labels, data.returns):
            w.writerow([lab, *(repr(float(v)) for v in row)])


@dataclass(frozen=True)
class SyntheticSpec:
    """One-factor normal return model: ``xi_i = phi + zeta_i``.

    ``phi ~ N(phi_mean, phi_scale)`` is shared by all assets in a period and
    ``zeta_i ~ N(i*zeta_mean_slope, i*zeta_scale_slope)`` for ``i = 1..m``.
    The scale is a standard deviation unless ``scale_interpretation`` is
    ``"Variance"``.  Values are fractions (0.03 is 3%).
    """

    n_samples: int
    n_assets: int
    phi_mean: float = 0.0
    phi_scale: float = 0.02
    zeta_mean_slope: float = 0.03
    zeta_scale_slope: float = 0.025
    scale_interpretation: str = "StdDev"
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1 or self.n_assets < 1:
            raise ValueError("n_samples and n_assets must be positive")
        if self.phi_scale < 0 or self.zeta_scale_slope < 0:
            raise ValueError("scales must be nonnegative")
        if self.scale_interpretation not in ("StdDev", "Variance"):
            raise ValueError(f"unknown scale interpretation {self.scale_interpretation!r}")


def gen_synthetic(spec):
    """Draw an ``N x m`` panel from :class:`SyntheticSpec` (fraction units)."""
    rng = np.random.default_rng(spec.seed)
    n, m = spec.n_samples, spec.n_assets
    idx = np.arange(1, m + 1, dtype=float)
    phi_sd = spec.phi_scale
    zeta_sd = spec.zeta_scale_slope * idx
    if spec.scale_interpretation == "Variance":
        phi_sd, zeta_sd = math.sqrt(phi_sd), np.sqrt(zeta_sd)
    phi = spec.phi_mean + phi_sd * rng.standard_normal((n, 1))
    zeta = spec.zeta_mean_slope * idx + zeta_sd * rng.standard_normal((n, m))
    return ReturnsDataset(phi + zeta, unit="fraction")


def bench_rho(data, rule="mean"):
    """Target return for the synthetic benchmark.

    ``rule="literal"`` is ``(0.2/N) * sum(mu_hat)``; with N periods and m
    assets it exceeds ``max(mu_hat)`` whenever ``m >> N``, so the default
    ``rule="mean"`` divides by the number of assets instead (``0.2 * mean``).
    """
    mu = build_scenario_model(data).mu_hat
    if rule == "literal":
        return 0.2 / data.n_periods * mu.sum()
    if rule == "mean":
        return 0.2 * mu.mean()
    raise ValueError(f"unknown rho rule {rule!r}")


def bench_defaults(data, epsilon=0.15, rule="mean"):
    """Benchmark problem: ``eps = 0.15`` and ``rho`` from :func:`bench_rho`."""
    scen = build_scenario_model(data)
    rho = bench_rho(data, rule)
    if scen.mu_hat.max() < rho + epsilon:
        raise InfeasibleProblemError(
            f"rho + eps = {rho + epsilon:.6g} exceeds max(mu_hat) = {scen.mu_hat.max():.6g}")
    return DrMlsadProblem(scen, epsilon, rho)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if hasattr(obj, "value") and not isinstance(obj, (int, float, str)):
        return obj.value
    return obj


def to_json(obj, path=None, indent=2):
    """Serialize a report (anything with ``to_dict``) or plain dict to JSON."""
    payload = obj.to_dict() if hasattr(obj, "to_dict") else obj
    text = json.dumps(_jsonable(payload), indent=indent)
    if path is not None:
        Path(path).write_text(text + "\n", encoding="utf-8")
    return text
