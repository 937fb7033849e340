"""Multi-way fixed-effects OLS via iterative within-group demeaning.

Student, teacher, and task intercepts are absorbed by alternating
group-mean subtraction until convergence; the demeaned system is then
solved with a least-squares orthogonal decomposition. Standard errors are
classical, with degrees of freedom adjusted for the absorbed groups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import qr as scipy_qr
from scipy.special import stdtr

from .uptake import DIMENSIONS

FE_DIMS = ("student", "teacher", "task")
DEMEAN_TOLERANCE = 1e-10
DEMEAN_MAX_SWEEPS = 100

REGRESSOR_NAMES = ("fua_l", "fua_t", "baseline_score") + DIMENSIONS


class RankDeficiencyError(Exception):
    def __init__(self, column: str):
        self.column = column
        super().__init__(
            f"regressor {column!r} is collinear after absorbing fixed effects"
        )


@dataclass(frozen=True)
class PanelRow:
    student_id: str
    teacher_id: str
    task_id: str
    dependent: float
    fua_l: int
    fua_t: int
    sfl_delta: tuple[float, ...]   # six metric changes, canonical dimension order
    baseline_score: float

    def __post_init__(self):
        if len(self.sfl_delta) != len(DIMENSIONS):
            raise ValueError(f"sfl_delta must have {len(DIMENSIONS)} entries")
        values = (self.dependent, self.baseline_score, *self.sfl_delta)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("panel row contains non-finite values")
        if not (self.student_id and self.teacher_id and self.task_id):
            raise ValueError("fixed-effect keys must be non-empty")


@dataclass(frozen=True)
class RegressionResult:
    coefficients: dict[str, float]
    std_errors: dict[str, float]
    p_values: dict[str, float]
    r_squared: float
    n_obs: int
    df_resid: int
    fe_dims: tuple[str, ...]


def _regressor_value(row: PanelRow, name: str) -> float:
    if name == "fua_l":
        return float(row.fua_l)
    if name == "fua_t":
        return float(row.fua_t)
    if name == "baseline_score":
        return row.baseline_score
    if name in DIMENSIONS:
        return row.sfl_delta[DIMENSIONS.index(name)]
    raise KeyError(f"unknown regressor {name!r}")


def _codes(keys: Sequence[str]) -> np.ndarray:
    mapping: dict[str, int] = {}
    out = np.empty(len(keys), dtype=np.intp)
    for i, key in enumerate(keys):
        out[i] = mapping.setdefault(key, len(mapping))
    return out


def _demean(matrix: np.ndarray, group_lists: Sequence[np.ndarray]) -> np.ndarray:
    """Alternating within-group centering of every column until the largest
    absolute change in a sweep drops below tolerance."""
    data = matrix.copy()
    counts = [np.bincount(g).astype(np.float64) for g in group_lists]
    for _ in range(DEMEAN_MAX_SWEEPS):
        before = data.copy()
        for g, cnt in zip(group_lists, counts):
            for col in range(data.shape[1]):
                sums = np.bincount(g, weights=data[:, col])
                data[:, col] -= (sums / cnt)[g]
        if float(np.max(np.abs(data - before))) < DEMEAN_TOLERANCE:
            break
    return data


def fe_regression(
    rows: Sequence[PanelRow],
    regressors: Sequence[str],
    fe_dims: Sequence[str] = FE_DIMS,
) -> RegressionResult:
    """Absorb the fixed-effect dimensions, then OLS on the demeaned data.

    Raises RankDeficiencyError naming the first regressor that is
    perfectly collinear once the fixed effects are absorbed.
    """
    if not rows:
        raise ValueError("empty panel")
    names = list(regressors)
    for name in names:
        if name not in REGRESSOR_NAMES:
            raise KeyError(f"unknown regressor {name!r}")
    n, k = len(rows), len(names)
    groups = []
    n_groups = []
    for dim in fe_dims:
        keys = [getattr(r, f"{dim}_id") for r in rows]
        codes = _codes(keys)
        groups.append(codes)
        n_groups.append(int(codes.max()) + 1)
    absorbed = n_groups[0] + sum(g - 1 for g in n_groups[1:]) if n_groups else 0
    if n <= k:
        raise ValueError("more regressors than observations")

    y = np.asarray([r.dependent for r in rows], dtype=np.float64)
    x = np.asarray([[_regressor_value(r, name) for name in names] for r in rows])
    stacked = _demean(np.column_stack([y, x]), groups)
    y_dem, x_dem = stacked[:, 0], stacked[:, 1:]

    orig_norms = np.linalg.norm(x, axis=0)
    dem_norms = np.linalg.norm(x_dem, axis=0)
    for j, name in enumerate(names):
        if dem_norms[j] <= 1e-9 * max(1.0, float(orig_norms[j])):
            raise RankDeficiencyError(name)
    _, r_mat, pivots = scipy_qr(x_dem, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r_mat))
    tol = max(x_dem.shape) * np.finfo(np.float64).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < k:
        raise RankDeficiencyError(names[int(pivots[rank])])

    beta, *_ = np.linalg.lstsq(x_dem, y_dem, rcond=None)
    residuals = y_dem - x_dem @ beta
    rss = float(residuals @ residuals)
    df_resid = n - k - absorbed
    if df_resid <= 0:
        raise ValueError("no residual degrees of freedom after absorbing fixed effects")
    sigma2 = rss / df_resid
    xtx_inv = np.linalg.inv(x_dem.T @ x_dem)
    std_errors = np.sqrt(np.maximum(0.0, sigma2 * np.diag(xtx_inv)))

    p_values = {}
    for name, b, se in zip(names, beta, std_errors):
        if se == 0.0:
            p_values[name] = 0.0 if b != 0.0 else 1.0
        else:
            p_values[name] = 2.0 * float(stdtr(df_resid, -abs(b / se)))

    tss = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - rss / tss if tss > 0 else 0.0

    return RegressionResult(
        coefficients={name: float(b) for name, b in zip(names, beta)},
        std_errors={name: float(se) for name, se in zip(names, std_errors)},
        p_values=p_values,
        r_squared=r_squared,
        n_obs=n,
        df_resid=df_resid,
        fe_dims=tuple(fe_dims),
    )
