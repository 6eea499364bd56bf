"""OLS and 2SLS estimation on panel data with weak-instrument diagnostics.

Fixed effects enter as dummy columns (drop-first encoding), robust standard
errors use the HC1 sandwich, and instrument strength is reported through the
Anderson canonical-correlation LM statistic and the Cragg-Donald Wald F.
All least-squares solves go through QR decompositions; no matrix is ever
inverted explicitly and the full-size projection matrix is never formed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import linalg as sla
from scipy import special

__all__ = [
    "ROBUST_NONE",
    "ROBUST_HC1",
    "RegressionSpec",
    "Design",
    "OlsFit",
    "TslsResult",
    "SingularMatrixError",
    "DegenerateDataError",
    "build_design",
    "fit_ols",
    "fit_2sls",
    "tsls_from_panel",
    "anderson_lm",
    "cragg_donald_f",
    "chi_square_sf",
    "significance_stars",
]

logger = logging.getLogger(__name__)

ROBUST_NONE = "none"
ROBUST_HC1 = "HC1"
_ROBUST_KINDS = (ROBUST_NONE, ROBUST_HC1)


class SingularMatrixError(ValueError):
    """A design matrix is rank deficient."""


class DegenerateDataError(ValueError):
    """Data degenerate for the requested statistic (e.g. zero variance)."""


@dataclass(frozen=True)
class RegressionSpec:
    """Declarative model description: B ~ A | Z with controls and fixed effects."""

    outcome: str
    endogenous: str
    instruments: tuple[str, ...]
    controls: tuple[str, ...] = ()
    fixed_effects: tuple[str, ...] = ()
    robust: str = ROBUST_HC1

    def __post_init__(self) -> None:
        object.__setattr__(self, "instruments", tuple(self.instruments))
        object.__setattr__(self, "controls", tuple(self.controls))
        object.__setattr__(self, "fixed_effects", tuple(self.fixed_effects))
        if len(self.instruments) < 1:
            raise ValueError("at least one instrument is required")
        if self.robust not in _ROBUST_KINDS:
            raise ValueError(f"robust must be one of {_ROBUST_KINDS}, got {self.robust!r}")
        names = [self.outcome, self.endogenous, *self.instruments, *self.controls, *self.fixed_effects]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"column roles must be distinct; repeated: {dupes}")

    @classmethod
    def from_dict(cls, payload: dict) -> "RegressionSpec":
        return cls(
            outcome=payload["outcome"],
            endogenous=payload["endogenous"],
            instruments=tuple(payload["instruments"]),
            controls=tuple(payload.get("controls", ())),
            fixed_effects=tuple(payload.get("fixed_effects", ())),
            robust=payload.get("robust", ROBUST_HC1),
        )


@dataclass
class Design:
    """Materialized design matrices for one regression."""

    y: np.ndarray            # outcome vector
    endog: np.ndarray        # endogenous treatment vector
    Z: np.ndarray            # instruments, n x L
    X: np.ndarray            # exogenous block: intercept, controls, FE dummies
    x_names: list[str]
    z_names: list[str]
    outcome_name: str
    endog_name: str
    n_obs: int
    n_dropped: int


@dataclass(frozen=True)
class OlsFit:
    names: tuple[str, ...]
    coef: np.ndarray
    se: np.ndarray
    tstats: np.ndarray
    residuals: np.ndarray
    nobs: int
    df_resid: int
    sigma2: float
    robust: str

    def coef_for(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    def t_for(self, name: str) -> float:
        return float(self.tstats[self.names.index(name)])


@dataclass
class TslsResult:
    """2SLS estimates plus instrument-strength diagnostics."""

    first_stage: list[tuple[str, float, float]]   # (instrument, coef, t)
    endog_name: str
    beta: float                                   # second-stage coefficient on the treatment
    beta_t: float
    controls: list[tuple[str, float, float]]      # exogenous block coefficients
    n_obs: int
    n_dropped: int
    anderson_lm_stat: float
    anderson_lm_p: float
    cragg_donald_f: float
    sigma2: float                                 # structural residual variance
    robust: str
    outcome_name: str = "y"

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome_name,
            "endogenous": self.endog_name,
            "first_stage": [
                {"instrument": name, "coef": coef, "t": t, "p": two_sided_p(t)}
                for name, coef, t in self.first_stage
            ],
            "second_stage": {
                "coef": self.beta,
                "t": self.beta_t,
                "p": two_sided_p(self.beta_t),
            },
            "controls": [{"name": n, "coef": c, "t": t} for n, c, t in self.controls],
            "n_obs": self.n_obs,
            "n_dropped": self.n_dropped,
            "anderson_lm": {"stat": self.anderson_lm_stat, "p": self.anderson_lm_p},
            "cragg_donald_f": self.cragg_donald_f,
            "residual_variance": self.sigma2,
            "robust": self.robust,
        }


def chi_square_sf(x: float, df: int) -> float:
    """Chi-square survival function via the regularized incomplete gamma."""
    if not math.isfinite(x):
        raise ValueError(f"x must be finite, got {x!r}")
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    if df < 1:
        raise ValueError(f"df must be a positive integer, got {df}")
    return float(special.gammaincc(df / 2.0, x / 2.0))


def two_sided_p(t: float) -> float:
    """Two-sided p-value for a t statistic under the normal approximation."""
    if not math.isfinite(t):
        return 0.0
    return chi_square_sf(t * t, 1)


def significance_stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def _qr_with_rank_check(M: np.ndarray, names: list[str], what: str) -> tuple[np.ndarray, np.ndarray]:
    if M.ndim != 2:
        raise ValueError(f"{what} must be 2-dimensional")
    n, k = M.shape
    if n <= k:
        raise ValueError(f"{what} needs more rows ({n}) than columns ({k})")
    Q, R = np.linalg.qr(M)
    diag = np.abs(np.diag(R))
    scale = diag.max()
    if scale == 0.0:
        raise SingularMatrixError(f"{what} is all zeros")
    tol = max(n, k) * np.finfo(float).eps * scale
    bad = np.nonzero(diag < tol)[0]
    if bad.size:
        j = int(bad[0])
        name = names[j] if j < len(names) else f"column {j}"
        raise SingularMatrixError(f"{what} is rank deficient: column {name!r} is collinear with earlier columns")
    return Q, R


def _solve_from_qr(Q: np.ndarray, R: np.ndarray, y: np.ndarray) -> np.ndarray:
    return sla.solve_triangular(R, Q.T @ y, lower=False)


def _inv_gram_from_r(R: np.ndarray) -> np.ndarray:
    # (M'M)^-1 = R^-1 R^-T, computed by triangular solves.
    r_inv = sla.solve_triangular(R, np.eye(R.shape[0]), lower=False)
    return r_inv @ r_inv.T


def _sandwich(
    regressors: np.ndarray, residuals: np.ndarray, inv_gram: np.ndarray, robust: str, sigma2: float, nobs: int
) -> np.ndarray:
    k = regressors.shape[1]
    if robust == ROBUST_HC1:
        scaled = regressors * residuals[:, None]
        meat = scaled.T @ scaled
        return inv_gram @ meat @ inv_gram * (nobs / (nobs - k))
    return sigma2 * inv_gram


def fit_ols(
    y: np.ndarray, X: np.ndarray, robust: str = ROBUST_NONE, names: list[str] | None = None
) -> OlsFit:
    """Least squares of y on X via QR, with classical or HC1 covariance."""
    if robust not in _ROBUST_KINDS:
        raise ValueError(f"robust must be one of {_ROBUST_KINDS}, got {robust!r}")
    y = np.asarray(y, dtype=float).ravel()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if names is None:
        names = [f"x{j}" for j in range(X.shape[1])]
    Q, R = _qr_with_rank_check(X, names, "design matrix")
    coef = _solve_from_qr(Q, R, y)
    residuals = y - X @ coef
    nobs, k = X.shape
    df_resid = nobs - k
    sigma2 = float(residuals @ residuals) / df_resid
    cov = _sandwich(X, residuals, _inv_gram_from_r(R), robust, sigma2, nobs)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        tstats = np.where(se > 0, coef / se, np.inf * np.sign(coef))
    return OlsFit(
        names=tuple(names), coef=coef, se=se, tstats=tstats,
        residuals=residuals, nobs=nobs, df_resid=df_resid, sigma2=sigma2, robust=robust,
    )


def _partial_out(Q_x: np.ndarray, M: np.ndarray) -> np.ndarray:
    return M - Q_x @ (Q_x.T @ M)


def _partial_r2(endog: np.ndarray, Z: np.ndarray, X: np.ndarray) -> tuple[float, int, int, int]:
    """Squared canonical correlation between X-residualized endog and Z.

    For one endogenous regressor this is the R-squared of regressing the
    residualized treatment on the residualized instruments.
    """
    endog = np.asarray(endog, dtype=float).ravel()
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[0] != endog.size:
        Z = Z.reshape(endog.size, -1)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = endog.size
    k_x = X.shape[1]
    n_inst = Z.shape[1]
    Q_x, _ = _qr_with_rank_check(X, [f"x{j}" for j in range(k_x)], "exogenous block")
    a_res = _partial_out(Q_x, endog[:, None]).ravel()
    z_res = _partial_out(Q_x, Z)
    denom = float(a_res @ a_res)
    if denom <= n * np.finfo(float).eps * max(1.0, float(endog @ endog)):
        raise DegenerateDataError("endogenous regressor has no variance after partialling out the exogenous block")
    z_norms = np.sqrt((z_res**2).sum(axis=0))
    if np.any(z_norms <= math.sqrt(n) * np.finfo(float).eps * max(1.0, float(np.abs(Z).max()))):
        raise DegenerateDataError("an instrument has no variance after partialling out the exogenous block")
    Q_z, _ = np.linalg.qr(z_res)
    fitted = Q_z @ (Q_z.T @ a_res)
    r2 = float(fitted @ fitted) / denom
    return min(max(r2, 0.0), 1.0), n, k_x, n_inst


def anderson_lm(endog: np.ndarray, Z: np.ndarray, X: np.ndarray) -> tuple[float, float]:
    """Underidentification LM test: n times the smallest squared canonical
    correlation between the residualized treatment and instruments, with a
    chi-square reference on L degrees of freedom (one endogenous regressor)."""
    r2, n, _k_x, n_inst = _partial_r2(endog, Z, X)
    stat = n * r2
    return stat, chi_square_sf(stat, n_inst)


def cragg_donald_f(endog: np.ndarray, Z: np.ndarray, X: np.ndarray) -> float:
    """Minimum-eigenvalue first-stage Wald F.

    With one endogenous regressor: (r2 / (1 - r2)) * (n - k_x - L) / L,
    which reduces to the homoskedastic first-stage F on the excluded
    instrument when L = 1. Values above ~10 conventionally indicate a
    strong instrument.
    """
    r2, n, k_x, n_inst = _partial_r2(endog, Z, X)
    if r2 >= 1.0:
        logger.warning("perfect first-stage fit (r2 = 1); Cragg-Donald F reported as infinity")
        return math.inf
    return (r2 / (1.0 - r2)) * (n - k_x - n_inst) / n_inst


def fit_2sls(
    y: np.ndarray,
    endog: np.ndarray,
    Z: np.ndarray,
    X: np.ndarray,
    robust: str = ROBUST_HC1,
    x_names: list[str] | None = None,
    z_names: list[str] | None = None,
    endog_name: str = "a",
    outcome_name: str = "y",
    n_dropped: int = 0,
) -> TslsResult:
    """Two-stage least squares of y on [endog, X] instrumented by [Z, X].

    The treatment is replaced by its projection onto the instrument block
    for estimation, while structural residuals are computed with the
    original treatment. Robust covariance sandwiches the fitted regressors
    with HC1 scaling. The first stage is an OLS of the treatment on the
    full instrument block.
    """
    if robust not in _ROBUST_KINDS:
        raise ValueError(f"robust must be one of {_ROBUST_KINDS}, got {robust!r}")
    y = np.asarray(y, dtype=float).ravel()
    endog = np.asarray(endog, dtype=float).ravel()
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[0] != y.size:
        Z = Z.reshape(y.size, -1)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = y.size
    if x_names is None:
        x_names = [f"x{j}" for j in range(X.shape[1])]
    if z_names is None:
        z_names = [f"z{j}" for j in range(Z.shape[1])]

    W = np.hstack([Z, X])
    w_names = [*z_names, *x_names]
    Q_w, _R_w = _qr_with_rank_check(W, w_names, "instrument block")

    D = np.hstack([endog[:, None], X])
    d_names = [endog_name, *x_names]
    D_hat = Q_w @ (Q_w.T @ D)
    Q_d, R_d = _qr_with_rank_check(D_hat, d_names, "projected regressors")
    coef = _solve_from_qr(Q_d, R_d, y)

    residuals = y - D @ coef  # structural residuals use the original treatment
    k = D.shape[1]
    df_resid = n - k
    sigma2 = float(residuals @ residuals) / df_resid
    cov = _sandwich(D_hat, residuals, _inv_gram_from_r(R_d), robust, sigma2, n)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        tstats = np.where(se > 0, coef / se, np.inf * np.sign(coef))

    first = fit_ols(endog, W, robust=robust, names=w_names)
    first_stage = [(name, first.coef_for(name), first.t_for(name)) for name in z_names]

    lm_stat, lm_p = anderson_lm(endog, Z, X)
    cd_f = cragg_donald_f(endog, Z, X)

    return TslsResult(
        first_stage=first_stage,
        endog_name=endog_name,
        beta=float(coef[0]),
        beta_t=float(tstats[0]),
        controls=[(x_names[j], float(coef[1 + j]), float(tstats[1 + j])) for j in range(len(x_names))],
        n_obs=n,
        n_dropped=n_dropped,
        anderson_lm_stat=lm_stat,
        anderson_lm_p=lm_p,
        cragg_donald_f=cd_f,
        sigma2=sigma2,
        robust=robust,
        outcome_name=outcome_name,
    )


def _numeric_column(panel: pd.DataFrame, name: str) -> pd.Series:
    if name not in panel.columns:
        raise ValueError(f"panel has no column {name!r}")
    return pd.to_numeric(panel[name], errors="coerce")


def build_design(panel: pd.DataFrame, spec: RegressionSpec) -> Design:
    """Materialize design matrices from a panel table.

    Rows with any missing or non-finite required value are dropped (and
    counted). The exogenous block is [intercept, controls..., dummies...],
    with the first sorted level of each fixed-effect factor dropped.
    """
    numeric_roles = [spec.outcome, spec.endogenous, *spec.instruments, *spec.controls]
    numeric = {name: _numeric_column(panel, name) for name in numeric_roles}
    keep = pd.Series(True, index=panel.index)
    for series in numeric.values():
        keep &= series.notna() & np.isfinite(series.fillna(np.nan))
    factors: dict[str, pd.Series] = {}
    for name in spec.fixed_effects:
        if name not in panel.columns:
            raise ValueError(f"panel has no column {name!r}")
        col = panel[name]
        missing = col.isna() | (col.astype(str).str.strip() == "")
        keep &= ~missing
        factors[name] = col

    n_dropped = int((~keep).sum())
    if not keep.any():
        raise ValueError("no usable rows remain after dropping missing/non-finite values")

    y = numeric[spec.outcome][keep].to_numpy(dtype=float)
    endog = numeric[spec.endogenous][keep].to_numpy(dtype=float)
    Z = np.column_stack([numeric[name][keep].to_numpy(dtype=float) for name in spec.instruments])

    n = y.size
    blocks: list[np.ndarray] = [np.ones((n, 1))]
    x_names: list[str] = ["intercept"]
    for name in spec.controls:
        blocks.append(numeric[name][keep].to_numpy(dtype=float)[:, None])
        x_names.append(name)
    for name in spec.fixed_effects:
        values = factors[name][keep]
        levels = sorted(values.unique(), key=lambda v: (str(type(v)), v))
        if len(levels) < 2:
            raise ValueError(f"fixed effect {name!r} has a single level after filtering")
        for level in levels[1:]:
            blocks.append((values == level).to_numpy(dtype=float)[:, None])
            x_names.append(f"{name}={level}")
    X = np.hstack(blocks)
    return Design(
        y=y, endog=endog, Z=Z, X=X,
        x_names=x_names, z_names=list(spec.instruments),
        outcome_name=spec.outcome, endog_name=spec.endogenous,
        n_obs=n, n_dropped=n_dropped,
    )


def tsls_from_panel(panel: pd.DataFrame, spec: RegressionSpec) -> TslsResult:
    """Convenience wrapper: build the design from a panel and fit 2SLS."""
    design = build_design(panel, spec)
    return fit_2sls(
        design.y, design.endog, design.Z, design.X,
        robust=spec.robust,
        x_names=design.x_names, z_names=design.z_names,
        endog_name=design.endog_name, outcome_name=design.outcome_name,
        n_dropped=design.n_dropped,
    )


def format_tsls_text(result: TslsResult) -> str:
    """Plain-text report with stage rows, diagnostics and star markers."""
    lines = []
    lines.append("2SLS regression")
    lines.append(f"outcome: {result.outcome_name}    treatment: {result.endog_name}    robust: {result.robust}")
    lines.append("-" * 72)
    lines.append(f"{'stage':<6}{'term':<32}{'coef':>14}{'t':>10}")
    for name, coef, t in result.first_stage:
        stars = significance_stars(two_sided_p(t))
        lines.append(f"{'1st':<6}{name + ' -> ' + result.endog_name:<32}{coef:>14.4f}{stars:<4}({t:.2f})")
    stars = significance_stars(two_sided_p(result.beta_t))
    lines.append(
        f"{'2nd':<6}{result.endog_name + ' -> ' + result.outcome_name:<32}{result.beta:>14.4f}{stars:<4}({result.beta_t:.2f})"
    )
    for name, coef, t in result.controls:
        lines.append(f"{'':<6}{name:<32}{coef:>14.4f}    ({t:.2f})")
    lines.append("-" * 72)
    lm_stars = significance_stars(result.anderson_lm_p)
    lines.append(f"Anderson canon. corr. LM: {result.anderson_lm_stat:.2f}{lm_stars}  (p = {result.anderson_lm_p:.4g})")
    cd = result.cragg_donald_f
    lines.append(f"Cragg-Donald Wald F:      {cd:.2f}" if math.isfinite(cd) else "Cragg-Donald Wald F:      inf")
    lines.append(f"observations:             {result.n_obs} (dropped {result.n_dropped})")
    lines.append(f"residual variance:        {result.sigma2:.6g}")
    lines.append("robust t-statistics in parentheses; *** p<0.01, ** p<0.05, * p<0.1")
    return "\n".join(lines) + "\n"
