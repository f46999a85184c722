"""Power-law and exponential rate fits in log coordinates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from horolab.errors import InvalidArgument

POWER = "power"
EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class RateFit:
    """``|y| ~ c x^-kappa`` (power) or ``|y| ~ c e^{-kappa x}`` (exponential)."""

    model: str
    kappa: float
    prefactor: float
    residual: float
    band: tuple
    points: int
    flags: tuple = field(default_factory=tuple)

    @property
    def positive(self) -> bool:
        """``kappa > 0`` with the whole band above zero."""
        return self.band[0] > 0

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.model == POWER:
            return self.prefactor * x ** (-self.kappa)
        return self.prefactor * np.exp(-self.kappa * x)

    def as_dict(self) -> dict:
        return {"model": self.model, "kappa": self.kappa, "prefactor": self.prefactor,
                "residual": self.residual, "band": list(self.band), "points": self.points,
                "flags": list(self.flags)}


def fit_rate(model: str, x, y, se=None, level: float = 0.95) -> RateFit:
    """Weighted least squares of ``log|y|`` on ``log x`` or ``x``.

    Weights are ``(|y| / se)^2`` when standard errors are given (the delta
    method for ``log|y|``), uniform otherwise.  Non-positive estimates are
    fitted through their absolute values and flagged; exact zeros are dropped.
    The band is a Student-t interval from the weighted residual variance.
    """
    if model not in (POWER, EXPONENTIAL):
        raise InvalidArgument(f"unknown rate model {model!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    flags = []
    if np.any(y <= 0):
        flags.append("absolute-values")
    keep = (y != 0) & np.isfinite(y) & (x > 0)
    if se is not None:
        se = np.asarray(se, dtype=float)
        keep &= np.isfinite(se)
    if keep.sum() < 3:
        raise InvalidArgument("rate fits need at least 3 usable points with positive abscissae")
    if keep.sum() < len(x):
        flags.append("dropped-points")
    X = np.log(x[keep]) if model == POWER else x[keep]
    Y = np.log(np.abs(y[keep]))
    if se is None:
        w = np.ones_like(Y)
    else:
        rel = se[keep] / np.abs(y[keep])
        w = 1.0 / np.maximum(rel, 1e-12) ** 2
    A = np.column_stack([np.ones_like(X), X])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(A * sw[:, None], Y * sw, rcond=None)
    resid = Y - A @ coef
    dof = len(Y) - 2
    chi2 = float(np.sum(w * resid**2))
    if dof > 0:
        cov = np.linalg.inv((A * w[:, None]).T @ A) * (chi2 / dof)
        half = stats.t.ppf(0.5 + level / 2, dof) * np.sqrt(max(cov[1, 1], 0.0))
    else:
        half = np.inf
    kappa = -float(coef[1])
    rms = float(np.sqrt(np.mean(resid**2)))
    return RateFit(model, kappa, float(np.exp(coef[0])), rms, (kappa - half, kappa + half),
                   int(keep.sum()), tuple(flags))
