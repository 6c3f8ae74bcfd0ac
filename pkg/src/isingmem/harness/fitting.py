"""Threshold-temperature fit and its finite-size extrapolation.

Both follow the scikit-learn estimator convention: constructor arguments
are hyperparameters, ``fit`` learns attributes with a trailing underscore,
``predict`` evaluates the fitted curve.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ConfigError, FitError

__all__ = [
    "FitResult",
    "ExtrapolationResult",
    "ThresholdFit",
    "FiniteSizeExtrapolation",
    "threshold_curve",
    "fit_threshold",
    "extrapolate_threshold",
]


def threshold_curve(T, a: float, T_th: float):
    """``1 + exp(-a (T - T_th))``: enhancement equals 2 at ``T_th``."""
    return 1.0 + np.exp(-a * (np.asarray(T, dtype=float) - T_th))


def _log_curve(T, a, T_th):
    return np.logaddexp(0.0, -a * (T - T_th))


@dataclass(frozen=True)
class FitResult:
    a: float
    a_err: float
    T_th: float
    T_th_err: float
    residual: float
    n_points: int
    T_th_ci: tuple[float, float] = (math.nan, math.nan)

    def to_json(self) -> str:
        d = {k: getattr(self, k) for k in ("a", "a_err", "T_th", "T_th_err", "residual", "n_points")}
        return json.dumps(d, indent=2)


@dataclass(frozen=True)
class ExtrapolationResult:
    intercept: float
    intercept_err: float
    slope: float
    slope_err: float
    n_points: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _initial_guess(T: np.ndarray, logy: np.ndarray) -> tuple[float, float]:
    span = float(T[-1] - T[0])
    slopes = np.diff(logy) / np.diff(T)
    k = int(np.argmin(slopes))
    return 2.0 / span, float(0.5 * (T[k] + T[k + 1]))


def _solve(T, logy, w, x0, xtol, max_nfev):
    lo, hi = float(T[0]), float(T[-1])
    trace = []

    def resid(p):
        r = w * (logy - _log_curve(T, p[0], p[1]))
        trace.append(float(r @ r))
        return r

    x0 = np.array([x0[0], min(max(x0[1], lo), hi)])
    sol = least_squares(resid, x0, bounds=([1e-12, lo], [np.inf, hi]),
                        xtol=xtol, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    return sol, trace


class ThresholdFit(RegressorMixin, BaseEstimator):
    """Least-squares fit of ``1 + exp(-a (T - T_th))`` to enhancement data.

    Residuals are taken on the log of the enhancement, which spans orders
    of magnitude across a sweep.  ``T_th`` is bounded to the temperature
    range of the data.  Parameter uncertainties come from refitting
    ``n_bootstrap`` resamples of the points drawn with replacement.
    """

    def __init__(self, n_bootstrap: int = 200, xtol: float = 1e-9, max_nfev: int = 500,
                 random_state: int = 0):
        self.n_bootstrap = n_bootstrap
        self.xtol = xtol
        self.max_nfev = max_nfev
        self.random_state = random_state

    def fit(self, T, enhancement, sigma=None):
        T = np.asarray(T, dtype=float).ravel()
        y = np.asarray(enhancement, dtype=float).ravel()
        if T.shape != y.shape:
            raise ConfigError("temperatures and enhancements differ in length")
        if T.size < 4:
            raise ConfigError(f"threshold fit needs at least 4 points, got {T.size}")
        if np.any(~np.isfinite(y)) or np.any(y <= 0):
            raise ConfigError("enhancements must be positive and finite")
        # sorting makes the result independent of input order
        order = np.lexsort((y, T))
        T, y = T[order], y[order]
        if sigma is None:
            w = np.ones_like(T)
        else:
            s = np.asarray(sigma, dtype=float).ravel()[order]
            if np.any(~(s > 0)):
                raise ConfigError("sigma must be positive")
            w = y / s  # d(log y) = dy / y
        if np.unique(T).size < 3:
            raise ConfigError("threshold fit needs at least 3 distinct temperatures")
        logy = np.log(y)
        x0 = _initial_guess(*self._dedupe(T, logy))
        sol, trace = _solve(T, logy, w, x0, self.xtol, self.max_nfev)
        if sol.status <= 0:
            raise FitError(f"threshold fit did not converge: {sol.message}", trace=trace)
        self.a_, self.T_th_ = float(sol.x[0]), float(sol.x[1])
        self.residual_ = float(math.sqrt(2.0 * sol.cost))
        self.n_points_ = int(T.size)
        self.trace_ = trace
        self._bootstrap(T, logy, w, sol.x)
        return self

    @staticmethod
    def _dedupe(T, logy):
        uT = np.unique(T)
        return uT, np.array([logy[T == t].mean() for t in uT])

    def _bootstrap(self, T, logy, w, x_hat):
        rng = np.random.default_rng(self.random_state)
        draws = []
        for _ in range(self.n_bootstrap):
            idx = np.sort(rng.integers(0, T.size, T.size))
            if np.unique(T[idx]).size < 3:
                continue
            sol, _ = _solve(T[idx], logy[idx], w[idx], x_hat, self.xtol, self.max_nfev)
            if sol.status > 0:
                draws.append(sol.x)
        draws = np.array(draws).reshape(-1, 2)
        self.bootstrap_params_ = draws
        if draws.shape[0] >= 2:
            self.a_err_ = float(draws[:, 0].std(ddof=1))
            self.T_th_err_ = float(draws[:, 1].std(ddof=1))
            q = np.quantile(draws[:, 1], [0.025, 0.975])
            self.T_th_ci_ = (float(q[0]), float(q[1]))
        else:
            self.a_err_ = self.T_th_err_ = math.nan
            self.T_th_ci_ = (math.nan, math.nan)

    def predict(self, T):
        check_is_fitted(self, "T_th_")
        return threshold_curve(T, self.a_, self.T_th_)

    def score(self, T, enhancement, sample_weight=None):
        """R^2 of the fit on log enhancement."""
        check_is_fitted(self, "T_th_")
        ly = np.log(np.asarray(enhancement, dtype=float))
        pred = _log_curve(np.asarray(T, dtype=float), self.a_, self.T_th_)
        ss_res = np.sum((ly - pred) ** 2)
        ss_tot = np.sum((ly - ly.mean()) ** 2)
        return float(1.0 - ss_res / ss_tot)

    def result(self) -> FitResult:
        check_is_fitted(self, "T_th_")
        return FitResult(self.a_, self.a_err_, self.T_th_, self.T_th_err_, self.residual_,
                         self.n_points_, self.T_th_ci_)


class FiniteSizeExtrapolation(RegressorMixin, BaseEstimator):
    """Weighted straight-line fit of ``T_th`` against ``1/L``.

    With ``sigma`` the weights are ``1/sigma**2`` and parameter errors come
    from the weighted normal equations.  Without it, the errors are scaled
    by the residual variance; an exact line then reports zero error.
    """

    def __init__(self, min_sizes: int = 3):
        self.min_sizes = min_sizes

    def fit(self, L, T_th, sigma=None):
        L = np.asarray(L, dtype=float).ravel()
        y = np.asarray(T_th, dtype=float).ravel()
        if L.shape != y.shape:
            raise ConfigError("sizes and thresholds differ in length")
        if np.any(L <= 0):
            raise ConfigError("system sizes must be positive")
        if np.unique(L).size < self.min_sizes:
            raise ConfigError(f"extrapolation needs at least {self.min_sizes} distinct sizes")
        x = 1.0 / L
        X = np.column_stack([np.ones_like(x), x])
        w = np.ones_like(x) if sigma is None else 1.0 / np.asarray(sigma, dtype=float).ravel() ** 2
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ConfigError("sigma must be positive and finite")
        A = X.T @ (w[:, None] * X)
        if np.linalg.cond(A) > 1e14:
            raise ConfigError("degenerate abscissae: 1/L values are not distinct enough")
        cov = np.linalg.inv(A)
        beta = cov @ (X.T @ (w * y))
        if sigma is None:
            r = y - X @ beta
            dof = max(x.size - 2, 1)
            cov = cov * float(r @ r) / dof
        self.intercept_, self.slope_ = float(beta[0]), float(beta[1])
        self.intercept_err_ = float(math.sqrt(cov[0, 0]))
        self.slope_err_ = float(math.sqrt(cov[1, 1]))
        self.n_points_ = int(x.size)
        return self

    def predict(self, L):
        check_is_fitted(self, "intercept_")
        return self.intercept_ + self.slope_ / np.asarray(L, dtype=float)

    def result(self) -> ExtrapolationResult:
        check_is_fitted(self, "intercept_")
        return ExtrapolationResult(self.intercept_, self.intercept_err_, self.slope_,
                                   self.slope_err_, self.n_points_)


def fit_threshold(T, enhancement, sigma=None, **params) -> FitResult:
    return ThresholdFit(**params).fit(T, enhancement, sigma).result()


def extrapolate_threshold(L, T_th, sigma=None) -> ExtrapolationResult:
    return FiniteSizeExtrapolation().fit(L, T_th, sigma).result()
