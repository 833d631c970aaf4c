"""Per-sample objectives with analytic first and second derivatives.

Both functions are vectorised over samples and return ``(loss, grad, hess)``
with derivatives taken with respect to the raw model output.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit, log_ndtr

HESS_FLOOR = 1e-16
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def aft_normal(pred, log_t, event, sigma: float):
    """AFT negative log-likelihood with normal errors on log time.

    ``z = (log_t - pred) / sigma``.  Observed events contribute the log
    density of ``t`` (``z^2/2 + log(sigma t) + log(2 pi)/2``); right-censored
    samples contribute ``-log S(z) = -log Phi(-z)``.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    pred = np.asarray(pred, dtype=np.float64)
    log_t = np.asarray(log_t, dtype=np.float64)
    event = np.asarray(event, dtype=bool)
    z = (log_t - pred) / sigma

    loss = np.empty_like(z)
    grad = np.empty_like(z)
    hess = np.empty_like(z)

    ze = z[event]
    loss[event] = 0.5 * ze * ze + np.log(sigma) + log_t[event] + _HALF_LOG_2PI
    grad[event] = -ze / sigma
    hess[event] = 1.0 / (sigma * sigma)

    zc = z[~event]
    log_surv = log_ndtr(-zc)
    # hazard of the standard normal, phi(z) / Phi(-z), kept in log space
    lam = np.exp(-0.5 * zc * zc - _HALF_LOG_2PI - log_surv)
    loss[~event] = -log_surv
    grad[~event] = -lam / sigma
    hess[~event] = lam * (lam - zc) / (sigma * sigma)

    np.maximum(hess, HESS_FLOOR, out=hess)
    return loss, grad, hess


def aft_loss(pred_log_t: float, duration: float, event: bool, sigma: float = 1.0):
    """Scalar convenience wrapper: ``(loss, gradient, hessian)`` for one sample."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    loss, grad, hess = aft_normal([pred_log_t], [np.log(duration)], [event], sigma)
    return float(loss[0]), float(grad[0]), float(hess[0])


def logistic(pred, y):
    """Binary log-loss on log-odds ``pred``: gradient ``p - y``, hessian ``p(1-p)``."""
    pred = np.asarray(pred, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    p = expit(pred)
    # log(1 + e^x) - y x, stable for large |x|
    loss = np.logaddexp(0.0, pred) - y * pred
    grad = p - y
    hess = np.maximum(p * (1.0 - p), HESS_FLOOR)
    return loss, grad, hess
