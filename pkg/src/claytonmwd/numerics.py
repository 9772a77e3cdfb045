"""Numerical kernels shared by the rest of the package.

Quadrature, root finding, finite differences, box-constrained minimization
and reproducible random streams. Everything here is pure given its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

__all__ = [
    "NumericalError",
    "QuadratureError",
    "QuadratureResult",
    "OptimResult",
    "RngStream",
    "integrate",
    "find_root",
    "numeric_gradient",
    "numeric_hessian",
    "minimize_bounded",
    "RNG_ALGORITHM",
]

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a trustworthy answer."""


class QuadratureError(NumericalError):
    def __init__(self, message: str, estimate: float, error_estimate: float):
        super().__init__(f"{message} (best estimate {estimate!r}, error {error_estimate:.3g})")
        self.estimate = estimate
        self.error_estimate = error_estimate


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int


@dataclass(frozen=True)
class OptimResult:
    argmin: np.ndarray
    objective_value: float
    converged: bool
    iterations: int
    message: str = ""


# 21-point Gauss-Kronrod rule (QUADPACK qk21). Nodes are listed from the
# right end towards the centre; odd positions carry the embedded 10-point
# Gauss rule.
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208977211306,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[:-1][::-1]])
_KWEIGHTS = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[:-1][::-1]])
_GWEIGHTS = np.zeros(21)
_GWEIGHTS[1:10:2] = _WG
_GWEIGHTS[11:20:2] = _WG[::-1]


def _gk21(f, a: np.ndarray, b: np.ndarray):
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = centre[:, None] + half[:, None] * _NODES[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    kronrod = half * (fx @ _KWEIGHTS)
    gauss = half * (fx @ _GWEIGHTS)
    return kronrod, np.abs(kronrod - gauss), fx.size


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-8,
    max_intervals: int = 4096,
    initial_intervals: int = 4,
) -> QuadratureResult:
    """Adaptive Gauss-Kronrod (G10/K21) quadrature of ``f`` over ``[lo, hi]``.

    ``f`` must accept a 1-D array of abscissae and return values of the
    same shape; every refinement round evaluates all pending subintervals
    in a single vectorized call. Subintervals whose error is within their
    width-proportional share of the tolerance are frozen, the others are
    bisected.

    Raises
    ------
    QuadratureError
        When ``max_intervals`` is exhausted before the tolerance is met or
        the integrand produces non-finite values.
    """
    if not lo < hi:
        raise ValueError(f"integrate requires lo < hi, got [{lo}, {hi}]")
    edges = np.linspace(lo, hi, initial_intervals + 1)
    a, b = edges[:-1], edges[1:]
    span = hi - lo
    done_value = 0.0
    done_error = 0.0
    evaluations = 0
    n_intervals = len(a)
    while True:
        est, err, nev = _gk21(f, a, b)
        evaluations += nev
        if not (np.all(np.isfinite(est)) and np.all(np.isfinite(err))):
            raise QuadratureError("non-finite integrand value", float(done_value + np.nansum(est)), np.inf)
        total = done_value + est.sum()
        tol = max(abs_tol, rel_tol * abs(total))
        if done_error + err.sum() <= tol:
            return QuadratureResult(float(total), float(done_error + err.sum()), evaluations)
        ok = err <= tol * (b - a) / span
        done_value += est[ok].sum()
        done_error += err[ok].sum()
        a, b = a[~ok], b[~ok]
        if n_intervals + len(a) > max_intervals:
            raise QuadratureError(
                "maximum subdivisions reached", float(total), float(done_error + err[~ok].sum())
            )
        mid = 0.5 * (a + b)
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
        n_intervals += len(a) // 2


def find_root(f: Callable[[float], float], bracket_lo: float, bracket_hi: float, tol: float = 1e-12) -> float:
    """Root of a continuous scalar function on a sign-changing bracket (Brent)."""
    flo, fhi = f(bracket_lo), f(bracket_hi)
    if flo == 0.0:
        return float(bracket_lo)
    if fhi == 0.0:
        return float(bracket_hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
        raise ValueError(f"invalid bracket [{bracket_lo}, {bracket_hi}]: f = ({flo}, {fhi})")
    return float(optimize.brentq(f, bracket_lo, bracket_hi, xtol=tol, rtol=4 * np.finfo(float).eps))


def _gradient_steps(x: np.ndarray) -> np.ndarray:
    return np.maximum(1e-5, 1e-4 * np.abs(x))


def _hessian_steps(x: np.ndarray) -> np.ndarray:
    # second differences lose ~eps/h^2; a larger step balances truncation error
    return np.maximum(1e-4, 1e-3 * np.abs(x))


def numeric_gradient(
    f: Callable[[np.ndarray], float],
    x: Sequence[float],
    lower: Optional[Sequence[float]] = None,
    steps: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Central-difference gradient with steps ``max(1e-5, 1e-4 |x_i|)``.

    Coordinates closer than one step to ``lower`` switch to a second-order
    forward difference so ``f`` is never evaluated below the bound. A
    non-finite perturbed value halves the step (up to 8 times) before
    giving up.
    """
    x = np.asarray(x, dtype=float)
    h0 = _gradient_steps(x) if steps is None else np.asarray(steps, dtype=float)
    lo = None if lower is None else np.asarray(lower, dtype=float)
    grad = np.empty_like(x)
    f0 = None
    for i in range(x.size):
        h = h0[i]
        for _ in range(9):
            e = np.zeros_like(x)
            e[i] = h
            if lo is not None and x[i] - h < lo[i]:
                if f0 is None:
                    f0 = f(x)
                f1, f2 = f(x + e), f(x + 2 * e)
                g = (-3 * f0 + 4 * f1 - f2) / (2 * h)
            else:
                g = (f(x + e) - f(x - e)) / (2 * h)
            if np.isfinite(g):
                break
            h *= 0.5
        else:
            raise NumericalError(f"non-finite objective near x[{i}] = {x[i]!r}")
        grad[i] = g
    return grad


def numeric_hessian(
    f: Callable[[np.ndarray], float],
    x: Sequence[float],
    steps: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Central second-difference Hessian, symmetrized as ``(H + H.T) / 2``."""
    x = np.asarray(x, dtype=float)
    k = x.size
    h = _hessian_steps(x) if steps is None else np.asarray(steps, dtype=float)
    for _ in range(9):
        f0 = f(x)
        H = np.empty((k, k))
        for i in range(k):
            ei = np.zeros(k)
            ei[i] = h[i]
            H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / h[i] ** 2
            for j in range(i):
                ej = np.zeros(k)
                ej[j] = h[j]
                H[i, j] = (
                    f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
                ) / (4 * h[i] * h[j])
                H[j, i] = H[i, j]
        if np.all(np.isfinite(H)):
            return 0.5 * (H + H.T)
        h = 0.5 * h
    raise NumericalError("non-finite objective in Hessian neighbourhood")


def minimize_bounded(
    f: Callable[[np.ndarray], float],
    x0: Sequence[float],
    lower: Sequence[float],
    upper: Sequence[float],
    jac=None,
    max_iter: int = 500,
    gtol: float = 1e-8,
) -> OptimResult:
    """Local box-constrained minimization (L-BFGS-B).

    Every trial point is projected onto the box before ``f`` (and ``jac``)
    see it, so neither is ever evaluated outside ``[lower, upper]``. A run
    counts as converged when the optimizer reports success, or when it
    stopped on a line-search failure with a negligible projected gradient.

    ``jac`` is either a gradient callable or ``True``, in which case ``f``
    returns ``(value, gradient)``.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if np.any(lower >= upper):
        raise ValueError("minimize_bounded requires lower < upper componentwise")
    if np.any(x0 < lower) or np.any(x0 > upper):
        raise ValueError(f"starting point {x0} outside the box")

    best = {"x": x0.copy(), "f": np.inf}
    zeros = np.zeros_like(x0)

    def record(xc, val):
        if np.isfinite(val) and val < best["f"]:
            best["x"], best["f"] = xc.copy(), float(val)

    if jac is True:
        def fun(x):
            xc = np.clip(x, lower, upper)
            val, g = f(xc)
            record(xc, val)
            if not np.isfinite(val):
                return np.inf, zeros
            return val, np.asarray(g, dtype=float)
        use_jac = True
        f0 = fun(x0)[0]
    elif jac is None:
        def fun(x):
            xc = np.clip(x, lower, upper)
            val = f(xc)
            record(xc, val)
            return val
        use_jac = None
        f0 = fun(x0)
    else:
        def fun(x):
            xc = np.clip(x, lower, upper)
            val = f(xc)
            record(xc, val)
            if not np.isfinite(val):
                return np.inf, zeros
            return val, np.asarray(jac(xc), dtype=float)
        use_jac = True
        f0 = f(x0)
        record(x0, f0)
    if not np.isfinite(f0):
        raise NumericalError(f"objective is not finite at the starting point {x0}")

    res = optimize.minimize(
        fun,
        x0,
        jac=use_jac,
        method="L-BFGS-B",
        bounds=list(zip(lower, upper)),
        options={"maxiter": max_iter, "gtol": gtol, "ftol": 1e3 * np.finfo(float).eps},
    )
    xbest = np.clip(res.x, lower, upper)
    fbest = float(res.fun)
    if not np.isfinite(fbest) or fbest > best["f"]:
        xbest, fbest = best["x"], best["f"]
    converged = bool(res.success)
    if not converged and res.status == 2 and hasattr(res, "jac"):
        g = np.asarray(res.jac, dtype=float)
        free = ~(((xbest <= lower) & (g > 0)) | ((xbest >= upper) & (g < 0)))
        pg = np.max(np.abs(g[free]), initial=0.0)
        converged = bool(np.isfinite(pg) and pg <= 1e-5 * max(1.0, abs(fbest)))
    return OptimResult(xbest, fbest, converged, int(res.nit), str(res.message))


@dataclass(frozen=True)
class RngStream:
    """A reproducible uniform stream addressed by ``(seed, stream_id)``.

    Streams nest: ``stream.substream(k)`` derives an independent child whose
    identity is the full path of ids, so replicate ``k`` of outer replication
    ``r`` is reproducible on its own.
    """

    seed: int
    stream_id: int = 0
    parent: tuple = ()
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream_id must be unsigned")
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        object.__setattr__(self, "_gen", np.random.Generator(np.random.PCG64(ss)))

    @property
    def key(self) -> tuple:
        return tuple(self.parent) + (self.stream_id,)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def substream(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id, self.key)

    def uniform(self, size=None) -> np.ndarray:
        """Uniforms on the open interval (0, 1) with 53-bit resolution."""
        k = self._gen.integers(0, 2**53, size=size, dtype=np.int64)
        return (k + 0.5) * 2.0**-53

    def describe(self) -> dict:
        return {"algorithm": RNG_ALGORITHM, "seed": self.seed, "stream": list(self.key)}
