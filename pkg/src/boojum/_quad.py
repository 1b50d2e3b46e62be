"""Tensor-product Gauss-Legendre quadrature helpers and the standard bump."""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline


def gauss_nodes(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def integrate_rect(f, ra: float, rb: float, ca: float, cb: float, n1: int, n2: int) -> float:
    """Tensor-product rule for a vectorized integrand f(X, Y) on a rectangle.

    X and Y are meshgrid arrays of shape (n1, n2) (first coordinate varies
    along axis 0).
    """
    x1, w1 = gauss_nodes(ra, rb, n1)
    x2, w2 = gauss_nodes(ca, cb, n2)
    X, Y = np.meshgrid(x1, x2, indexing="ij")
    vals = f(X, Y)
    return float(np.einsum("i,j,ij->", w1, w2, vals))


def integrate_rect_adaptive(
    f,
    rect: tuple[float, float, float, float],
    n0: tuple[int, int] = (128, 128),
    rtol: float = 0.01,
    max_doublings: int = 3,
    abs_floor: float = 1e-12,
) -> tuple[float, dict]:
    """Refine the tensor-product rule by doubling until the change is small."""
    ra, rb, ca, cb = rect
    n1, n2 = n0
    prev = integrate_rect(f, ra, rb, ca, cb, n1, n2)
    change = np.inf
    for _ in range(max_doublings):
        n1, n2 = 2 * n1, 2 * n2
        cur = integrate_rect(f, ra, rb, ca, cb, n1, n2)
        change = abs(cur - prev)
        if change <= rtol * max(abs(cur), abs_floor):
            return cur, {"n": (n1, n2), "last_change": change, "converged": True}
        prev = cur
    return prev, {"n": (n1, n2), "last_change": float(change), "converged": False}


class Mollifier:
    """The standard bump exp(-1/(1 - x^2)) on [-1, 1], rescaled to width eps
    and normalized to unit mass."""

    _Z: float | None = None
    _cdf_spline: CubicSpline | None = None

    def __init__(self, eps: float):
        if eps <= 0:
            raise ValueError("mollifier width must be positive")
        self.eps = float(eps)
        cls = type(self)
        if cls._Z is None:
            cls._Z = quad(lambda x: np.exp(-1.0 / (1.0 - x * x)), -1.0, 1.0, epsabs=1e-15)[0]
            knots = np.linspace(-1.0, 1.0, 4097)
            seg = np.zeros(len(knots) - 1)
            gx, gw = np.polynomial.legendre.leggauss(12)
            for i in range(len(knots) - 1):
                a, b = knots[i], knots[i + 1]
                xs = a + 0.5 * (b - a) * (gx + 1.0)
                seg[i] = 0.5 * (b - a) * np.sum(gw * np.exp(-1.0 / np.maximum(1e-300, 1.0 - xs * xs)))
            cum = np.concatenate([[0.0], np.cumsum(seg)])
            cum /= cum[-1]  # exact unit mass at the right endpoint
            cls._cdf_spline = CubicSpline(knots, cum)

    def pdf(self, x: np.ndarray) -> np.ndarray:
        y = np.asarray(x, dtype=float) / self.eps
        out = np.zeros_like(y)
        inside = np.abs(y) < 1.0
        yi = y[inside]
        out[inside] = np.exp(-1.0 / (1.0 - yi * yi)) / (type(self)._Z * self.eps)
        return out

    def cdf(self, x: np.ndarray) -> np.ndarray:
        y = np.clip(np.asarray(x, dtype=float) / self.eps, -1.0, 1.0)
        return np.clip(type(self)._cdf_spline(y), 0.0, 1.0)

    def mass(self, epsabs: float = 1e-14) -> float:
        val = quad(lambda x: self.pdf(x), -self.eps, self.eps, epsabs=epsabs, limit=200)[0]
        return float(val)
