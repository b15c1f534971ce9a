"""Graph filters on the Laplacian: responses, application, low-pass coefficients, boosting."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import FilterError, NotLowPassError
from .graph import LaplacianEig

DEFAULT_ALPHA_SAFETY = 1.05


@dataclass(frozen=True)
class Polynomial:
    """``h(lam) = sum_t coeffs[t] * lam**t``."""

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.coeffs:
            raise FilterError("polynomial needs at least one coefficient")


@dataclass(frozen=True)
class Diffusion:
    """``(1 - alpha*lam)**(taps - 1)``; ``alpha=None`` means ``1/(1.05*lambda_max)``."""

    taps: int
    alpha: float | None = None

    def __post_init__(self):
        if self.taps < 1:
            raise FilterError("diffusion filter needs taps >= 1")
        if self.alpha is not None and self.alpha <= 0:
            raise FilterError("diffusion alpha must be positive")


@dataclass(frozen=True)
class SinglePoleIIR:
    """``1 / (1 + lam/c)``."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise FilterError("single-pole IIR needs c > 0")


@dataclass(frozen=True)
class IdealLowPass:
    """Unit response on the ``k`` lowest frequencies, zero elsewhere."""

    k: int


@dataclass(frozen=True)
class BoostedIIR:
    """``1/(1 + lam/c) - 1/(1 + lambda_max/c)``."""

    c: float
    lambda_max: float


@dataclass(frozen=True)
class Shifted:
    """Any filter with a constant removed from its response."""

    base: "FilterSpec"
    offset: float


FilterSpec = Union[Polynomial, Diffusion, SinglePoleIIR, IdealLowPass, BoostedIIR, Shifted]


def diffusion_alpha(f: Diffusion, lambda_max: float) -> float:
    if f.alpha is not None:
        return f.alpha
    return 1.0 / (DEFAULT_ALPHA_SAFETY * lambda_max) if lambda_max > 0 else 1.0


def _check_alpha(alpha, lambda_max):
    if not 0 < alpha or alpha * lambda_max >= 1.0:
        raise FilterError(
            f"diffusion alpha={alpha:g} outside (0, 1/lambda_max) with lambda_max={lambda_max:g}")


def generating_function(f: FilterSpec, lam, lambda_max: float) -> np.ndarray:
    """Evaluate ``h`` at arbitrary points; ``lambda_max`` fixes the default diffusion step."""
    lam = np.asarray(lam, dtype=float)
    if isinstance(f, Polynomial):
        return np.polynomial.polynomial.polyval(lam, f.coeffs) * np.ones_like(lam)
    if isinstance(f, Diffusion):
        alpha = diffusion_alpha(f, lambda_max)
        return (1.0 - alpha * lam) ** (f.taps - 1)
    if isinstance(f, SinglePoleIIR):
        return 1.0 / (1.0 + lam / f.c)
    if isinstance(f, BoostedIIR):
        return 1.0 / (1.0 + lam / f.c) - 1.0 / (1.0 + f.lambda_max / f.c)
    if isinstance(f, Shifted):
        return generating_function(f.base, lam, lambda_max) - f.offset
    if isinstance(f, IdealLowPass):
        raise FilterError("ideal low-pass has no generating function; use freq_response")
    raise FilterError(f"unsupported filter {f!r}")


def freq_response(f: FilterSpec, eig: LaplacianEig) -> np.ndarray:
    """``h(lambda_i)`` for every eigenvalue, in ascending eigenvalue order."""
    lam = eig.eigenvalues
    if isinstance(f, IdealLowPass):
        if not 0 <= f.k <= eig.n:
            raise FilterError(f"ideal low-pass k={f.k} out of range for n={eig.n}")
        h = np.zeros(eig.n)
        h[:f.k] = 1.0
        return h
    if isinstance(f, Shifted):
        return freq_response(f.base, eig) - f.offset
    if isinstance(f, Diffusion):
        _check_alpha(diffusion_alpha(f, eig.lambda_max), eig.lambda_max)
    return generating_function(f, lam, eig.lambda_max)


def apply_filter(f: FilterSpec, eig: LaplacianEig, x, *, path: str = "spectral",
                 lap: np.ndarray | None = None) -> np.ndarray:
    """``H(L) x`` for a vector or an N x M matrix.

    ``path="horner"`` evaluates a polynomial filter by repeated multiplication
    with ``lap`` (the Laplacian) instead of going through the eigenbasis.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != eig.n:
        raise ValueError(f"signal has {x.shape[0]} rows, graph has {eig.n} nodes")
    if path == "spectral":
        v = eig.eigenvectors
        h = freq_response(f, eig)
        if x.ndim == 1:
            return v @ (h * (v.T @ x))
        return v @ (h[:, None] * (v.T @ x))
    if path == "horner":
        if not isinstance(f, Polynomial):
            raise FilterError("horner path needs a Polynomial filter")
        if lap is None:
            raise ValueError("horner path needs the Laplacian")
        out = f.coeffs[-1] * x
        for c in reversed(f.coeffs[:-1]):
            out = lap @ out + c * x
        return out
    raise ValueError(f"unknown path {path!r}")


def filter_matrix(f: FilterSpec, eig: LaplacianEig) -> np.ndarray:
    v = eig.eigenvectors
    return (v * freq_response(f, eig)) @ v.T


def lowpass_coefficient(h, k: int) -> float:
    """Largest tail magnitude over smallest head magnitude of a frequency response."""
    h = np.abs(np.asarray(h, dtype=float))
    if not 1 <= k <= h.shape[0]:
        raise ValueError(f"k must satisfy 1 <= k <= {h.shape[0]}")
    den = h[:k].min()
    if den <= 0:
        raise NotLowPassError(f"not low-pass at K={k}: a head response is zero")
    if k == h.shape[0]:
        return 0.0
    return float(h[k:].max() / den)


def eta_closed_form(f: FilterSpec, eig: LaplacianEig, k: int) -> float:
    """Low-pass coefficient from the closed forms for diffusion, IIR and boosted IIR filters."""
    lam = eig.eigenvalues
    if not 1 <= k < eig.n:
        raise ValueError(f"k must satisfy 1 <= k < {eig.n}")
    lk, lk1, ln = lam[k - 1], lam[k], lam[-1]
    if isinstance(f, Diffusion):
        alpha = diffusion_alpha(f, eig.lambda_max)
        _check_alpha(alpha, eig.lambda_max)
        return float(((1 - alpha * lk1) / (1 - alpha * lk)) ** (f.taps - 1))
    if isinstance(f, SinglePoleIIR):
        return float((1 + lk / f.c) / (1 + lk1 / f.c))
    if isinstance(f, BoostedIIR):
        if ln == lk:
            raise NotLowPassError("boosted IIR is zero on the whole head")
        return float((ln - lk1) / (ln - lk) * (1 + lk / f.c) / (1 + lk1 / f.c))
    raise FilterError(f"no closed-form low-pass coefficient for {type(f).__name__}")


def observation1_bounds(h_k: float, gap: float, mu_h: float, l_h: float,
                        h_prime_at_kp1: float) -> tuple[float, float]:
    """(lower, upper) bounds on the low-pass coefficient from curvature on ``[lam_K, lam_K+1]``."""
    if not 0 <= mu_h <= l_h:
        raise ValueError("need 0 <= mu_h <= L_h")
    if h_k <= 0:
        raise ValueError("h_K must be positive")
    if gap < 0:
        raise ValueError("spectral gap must be nonnegative")
    upper = 1 - (mu_h * gap ** 2 / 2 - h_prime_at_kp1 * gap) / h_k
    lower = 1 - (l_h * gap ** 2 / 2 - h_prime_at_kp1 * gap) / h_k
    return float(lower), float(upper)


def iir_derivatives(c: float, lam):
    """First and second derivatives of ``1/(1 + lam/c)``."""
    lam = np.asarray(lam, dtype=float)
    u = 1.0 + lam / c
    return -1.0 / (c * u ** 2), 2.0 / (c * c * u ** 3)


def satisfies_assumption1(h, tol: float = 1e-12) -> bool:
    """Response nonnegative and nonincreasing over the sorted spectrum."""
    h = np.asarray(h, dtype=float)
    scale = max(1.0, float(np.abs(h).max()))
    return bool(np.all(h >= -tol * scale) and np.all(np.diff(h) <= tol * scale))


def boost_filter(f: FilterSpec, eig: LaplacianEig) -> FilterSpec:
    """Filter with response ``h - h(lambda_max)``, i.e. ``H(L) - h_N I``."""
    h = freq_response(f, eig)
    if not satisfies_assumption1(h):
        raise FilterError("cannot boost: response is not nonnegative and nonincreasing on the spectrum")
    if isinstance(f, SinglePoleIIR):
        return BoostedIIR(f.c, eig.lambda_max)
    if isinstance(f, IdealLowPass) and h[-1] == 0:
        return f
    if isinstance(f, Diffusion) and f.alpha is None:
        f = Diffusion(f.taps, diffusion_alpha(f, eig.lambda_max))
    return Shifted(f, float(h[-1]))


_NAMES = {
    "polynomial": Polynomial, "diffusion": Diffusion, "single_pole_iir": SinglePoleIIR,
    "ideal_low_pass": IdealLowPass, "boosted_iir": BoostedIIR, "shifted": Shifted,
}


def filter_to_dict(f: FilterSpec) -> dict:
    name = next(k for k, v in _NAMES.items() if isinstance(f, v))
    if isinstance(f, Polynomial):
        return {"variant": name, "coeffs": list(f.coeffs)}
    if isinstance(f, Diffusion):
        return {"variant": name, "taps": f.taps, "alpha": f.alpha}
    if isinstance(f, SinglePoleIIR):
        return {"variant": name, "c": f.c}
    if isinstance(f, IdealLowPass):
        return {"variant": name, "k": f.k}
    if isinstance(f, BoostedIIR):
        return {"variant": name, "c": f.c, "lambda_max": f.lambda_max}
    return {"variant": name, "base": filter_to_dict(f.base), "offset": f.offset}


def filter_from_dict(d: dict) -> FilterSpec:
    d = dict(d)
    try:
        cls = _NAMES[d.pop("variant")]
    except KeyError as exc:
        raise FilterError(f"unknown or missing filter variant: {exc}") from None
    if cls is Shifted:
        return Shifted(filter_from_dict(d["base"]), float(d["offset"]))
    try:
        return cls(**d)
    except TypeError as exc:
        raise FilterError(f"bad parameters for {cls.__name__}: {exc}") from None
