"""Closed-form and quadrature evaluation of the explicit SLE functionals.

The passage law phi, the passing-below probability on the disk of diameter
[0, 1], the kernel H, and the third-grading expected-signature constant
A(kappa) are all available in two or three independent forms (exact
constants, one-dimensional quadrature, double quadrature) so that each
route can be checked against the others.

Throughout, lambda = 8/kappa - 2 and the normalizing constant is
c = Gamma(lambda/2 + 1) / (sqrt(pi) Gamma((lambda + 1)/2)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, special

from .loewner import KappaParams, small_disk_to_upper_half_plane
from .roughpath import TensorSeries

CATALAN = 0.915965594177219015054603514932

# closed forms of the A constant for integer lambda (kappa = 8/(lambda+2))
_A_CLOSED = {
    0: lambda: 1.0 / 48.0,
    1: lambda: (6.0 * CATALAN - 5.0) / 48.0,
    2: lambda: math.log(2.0) / 4.0 - 1.0 / 6.0,
    3: lambda: (54.0 * CATALAN - 49.0) / 96.0,
    4: lambda: (2.0 / 3.0) * math.log(2.0) - 11.0 / 24.0,
    5: lambda: (150.0 * CATALAN - 137.0) / 128.0,
    6: lambda: (6.0 / 5.0) * math.log(2.0) - 199.0 / 240.0,
}


class QuadratureError(RuntimeError):
    """A quadrature did not reach the requested accuracy.

    The best available estimate is attached as .estimate.
    """

    def __init__(self, message: str, estimate: float):
        self.estimate = estimate
        super().__init__(message)


@dataclass(frozen=True)
class QuadratureSpec:
    """Accuracy request passed through to the adaptive integrator."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    limit: int = 200

    def __post_init__(self):
        if self.abs_tol <= 0.0 or self.rel_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.limit < 10:
            raise ValueError("limit must be at least 10")


DEFAULT_QUAD = QuadratureSpec()


def _quad(f, lo, hi, quad: QuadratureSpec) -> float:
    val, err = integrate.quad(f, lo, hi, epsabs=quad.abs_tol,
                              epsrel=quad.rel_tol, limit=quad.limit)
    if err > 10.0 * (quad.abs_tol + quad.rel_tol * abs(val)) + 1e-15:
        raise QuadratureError(
            f"integrator error estimate {err:.2e} exceeds the requested "
            f"tolerance on [{lo}, {hi}]", val)
    return val


def phi(theta: float, params: KappaParams,
        quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Probability that the curve from 0 to infinity passes to the right of
    a point at angle theta, as a normalized incomplete sine-power integral.

    phi(0) = 0, phi(pi) = 1, and phi(pi/2) = 1/2 by symmetry.
    """
    if not 0.0 <= theta <= math.pi:
        raise ValueError(f"theta must lie in [0, pi], got {theta}")
    lam = params.lam
    c = params.c_kappa
    return c * _quad(lambda s: math.sin(s) ** lam, 0.0, theta, quad)


def _phi_betainc(theta, lam):
    """phi by the regularized incomplete beta function; fast and vectorized.

    Substituting x = (1 - cos s)/2 turns the sine-power integral into
    I_x((lam+1)/2, (lam+1)/2).
    """
    x = 0.5 * (1.0 - np.cos(theta))
    return special.betainc(0.5 * (lam + 1.0), 0.5 * (lam + 1.0), x)


def below_probability(z: complex, params: KappaParams,
                      quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Probability that the curve from 0 to 1 in the disk of diameter [0, 1]
    passes below the interior point z.

    The probability is phi of the angle of the half-plane image of z; it
    tends to 0 as z approaches the lower boundary arc and to 1 at the
    upper arc.
    """
    z = complex(z)
    if abs(z - 0.5) >= 0.5:
        raise ValueError(f"z must lie inside the disk of diameter [0, 1], got {z}")
    w = small_disk_to_upper_half_plane(z)
    theta = math.atan2(w.imag, w.real)
    return phi(theta, params, quad)


def _rho(t):
    """(sin t - t cos t) / sin^3 t, the weight in the single-integral form."""
    s = np.sin(t)
    return (s - t * np.cos(t)) / (s * s * s)


# Maclaurin series of rho; accurate to ~1e-22 for |t| <= 1e-3
_RHO_SERIES = (1.0 / 3.0, 2.0 / 15.0, 2.0 / 63.0, 4.0 / 675.0)


def _rho_small(t):
    t2 = t * t
    c0, c1, c2, c3 = _RHO_SERIES
    return c0 + t2 * (c1 + t2 * (c2 + t2 * c3))


def a_kappa_quadrature(params: KappaParams,
                       quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """The grading-3 expected-signature constant by its single-integral form

        A = (c / 4) * int_0^{pi/2} rho(t) cos(t)^lambda dt  -  1/24.

    The removable singularity of rho at 0 is handled by switching to its
    Maclaurin series on [0, 1e-3] (fixed Gauss-Legendre there, adaptive
    quadrature beyond).
    """
    lam = params.lam
    cut = 1e-3
    nodes, weights = np.polynomial.legendre.leggauss(8)
    t = 0.5 * cut * (nodes + 1.0)
    head = 0.5 * cut * float(np.sum(weights * _rho_small(t) * np.cos(t) ** lam))
    tail = _quad(lambda s: _rho(s) * math.cos(s) ** lam, cut, 0.5 * math.pi, quad)
    return 0.25 * params.c_kappa * (head + tail) - 1.0 / 24.0


def a_kappa_closed_form(params: KappaParams) -> Optional[float]:
    """Exact value of the constant when lambda is an integer 0..6, else None.

    The integer-lambda values alternate between log 2 and Catalan-constant
    expressions.
    """
    lam = params.lam
    nearest = round(lam)
    if abs(lam - nearest) > 1e-12 or not 0 <= nearest <= 6:
        return None
    return _A_CLOSED[int(nearest)]()


def a_kappa_double_integral(params: KappaParams,
                            quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """The same constant by its area form  A = 1/12 - int_D y p(z) dA(z),
    integrating the passing-below probability over the disk in polar
    coordinates about its center.

    Slower than the single-integral route by orders of magnitude; intended
    for cross-validation at coarser tolerances.
    """
    lam = params.lam

    def inner(psi):
        sin_psi = math.sin(psi)

        def rad(rho):
            z = complex(0.5 + rho * math.cos(psi), rho * sin_psi)
            w = small_disk_to_upper_half_plane(z)
            p = float(_phi_betainc(math.atan2(w.imag, w.real), lam))
            return rho * rho * sin_psi * p

        val, _ = integrate.quad(rad, 0.0, 0.5, epsabs=quad.abs_tol,
                                epsrel=quad.rel_tol, limit=quad.limit)
        return val

    moment, err = integrate.quad(inner, 0.0, 2.0 * math.pi,
                                 epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                                 limit=quad.limit)
    estimate = 1.0 / 12.0 - moment
    if err > 10.0 * (quad.abs_tol + quad.rel_tol * abs(moment)) + 1e-15:
        raise QuadratureError(
            f"outer integral error estimate {err:.2e} too large", estimate)
    return estimate


def h_closed_form(theta: float) -> float:
    """The radial kernel H in closed form on [0, pi/2)."""
    if not 0.0 <= theta < 0.5 * math.pi:
        raise ValueError(f"theta must lie in [0, pi/2), got {theta}")
    s = math.sin(theta)
    c = math.cos(theta)
    lead = (2.0 * s * s + 1.0) * (0.5 * math.pi - theta - s * c) / (8.0 * c ** 4)
    return lead - 0.25 * math.tan(theta)


def h_quadrature(theta: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """H as its defining integral cos(theta) int_0^inf r^2/(r^2+1+2r sin)^3 dr."""
    if not 0.0 <= theta < 0.5 * math.pi:
        raise ValueError(f"theta must lie in [0, pi/2), got {theta}")
    s = math.sin(theta)

    def f(r):
        d = r * r + 1.0 + 2.0 * r * s
        return r * r / (d * d * d)

    return math.cos(theta) * _quad(f, 0.0, np.inf, quad)


def h_antiderivative_check(t: float, quad: QuadratureSpec = DEFAULT_QUAD) -> tuple:
    """Both sides of the identity int_t^{pi/2} H(pi/2 - u) du = (1 - rho(t))/8.

    Returns (integral, closed_form); the two agree for every t in (0, pi/2].
    """
    if not 0.0 < t <= 0.5 * math.pi:
        raise ValueError(f"t must lie in (0, pi/2], got {t}")
    lhs = _quad(lambda u: h_closed_form(0.5 * math.pi - u), t, 0.5 * math.pi, quad)
    rhs = (1.0 - float(_rho(t))) / 8.0
    return lhs, rhs


@dataclass(frozen=True)
class ExpectedSignature3:
    """Expected truncated signature of the curve from 0 to 1 in the disk of
    diameter [0, 1]: the deterministic tensor exponential of the unit real
    displacement plus the grading-3 correction with coefficient a_kappa on
    words 122/221 and -2 a_kappa on 212.
    """

    kappa: float
    a_kappa: float
    series: TensorSeries

    def to_json(self) -> str:
        return self.series.to_json(a_kappa=self.a_kappa, kappa=self.kappa)


def expected_signature_level3(params: KappaParams,
                              quad: QuadratureSpec = DEFAULT_QUAD) -> ExpectedSignature3:
    """Assemble the full level-3 expected signature from the constant.

    Uses the closed form of a_kappa when one exists, quadrature otherwise.
    """
    a = a_kappa_closed_form(params)
    if a is None:
        a = a_kappa_quadrature(params, quad)
    series = TensorSeries(3, {
        "": 1.0,
        "1": 1.0,
        "11": 0.5,
        "111": 1.0 / 6.0,
        "122": a,
        "212": -2.0 * a,
        "221": a,
    })
    return ExpectedSignature3(kappa=params.kappa, a_kappa=a, series=series)


def write_akappa_table(dest, quad: QuadratureSpec = DEFAULT_QUAD) -> None:
    """Write the integer-lambda comparison table as CSV.

    Columns: kappa,lambda,closed_form,quadrature,abs_diff; one row per
    lambda in 0..6 (kappa = 8/(lambda + 2)).
    """
    own = isinstance(dest, str)
    fh = open(dest, "w") if own else dest
    try:
        fh.write("kappa,lambda,closed_form,quadrature,abs_diff\n")
        for lam in range(7):
            kappa = 8.0 / (lam + 2.0)
            params = KappaParams(kappa)
            closed = a_kappa_closed_form(params)
            est = a_kappa_quadrature(params, quad)
            fh.write(f"{repr(float(kappa))},{lam},{repr(float(closed))},"
                     f"{repr(float(est))},{repr(abs(closed - est))}\n")
    finally:
        if own:
            fh.close()
