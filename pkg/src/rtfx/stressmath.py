"""Numeric checks of the stress-generator design.

The stress family is

    H(y) = K (1 + g y) / ((1 - y)(1 + (1 + g) y + y^2)),   y = z^-D,

whose poles (in w = z^D) are 1 and a unit-magnitude conjugate pair.  Its
impulse response lives on the lattice n = kD and equals
A + B alpha^k + C conj(alpha)^k there.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .dsp import impulse_response
from .effects import ParameterError, StressParams, make_stress_generator

# DC residue printed alongside the real-time design; see ``dc_discrepancy``
PUBLISHED_DC_RESIDUE = 1.36
PUBLISHED_ALPHA = complex(-0.85, 0.527)
PUBLISHED_B_SCALE = 0.759


@dataclass(frozen=True)
class PartialFractions:
    K: float
    g: float
    A: float
    B: complex
    C: complex
    alpha: complex

    pole_real = 1.0

    @property
    def pole_pair(self) -> tuple[complex, complex]:
        return self.alpha, self.alpha.conjugate()

    @property
    def bound(self) -> float:
        """Upper bound A + 2|B| on |h| over the lattice."""
        return abs(self.A) + 2.0 * abs(self.B)


def root_of_unity_check(alpha: complex, n: int, tol: float = 1e-12) -> bool:
    if n < 1:
        raise ValueError("n must be >= 1")
    alpha = complex(alpha)
    return abs(alpha ** (n + 1) - alpha) <= tol and abs(alpha ** n - 1) <= tol


def stress_denominator(g: float, D: int = 1) -> tuple[tuple[int, float], ...]:
    """Sparse taps of (1 - y)(1 + (1+g) y + y^2), y = z^-D."""
    if not 0 < g < 1:
        raise ParameterError(f"g must lie in (0, 1), got {g}")
    # (1 - y)(1 + (1+g)y + y^2) = 1 + g y - g y^2 - y^3
    factor = np.polynomial.polynomial.polymul([1.0, -1.0], [1.0, 1.0 + g, 1.0])
    return tuple((k * D, float(c)) for k, c in enumerate(factor))


def stress_poles(g: float) -> tuple[complex, complex]:
    """Roots of w^2 + (1+g) w + 1, upper-half-plane root first."""
    disc = (1.0 + g) ** 2 - 4.0
    if not 0 < g < 1 or disc >= 0:
        raise ParameterError(
            f"g={g}: need 0 < g < 1 so that (1+g)^2 - 4 < 0; otherwise the "
            "quadratic factor has real (or repeated, at g=1: (w+1)^2) roots")
    re = -(1.0 + g) / 2.0
    im = math.sqrt(-disc) / 2.0
    return complex(re, im), complex(re, -im)


def numerator_reduction_check(g: float = math.sqrt(2.0) - 1.0, B: complex = 1.0,
                              C: complex | None = None) -> tuple[float, float]:
    """Collapse the three-residue numerator with A = -(alpha + alpha*) B.

    With C = B the z^-2 coefficient A + B alpha* + C alpha vanishes and the
    numerator becomes proportional to 1 + g z^-1.  Returns the z^-1 / z^0
    coefficient ratio and the magnitude of the z^-2 coefficient.
    """
    alpha, alpha_c = stress_poles(g)
    C = B if C is None else C
    s = alpha + alpha_c
    A = -s * B
    c0 = A + B + C
    c1 = -(A * s + (B + C) + (B * alpha_c + C * alpha))
    c2 = A + B * alpha_c + C * alpha
    return float((c1 / c0).real), abs(c2)


def partial_fractions(K: float, g: float) -> PartialFractions:
    """Residues of K(1+gy)/((1-y)(1-alpha y)(1-alpha* y)) at each pole."""
    alpha, alpha_c = stress_poles(g)
    A = K * (1.0 + g) / (3.0 + g)
    # residue at w = alpha: K(1 + g/alpha) / ((1 - 1/alpha)(1 - alpha*/alpha)), |alpha| = 1
    B = K * (alpha + g) / ((alpha - alpha_c) * (1.0 - alpha_c))
    return PartialFractions(K=K, g=g, A=A, B=B, C=B.conjugate(), alpha=alpha)


def closed_form_ir(pf: PartialFractions, k: int) -> float:
    """h at lattice index k (sample n = kD)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return pf.A + 2.0 * (pf.B * pf.alpha ** k).real


def closed_form_lattice(pf: PartialFractions, terms: int) -> np.ndarray:
    k = np.arange(terms)
    return pf.A + 2.0 * (pf.B * np.exp(1j * cmath.phase(pf.alpha) * k)).real


def verify_closed_form(K: float, g: float, D: int, terms: int) -> float:
    """Max |closed form - recursion| over the first ``terms`` lattice points.

    Also checks that the recursion is exactly zero off the lattice.
    """
    if terms < 1:
        raise ValueError("terms must be >= 1")
    pf = partial_fractions(K, g)
    h = impulse_response(make_stress_generator(StressParams(K, g, D)), terms * D)
    off = np.ones(h.size, dtype=bool)
    off[::D] = False
    if np.any(h[off] != 0.0):
        raise AssertionError("stress impulse response is nonzero off the D-lattice")
    lattice = h[::D]
    expected = np.array([closed_form_ir(pf, k) for k in range(terms)])
    return float(np.max(np.abs(expected - lattice)))


def published_B(alpha: complex = PUBLISHED_ALPHA) -> complex:
    """The printed real-time B, -j 0.759 (alpha + 0.7) / (1 - alpha*).

    0.759 is K / (2 Im alpha) for K=0.8, so this agrees with the exact
    residue up to the printed rounding.
    """
    return -1j * PUBLISHED_B_SCALE * (alpha + 0.7) / (1.0 - alpha.conjugate())


@dataclass(frozen=True)
class DCDiscrepancy:
    """DC residue A versus the undivided value K(1+g).

    For the real-time design (K=0.8, g=0.7) the undivided value is the
    published 1.36, which misses the (3+g) divisor.
    """

    undivided: float
    computed: float
    recursion_mean: float

    @property
    def ratio(self) -> float:
        return self.undivided / self.computed

    @property
    def matches_published(self) -> bool:
        return abs(self.undivided - PUBLISHED_DC_RESIDUE) < 5e-3

    def note(self) -> str:
        label = "published A = 1.36" if self.matches_published else f"K(1+g) = {self.undivided:.5g}"
        return (f"{label} is NOT the DC residue: K(1+g)/(3+g) = {self.computed:.5f}, "
                f"recursion DC level {self.recursion_mean:.5f}; the (3+g) divisor is "
                f"missing (ratio {self.ratio:.4f})")


def recursion_dc_level(K: float, g: float, steps: int = 10_000) -> float:
    """Mean of the D=1 recursion over the longest whole number of periods."""
    h = impulse_response(make_stress_generator(StressParams(K, g, 1)), steps)
    period = 2 * math.pi / abs(cmath.phase(stress_poles(g)[0]))
    n_periods = int(steps / period)
    # truncate to whole periods; the residual oscillation then averages to O(1/steps)
    stop = int(round(n_periods * period))
    return float(np.mean(h[:stop]))


def dc_discrepancy(K: float = 0.8, g: float = 0.7) -> DCDiscrepancy:
    return DCDiscrepancy(K * (1.0 + g), partial_fractions(K, g).A, recursion_dc_level(K, g))
