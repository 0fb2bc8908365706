# src/kawahara_lab/bilinear.py
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import InvalidInput, InvalidParameters
from .norms import (
    NormParams,
    RatioReport,
    SpaceTimeSample,
    SpaceTimeSpectrum,
    estimate_ratio,
    xsb_norm,
)
from .spectral import DispersionParams, SpaceTimeLattice, bracket, phi, phi_prime

logger = logging.getLogger(__name__)

NOISY_FIT_RESIDUAL = 0.2


# -------------------------
# Frequency regions
# -------------------------
class RegionLabel(Enum):
    """Cover of {|xi1| >= |xi2|} used by the bilinear case analysis; first match wins."""
    OMEGA1 = 1
    OMEGA2 = 2
    OMEGA3 = 3
    OMEGA4 = 4
    OMEGA5 = 5
    OMEGA6 = 6

    def __str__(self) -> str:
        return f"Ω{self.value}"


def region_classify_many(xi1: Any, xi2: Any, a: float) -> np.ndarray:
    """Vectorized classification; returns region numbers 1..6."""
    shape = np.shape(xi1)
    x1 = np.atleast_1d(np.asarray(xi1, dtype=float))
    x2 = np.atleast_1d(np.asarray(xi2, dtype=float))
    a1, a2 = np.abs(x1), np.abs(x2)
    if np.any(a1 < a2):
        raise InvalidInput("region classification needs |xi1| >= |xi2|; swap the pair")
    high = a1 > 4.0 * a
    separated = a1 > 4.0 * a2
    same_sign = x1 * x2 >= 0.0
    small_out = 4.0 * np.abs(x1 + x2) < a2
    conditions = [
        ~high,
        separated & (a2 <= a),
        separated,
        same_sign,
        ~small_out,
    ]
    labels = np.select(conditions, [1, 2, 3, 4, 5], default=6)
    return labels.astype(np.int64).reshape(shape)


def region_classify(xi1: float, xi2: float, a: float) -> RegionLabel:
    return RegionLabel(int(region_classify_many(float(xi1), float(xi2), a).item()))


# -------------------------
# Kernels
# -------------------------
KERNELS = ("K1", "K2")


def kernel_K(
    which: str,
    xi1: Any,
    tau1: Any,
    xi: Any,
    tau: Any,
    norm_params: NormParams,
    params: DispersionParams,
) -> Any:
    """
    |xi| <xi>^p <sigma>^b' / (<sigma1>^b <sigma2>^b <xi1>^q <xi2>^q)

    K1 uses p = q = s; K2 uses p = s1, q = s2.
    """
    if which == "K1":
        p, q = norm_params.s, norm_params.s
    elif which == "K2":
        p, q = norm_params.s1, float(norm_params.s2)
    else:
        raise InvalidInput(f"Unknown kernel: {which}. Known: {list(KERNELS)}")
    x1 = np.asarray(xi1, dtype=float)
    t1 = np.asarray(tau1, dtype=float)
    x = np.asarray(xi, dtype=float)
    t = np.asarray(tau, dtype=float)
    x2, t2 = x - x1, t - t1
    b = float(norm_params.b)
    sigma = t + phi(x, params)
    sigma1 = t1 + phi(x1, params)
    sigma2 = t2 + phi(x2, params)
    num = np.abs(x) * bracket(x) ** p * bracket(sigma) ** norm_params.b_prime
    den = (bracket(sigma1) * bracket(sigma2)) ** b * (bracket(x1) * bracket(x2)) ** q
    out = num / den
    return float(out) if np.ndim(out) == 0 else out


# -------------------------
# Bilinear estimates on a lattice
# -------------------------
def bilinear_lhs(
    u: SpaceTimeSpectrum,
    v: SpaceTimeSpectrum,
    s_out: float,
    b_out: float,
    params: DispersionParams,
) -> float:
    """||d_x(uv)||_{X_{s_out, b_out}}; product in physical space-time, weights in spectral space."""
    if u.lattice != v.lattice:
        raise InvalidInput("bilinear operands live on different lattices")
    return xsb_norm(u.multiply(v).derivative(), s_out, b_out, params)


ESTIMATES = ("same-regularity", "smoothing")
MIN_SAME_REGULARITY_OFFSET = -7.0 / 4.0


def estimate_indices(estimate: str, norm_params: NormParams) -> Tuple[float, float]:
    """(output index, input index) of an estimate after checking its hypotheses."""
    eps = norm_params.epsilon
    if estimate == "same-regularity":
        floor = MIN_SAME_REGULARITY_OFFSET + 4.0 * eps
        if norm_params.s < floor - 1e-12:
            raise InvalidParameters(f"s must be >= -7/4 + 4 epsilon = {floor:.6g}, got {norm_params.s:.6g}")
        return norm_params.s, norm_params.s
    if estimate == "smoothing":
        floor = -0.5 + eps
        if float(norm_params.s2) < floor - 1e-12:
            raise InvalidParameters(f"s2 must be >= -1/2 + epsilon = {floor:.6g}, got {norm_params.s2:.6g}")
        return norm_params.s1, float(norm_params.s2)
    raise InvalidParameters(f"Unknown estimate: {estimate}. Known: {list(ESTIMATES)}")


def verify_estimate(
    estimate: str,
    family: Sequence[Any],
    norm_params: NormParams,
    *,
    params: DispersionParams,
    lattice: SpaceTimeLattice,
    fine: Optional[SpaceTimeLattice] = None,
    threads: int = 1,
) -> RatioReport:
    """
    ||d_x(u1 u2)||_{X_{p, b'}} / (||u1||_{X_{q,b}} ||u2||_{X_{q,b}}) over a family
    of sample pairs, at two resolutions.
    """
    s_out, s_in = estimate_indices(estimate, norm_params)
    b = float(norm_params.b)

    def lhs(pair: Tuple[SpaceTimeSample, SpaceTimeSample]) -> float:
        return bilinear_lhs(pair[0].spectrum, pair[1].spectrum, s_out, norm_params.b_prime, params)

    def rhs(pair: Tuple[SpaceTimeSample, SpaceTimeSample]) -> float:
        return xsb_norm(pair[0].spectrum, s_in, b, params) * xsb_norm(pair[1].spectrum, s_in, b, params)

    return estimate_ratio(family, lhs, rhs, lattice=lattice, fine=fine, threads=threads, label=estimate)


# -------------------------
# Counterexample geometry
# -------------------------
@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle in sheared coordinates (xi, psi), psi = tau + phi'(N) xi."""
    xi_center: float
    xi_half: float
    psi_center: float
    psi_half: float

    @property
    def area(self) -> float:
        return 4.0 * self.xi_half * self.psi_half

    def contains(self, other: "Rectangle") -> bool:
        return (
            other.xi_center - other.xi_half >= self.xi_center - self.xi_half
            and other.xi_center + other.xi_half <= self.xi_center + self.xi_half
            and other.psi_center - other.psi_half >= self.psi_center - self.psi_half
            and other.psi_center + other.psi_half <= self.psi_center + self.psi_half
        )

    def xi_projection_contains(self, other: "Rectangle") -> bool:
        return (
            other.xi_center - other.xi_half >= self.xi_center - self.xi_half
            and other.xi_center + other.xi_half <= self.xi_center + self.xi_half
        )


def sumset(first: Rectangle, second: Rectangle) -> Rectangle:
    return Rectangle(
        first.xi_center + second.xi_center,
        first.xi_half + second.xi_half,
        first.psi_center + second.psi_center,
        first.psi_half + second.psi_half,
    )


def _cell_centres(half: float, density: int) -> np.ndarray:
    step = half / density
    return -half + (np.arange(2 * density) + 0.5) * step


@dataclass(frozen=True, eq=False)
class CounterexamplePair:
    """
    Indicators f = chi_A, g = chi_B of two thin strips tangent to sigma = 0,
    sampled on cell-centred local lattices with `density` cells per half-width.

      - A: |xi - N| <= h, |psi - c_A| <= 1/2, c_A = phi'(N) N - phi(N)
      - B: |xi - 2h| <= h, |psi| <= 1/2
      - R: |xi - N - 2h| <= h/4, |psi - c_A| <= 1/2
    with h = N^(-3/2). Offsets (xi - N, psi - c_A) are stored instead of
    absolute coordinates on A and on the sumset.
    """
    N: float
    params: DispersionParams
    density: int
    A: Rectangle
    B: Rectangle
    R: Rectangle

    @property
    def h(self) -> float:
        return self.N ** -1.5

    @property
    def shear(self) -> float:
        return float(phi_prime(self.N, self.params))

    @property
    def d_xi(self) -> float:
        return self.h / self.density

    @property
    def d_psi(self) -> float:
        return 0.5 / self.density

    # ---- lattices ----
    def a_lattice(self) -> Tuple[np.ndarray, np.ndarray]:
        """(xi - N, psi - c_A) of the A cells."""
        return _cell_centres(self.h, self.density), _cell_centres(0.5, self.density)

    def b_lattice(self) -> Tuple[np.ndarray, np.ndarray]:
        return 2.0 * self.h + _cell_centres(self.h, self.density), _cell_centres(0.5, self.density)

    def sum_lattice(self) -> Tuple[np.ndarray, np.ndarray]:
        """(xi - N, psi - c_A) of the cells of the discrete sumset."""
        n = 4 * self.density - 1
        idx = np.arange(n) + 1.0
        return idx * self.d_xi, -1.0 + idx * self.d_psi

    def f(self) -> np.ndarray:
        return np.ones((2 * self.density, 2 * self.density))

    def g(self) -> np.ndarray:
        return np.ones((2 * self.density, 2 * self.density))

    # ---- modulations ----
    def _taylor_remainder(self, e: np.ndarray) -> np.ndarray:
        """phi(N + e) - phi(N) - phi'(N) e, expanded to avoid cancellation."""
        N = self.N
        al, be = self.params.alpha, self.params.beta
        return al * (10.0 * N**3 * e**2 + 10.0 * N**2 * e**3 + 5.0 * N * e**4 + e**5) - be * (
            3.0 * N * e**2 + e**3
        )

    def sigma_near(self, e: np.ndarray, p: np.ndarray) -> np.ndarray:
        """sigma at offsets (e, p) = (xi - N, psi - c_A); broadcasts to (len(e), len(p))."""
        return p[None, :] + self._taylor_remainder(e)[:, None]

    def sigma_b(self) -> np.ndarray:
        xi, psi = self.b_lattice()
        return psi[None, :] - self.shear * xi[:, None] + np.asarray(phi(xi, self.params))[:, None]

    # ---- convolution ----
    def convolution(self) -> np.ndarray:
        """Discrete f*g on the sum lattice: sum f[i,j] g[m-i,n-j] dxi dpsi via 2-D FFT."""
        f, g = self.f(), self.g()
        shape = (f.shape[0] + g.shape[0] - 1, f.shape[1] + g.shape[1] - 1)
        spec = np.fft.rfft2(f, s=shape) * np.fft.rfft2(g, s=shape)
        return np.fft.irfft2(spec, s=shape) * self.d_xi * self.d_psi

    def r_mask(self) -> np.ndarray:
        e, p = self.sum_lattice()
        in_xi = np.abs(e - 2.0 * self.h) <= self.R.xi_half * (1.0 + 1e-12)
        in_psi = np.abs(p) <= self.R.psi_half * (1.0 + 1e-12)
        return in_xi[:, None] & in_psi[None, :]

    def sumset_contains_r(self) -> bool:
        return sumset(self.A, self.B).contains(self.R)

    def xi_sumset_contains_r(self) -> bool:
        return sumset(self.A, self.B).xi_projection_contains(self.R)


def counterexample_pair(N: float, params: DispersionParams, lattice_density: int = 16) -> CounterexamplePair:
    N = float(N)
    density = int(lattice_density)
    if not (math.isfinite(N) and N >= 4.0):
        raise InvalidParameters(f"N must be >= 4, got {N!r}")
    if density < 8:
        raise InvalidParameters(
            f"lattice_density must be >= 8 to resolve widths N^(-3/2), got {lattice_density!r}"
        )
    h = N**-1.5
    c_a = float(phi_prime(N, params)) * N - float(phi(N, params))
    A = Rectangle(N, h, c_a, 0.5)
    B = Rectangle(2.0 * h, h, 0.0, 0.5)
    R = Rectangle(N + 2.0 * h, h / 4.0, c_a, 0.5)
    return CounterexamplePair(N, params, density, A, B, R)


@dataclass(frozen=True)
class CounterexampleRatio:
    """Lattice-sum ratio and the centre-frozen (constant-weight) approximation at one (s, N)."""
    s: float
    N: float
    lhs: float
    rhs: float
    ratio: float
    ratio_constant: float


def counterexample_ratios(
    pair: CounterexamplePair,
    s_values: Sequence[float],
    epsilon: float,
) -> List[CounterexampleRatio]:
    """
    ||d_x(u1 u2)||_{X_{s1,b'}} / (||f||_{X_{s,b}} ||g||_{X_{s,b}}) with b = 1/2 + eps/2,
    b' = -1/2 + 2 eps, s1 = 1/2 + 2 eps. The product transform is (f*g)/(2 pi).
    """
    N = pair.N
    b = 0.5 + 0.5 * epsilon
    b_prime = -0.5 + 2.0 * epsilon
    s1 = 0.5 + 2.0 * epsilon
    cell = pair.d_xi * pair.d_psi

    e, p = pair.sum_lattice()
    xi_sum = N + e
    conv = pair.convolution() / (2.0 * math.pi)
    w_out = (xi_sum**2 * bracket(xi_sum) ** (2.0 * s1))[:, None] * bracket(pair.sigma_near(e, p)) ** (2.0 * b_prime)
    lhs = math.sqrt(float(np.sum(w_out * conv**2)) * cell)

    ea, pa = pair.a_lattice()
    sig_a = bracket(pair.sigma_near(ea, pa)) ** (2.0 * b)
    xi_b, _ = pair.b_lattice()
    sig_b = bracket(pair.sigma_b()) ** (2.0 * b)

    # centre-frozen weights
    xc = N + 2.0 * pair.h
    sig_c = float(pair.sigma_near(np.array([2.0 * pair.h]), np.array([0.0]))[0, 0])
    lhs_c = abs(xc) * bracket(xc) ** s1 * bracket(sig_c) ** b_prime * math.sqrt(float(np.sum(conv**2)) * cell)
    sig_bc = -pair.shear * 2.0 * pair.h + float(phi(2.0 * pair.h, pair.params))

    out: List[CounterexampleRatio] = []
    for s in s_values:
        s = float(s)
        f_norm = math.sqrt(float(np.sum((bracket(N + ea) ** (2.0 * s))[:, None] * sig_a)) * cell)
        g_norm = math.sqrt(float(np.sum((bracket(xi_b) ** (2.0 * s))[:, None] * sig_b)) * cell)
        rhs = f_norm * g_norm
        rhs_c = bracket(N) ** s * math.sqrt(pair.A.area) * bracket(2.0 * pair.h) ** s * bracket(sig_bc) ** b * math.sqrt(
            pair.B.area
        )
        out.append(CounterexampleRatio(s, N, lhs, rhs, lhs / rhs, lhs_c / rhs_c))
    return out


# -------------------------
# Sharpness scan
# -------------------------
def expected_slope(s: float, epsilon: float) -> float:
    return -float(s) - 0.5 + 0.75 * float(epsilon)


@dataclass(frozen=True)
class SlopeRow:
    s: float
    epsilon: float
    slope: float
    residual: float
    expected_slope: float
    noisy: bool = False


@dataclass(frozen=True)
class SlopeTable:
    """Fitted exponent of ratio ~ N^slope per s, plus the per-(s, N) ratios it was fitted to."""
    rows: Tuple[SlopeRow, ...]
    ratios: Tuple[CounterexampleRatio, ...]

    COLUMNS = ("s", "epsilon", "slope", "residual", "expected_slope")
    RATIO_COLUMNS = ("s", "N", "ratio", "ratio_constant")

    @property
    def noisy_count(self) -> int:
        return sum(1 for r in self.rows if r.noisy)

    def slope_at(self, s: float) -> float:
        for r in self.rows:
            if math.isclose(r.s, s, abs_tol=1e-12):
                return r.slope
        raise InvalidInput(f"s={s!r} was not scanned")

    def sign_change(self) -> Tuple[float, float]:
        """Consecutive scanned s values across which the slope turns non-positive."""
        ordered = sorted(self.rows, key=lambda r: r.s)
        for lo, hi in zip(ordered, ordered[1:]):
            if lo.slope > 0.0 >= hi.slope:
                return lo.s, hi.s
        raise InvalidInput("no sign change in the scanned slopes")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([[getattr(r, c) for c in self.COLUMNS] for r in self.rows], columns=list(self.COLUMNS))

    def ratios_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[getattr(r, c) for c in self.RATIO_COLUMNS] for r in self.ratios], columns=list(self.RATIO_COLUMNS)
        )


def check_ladder(N_values: Sequence[float]) -> np.ndarray:
    ns = np.asarray([float(n) for n in N_values])
    if ns.size < 4:
        raise InvalidParameters(f"N_values needs at least 4 points, got {ns.size}")
    if np.any(ns < 4.0) or np.any(np.diff(ns) <= 0.0):
        raise InvalidParameters("N_values must be increasing and >= 4")
    q = ns[1:] / ns[:-1]
    if not np.allclose(q, q[0], rtol=1e-9):
        raise InvalidParameters(f"N_values must be geometric, got ratios {q.tolist()}")
    return ns


def sharpness_scan(
    s_values: Sequence[float],
    N_values: Sequence[float],
    norm_params: NormParams,
    params: DispersionParams,
    *,
    lattice_density: int = 16,
    threads: int = 1,
) -> SlopeTable:
    """Least-squares slope of log(ratio) against log(N) for each s."""
    ss = [float(s) for s in s_values]
    if not ss:
        raise InvalidParameters("s_values is empty")
    ns = check_ladder(N_values)
    eps = norm_params.epsilon
    pairs = [counterexample_pair(N, params, lattice_density) for N in ns]
    for pair in pairs:
        if not pair.xi_sumset_contains_r():
            raise InvalidParameters(f"sumset does not cover R at N={pair.N:g}")

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        per_n = list(pool.map(lambda pair: counterexample_ratios(pair, ss, eps), pairs))

    by_s: Dict[float, List[CounterexampleRatio]] = {s: [] for s in ss}
    for results in per_n:
        for r in results:
            by_s[r.s].append(r)

    rows: List[SlopeRow] = []
    log_n = np.log(ns)
    for s in ss:
        log_r = np.log([r.ratio for r in by_s[s]])
        slope, icpt = np.polyfit(log_n, log_r, 1)
        residual = float(np.sqrt(np.mean((log_r - (slope * log_n + icpt)) ** 2)))
        noisy = residual > NOISY_FIT_RESIDUAL
        if noisy:
            logger.warning("noisy fit at s=%.4f: residual %.3f", s, residual)
        rows.append(SlopeRow(s, eps, float(slope), residual, expected_slope(s, eps), noisy))
        logger.debug("s=%.4f slope=%.4f expected=%.4f", s, slope, expected_slope(s, eps))

    ratios = tuple(r for s in ss for r in by_s[s])
    return SlopeTable(tuple(rows), ratios)


__all__ = [
    "RegionLabel",
    "region_classify",
    "region_classify_many",
    "KERNELS",
    "kernel_K",
    "bilinear_lhs",
    "ESTIMATES",
    "estimate_indices",
    "verify_estimate",
    "Rectangle",
    "sumset",
    "CounterexamplePair",
    "counterexample_pair",
    "CounterexampleRatio",
    "counterexample_ratios",
    "expected_slope",
    "check_ladder",
    "SlopeRow",
    "SlopeTable",
    "sharpness_scan",
]
