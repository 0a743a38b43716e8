"""Single-photon wave-packets sampled on uniform grids.

A :class:`Wavepacket` holds complex amplitudes ``psi(x_j)`` at
``x_j = grid_start + j * grid_step``.  Displacements come in two flavours:

``native_shift``
    ``psi(x) -> psi(x - tau)``, applied as a linear phase in the conjugate
    domain so that sub-step shifts are exact for band-limited samples.
``conjugate_phase``
    ``psi(x) -> psi(x) exp(-i x tau)``; a temporal delay ``tau`` acting on a
    packet stored in the frequency domain.

Both reduce the displaced overlap to the characteristic function of a
probability density on a uniform grid, which is what :func:`characteristic`
evaluates.  Units have hbar = 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import GridTooNarrowError, NumericalError, OffGridShiftError

NATIVE_SHIFT = "native_shift"
CONJUGATE_PHASE = "conjugate_phase"
CONVENTIONS = (NATIVE_SHIFT, CONJUGATE_PHASE)

NATIVE_X = "native_x"
FREQUENCY_OMEGA = "frequency_omega"
DOMAINS = (NATIVE_X, FREQUENCY_OMEGA)

PRESET_KINDS = ("gaussian", "lorentzian", "double_lorentzian", "one_sided_exponential", "rectangular")

EDGE_TOLERANCE = 1e-6
MIN_SAMPLES = 16
MAX_POINTS = 2**23
DEFAULT_POINTS = 4096


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown displacement convention {convention!r}; expected one of {CONVENTIONS}")


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``start + step * arange(n)``."""

    start: float
    step: float
    n: int

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if self.n < MIN_SAMPLES:
            raise ValueError(f"grid needs at least {MIN_SAMPLES} points")

    @classmethod
    def symmetric(cls, half_width: float, n: int) -> "Grid":
        """``n`` points on ``[-half_width, half_width)``; ``x[n // 2] == 0``."""
        return cls(-float(half_width), 2.0 * half_width / n, int(n))

    @property
    def points(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.n)

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.n - 1)


@dataclass(frozen=True, eq=False)
class Wavepacket:
    grid_start: float
    grid_step: float
    samples: np.ndarray
    domain: str = FREQUENCY_OMEGA

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.complex128).ravel()
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "grid_start", float(self.grid_start))
        object.__setattr__(self, "grid_step", float(self.grid_step))
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")
        if samples.size < MIN_SAMPLES:
            raise ValueError(f"a wave-packet needs at least {MIN_SAMPLES} samples")
        if not np.all(np.isfinite(samples)):
            raise ValueError("wave-packet samples must be finite")
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain label {self.domain!r}")

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def grid(self) -> Grid:
        return Grid(self.grid_start, self.grid_step, self.n)

    @property
    def x(self) -> np.ndarray:
        return self.grid.points

    @property
    def norm_sq(self) -> float:
        return float(np.sum(self.density) * self.grid_step)

    @cached_property
    def density(self) -> np.ndarray:
        return self.samples.real**2 + self.samples.imag**2

    @cached_property
    def spectrum(self) -> "Wavepacket":
        return fourier(self)

    @cached_property
    def _overlap_memo(self) -> dict:
        return {NATIVE_SHIFT: {}, CONJUGATE_PHASE: {}}

    def with_samples(self, samples: np.ndarray) -> "Wavepacket":
        return Wavepacket(self.grid_start, self.grid_step, samples, self.domain)

    def conjugate_domain(self) -> str:
        return NATIVE_X if self.domain == FREQUENCY_OMEGA else FREQUENCY_OMEGA


def edge_ratio(w: Wavepacket) -> float:
    """Largest amplitude among the two outermost samples on each side, relative to the peak."""
    mag = np.abs(w.samples)
    peak = mag.max()
    if peak == 0:
        return math.inf
    return float(max(mag[:2].max(), mag[-2:].max()) / peak)


def check_containment(w: Wavepacket) -> None:
    ratio = edge_ratio(w)
    if not ratio < EDGE_TOLERANCE:
        raise GridTooNarrowError(
            f"grid does not contain the wave-packet: edge amplitude ratio {ratio:.3g} >= {EDGE_TOLERANCE:g}"
        )


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PresetSpec:
    """Closed-form wave-packet family.

    With ``scale == 1`` the gaussian, lorentzian and double_lorentzian kinds are
    exactly ``(2/pi)^(1/4) exp(-x^2)``, ``(2/pi^2)^(1/4) / (1 + sqrt(2) i x)`` and
    ``(2/(4 pi^2))^(1/4) * 2 / (1 + 2 x^2)``.  ``scale`` dilates the variable.
    ``one_sided_exponential`` is ``sqrt(2 kappa) exp(-kappa x)`` for ``x >= 0``;
    ``rectangular`` is flat on ``|x| <= scale``.
    """

    kind: str
    scale: float = 1.0
    kappa: float = 1.0
    chi: float = 1.0
    domain: str = FREQUENCY_OMEGA

    def __post_init__(self):
        if self.kind not in PRESET_KINDS:
            raise ValueError(f"unknown preset kind {self.kind!r}; expected one of {PRESET_KINDS}")
        for name in ("scale", "kappa", "chi"):
            if not getattr(self, name) > 0:
                raise ValueError(f"preset {name} must be strictly positive")
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain label {self.domain!r}")

    @classmethod
    def cavity_emission(cls, kappa: float) -> "PresetSpec":
        """Lorentzian spectrum ``~ 1 / (kappa + i omega)`` of a fast emitter in a slow cavity."""
        return cls("lorentzian", scale=math.sqrt(2.0) * kappa, kappa=kappa)

    @classmethod
    def heralded_downconversion(cls, kappa: float, chi: float = 1.0) -> "PresetSpec":
        """Heralded down-conversion photon ``~ 2 chi kappa / (kappa^2 + omega^2)``.

        ``chi`` only sets the unnormalised pair amplitude, so it drops out of the
        normalised single-photon packet.
        """
        return cls("double_lorentzian", scale=math.sqrt(2.0) * kappa, kappa=kappa, chi=chi)

    @property
    def width(self) -> float:
        """Characteristic width of ``|psi|^2`` (standard deviation, or HWHM for the lorentzian)."""
        s = self.scale
        return {
            "gaussian": s / 2.0,
            "lorentzian": s / math.sqrt(2.0),
            "double_lorentzian": s / math.sqrt(2.0),
            "one_sided_exponential": s / (2.0 * self.kappa),
            "rectangular": s / math.sqrt(3.0),
        }[self.kind]

    def amplitude(self, x) -> np.ndarray:
        """Analytically normalised amplitude at ``x``."""
        x = np.asarray(x, dtype=float)
        s = self.scale
        u = x / s
        root = 1.0 / math.sqrt(s)
        if self.kind == "gaussian":
            return (2.0 / math.pi) ** 0.25 * np.exp(-u * u) * root + 0j
        if self.kind == "lorentzian":
            return (2.0 / math.pi**2) ** 0.25 / (1.0 + math.sqrt(2.0) * 1j * u) * root
        if self.kind == "double_lorentzian":
            return (2.0 / (4.0 * math.pi**2)) ** 0.25 * 2.0 / (1.0 + 2.0 * u * u) * root + 0j
        if self.kind == "one_sided_exponential":
            k = self.kappa
            out = np.where(u >= 0, math.sqrt(2.0 * k) * np.exp(-k * np.maximum(u, 0.0)), 0.0)
            return out * root + 0j
        out = np.where(np.abs(u) <= 1.0, 1.0 / math.sqrt(2.0), 0.0)
        return out * root + 0j

    def peak(self) -> float:
        return float(np.abs(self.amplitude(np.array([0.0])))[0])

    def containment_half_width(self) -> float:
        """Smallest half-width (to 1 %) beyond which ``|psi| < 0.9e-6 * peak`` on both sides.

        All presets have monotone tails, so doubling then bisecting is enough.
        """
        threshold = 0.9 * EDGE_TOLERANCE * self.peak()

        def outside(half: float) -> bool:
            return np.abs(self.amplitude(np.array([-half, half]))).max() < threshold

        hi = self.width
        for _ in range(80):
            if outside(hi):
                break
            hi *= 2.0
        else:
            raise GridTooNarrowError(f"{self.kind} preset tails never fall below the containment threshold")
        lo = hi / 2.0
        while hi - lo > 0.01 * hi:
            mid = 0.5 * (lo + hi)
            if outside(mid):
                hi = mid
            else:
                lo = mid
        return hi


def next_pow2(value: float) -> int:
    return 1 << max(0, math.ceil(math.log2(max(value, 1.0))))


def default_grid(spec: PresetSpec, n_points: int = DEFAULT_POINTS, max_points: int = MAX_POINTS) -> Grid:
    """``n_points`` over ``[-32 w, 32 w]``, widened (at the same or coarser step) for heavy tails."""
    w = spec.width
    half = 32.0 * w
    step = 2.0 * half / n_points
    needed = spec.containment_half_width()
    if needed <= half:
        return Grid.symmetric(half, n_points)
    half = needed
    n = min(next_pow2(2.0 * half / step), max_points)
    grid = Grid.symmetric(half, n)
    if grid.step > w / 2.0:
        raise GridTooNarrowError(
            f"{spec.kind} preset needs half-width {half:.3g}; {max_points} points cannot resolve width {w:.3g}"
        )
    return grid


def build_preset(spec: PresetSpec, grid: Grid | None = None, n_points: int = DEFAULT_POINTS) -> Wavepacket:
    """Sample a preset and normalise it on the grid.

    Without an explicit grid the builder picks :func:`default_grid`, widening
    it as far as the tails require.  An explicit grid that does not contain the
    packet is rejected with :class:`GridTooNarrowError`.
    """
    if grid is None:
        grid = default_grid(spec, n_points)
    w = Wavepacket(grid.start, grid.step, spec.amplitude(grid.points), spec.domain)
    check_containment(w)
    return normalize(w)


def sample_function(f: Callable[[np.ndarray], np.ndarray], grid: Grid, domain: str = FREQUENCY_OMEGA) -> Wavepacket:
    """Normalised samples of an arbitrary callable; containment is enforced."""
    w = Wavepacket(grid.start, grid.step, np.asarray(f(grid.points), dtype=complex), domain)
    check_containment(w)
    return normalize(w)


# ---------------------------------------------------------------------------
# basic functionals
# ---------------------------------------------------------------------------


def normalize(w: Wavepacket) -> Wavepacket:
    norm_sq = w.norm_sq
    if not norm_sq > 0:
        raise ValueError("cannot normalise a zero-norm wave-packet")
    return w.with_samples(w.samples / math.sqrt(norm_sq))


def moment(w: Wavepacket, order: int, centered: bool = False) -> float:
    """``integral x^order |psi|^2 dx``; ``centered`` subtracts the mean first."""
    if order not in (1, 2):
        raise ValueError("moment order must be 1 or 2")
    x = w.x
    d = w.density
    h = w.grid_step
    if order == 1:
        return float(np.dot(x, d) * h)
    if centered:
        x = x - np.dot(x, d) * h
    return float(np.dot(x * x, d) * h)


def _centered_variance(x: np.ndarray, d: np.ndarray) -> float:
    total = d.sum()
    mean = np.dot(x, d) / total
    return float(np.dot((x - mean) ** 2, d) / total)


# ---------------------------------------------------------------------------
# Fourier pair
# ---------------------------------------------------------------------------


def fourier(w: Wavepacket, inverse: bool = False, start: float | None = None) -> Wavepacket:
    """Unitary transform onto the conjugate grid.

    Forward: ``phi(p) = (2 pi)^(-1/2) integral psi(x) exp(-i p x) dx`` with the
    conjugate grid centred, ``p_k = (k - n/2) * 2 pi / (n h)``.  The inverse maps
    back onto ``start + j h`` (default: the centred grid), so
    ``fourier(fourier(w), inverse=True, start=w.grid_start)`` recovers ``w``.
    Parseval holds exactly up to rounding.
    """
    n = w.n
    h = w.grid_step
    dk = 2.0 * math.pi / (n * h)
    c = n // 2
    if start is None:
        start = -c * dk
    index = np.arange(n, dtype=np.int64)
    if not inverse:
        # p_k = (k - c) dk and x_j = x0 + j h give exp(-i p_k x_j) =
        # exp(-i p_k x0) exp(-2 pi i k j / n) exp(2 pi i c j / n)
        twist = (-1.0) ** index if n % 2 == 0 else np.exp(1j * _cycles(index, c, n))
        m, rest = _split_offset(w.grid_start, h)
        # p_k x0 = 2 pi (k - c) m / n + p_k rest, with the large part reduced exactly
        phase = _cycles(index - c, m, n) + (index - c) * dk * rest
        transformed = np.fft.fft(w.samples * twist)
        out = h / math.sqrt(2.0 * math.pi) * np.exp(-1j * phase) * transformed
        return Wavepacket(-c * dk, dk, out, w.conjugate_domain())
    # w lives on p_k = p0 + k h; the result lives on x_j = start + j dk.
    # p_k x_j = p0 start + p0 j dk + k h start + 2 pi k j / n
    q, eps = _split_offset(w.grid_start, h)
    m, rest = _split_offset(start, dk)
    pre = w.samples * np.exp(1j * (_cycles(index, m, n) + index * h * rest))
    transformed = np.fft.ifft(pre) * n
    post = _cycles(index, q, n) + index * dk * eps
    constant = 2.0 * math.pi * ((q * m) % n) / n + q * h * rest + eps * m * dk + eps * rest
    out = h / math.sqrt(2.0 * math.pi) * np.exp(1j * (post + constant)) * transformed
    return Wavepacket(start, dk, out, w.conjugate_domain())


def _split_offset(offset: float, step: float) -> tuple[int, float]:
    """``offset = m * step + rest`` with integer ``m`` and ``|rest| <= step / 2``."""
    m = int(round(offset / step))
    return m, offset - m * step


def _cycles(a: np.ndarray, b: int, n: int) -> np.ndarray:
    """``2 pi a b / n`` reduced modulo ``2 pi`` in exact integer arithmetic."""
    return 2.0 * math.pi * ((a * b) % n) / n


# ---------------------------------------------------------------------------
# displaced overlaps
# ---------------------------------------------------------------------------

_BLOCK = 1024
_TAU_CHUNK = 256


def characteristic(density: np.ndarray, start: float, step: float, taus) -> np.ndarray:
    """``step * sum_j density_j exp(-i x_j tau)`` for each ``tau``, with ``x_j = start + j step``.

    Phases are factored as block base times in-block offset so the sum becomes
    a real matrix product; every phase is computed directly, no recurrences.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    n = density.size
    m = min(_BLOCK, n)
    pad = (-n) % m
    d = np.concatenate([density, np.zeros(pad)]) if pad else density
    blocks = d.reshape(-1, m)
    offsets = step * np.arange(m)
    bases = start + step * m * np.arange(blocks.shape[0])
    out = np.empty(taus.size, dtype=np.complex128)
    for lo in range(0, taus.size, _TAU_CHUNK):
        t = taus[lo : lo + _TAU_CHUNK]
        k = t.size
        phase = np.outer(offsets, t)
        trig = np.empty((m, 2 * k))
        np.cos(phase, out=trig[:, :k])
        np.sin(phase, out=trig[:, k:])
        np.negative(trig[:, k:], out=trig[:, k:])
        partial = blocks @ trig
        inner = partial[:, :k] + 1j * partial[:, k:]
        outer = np.exp(-1j * np.outer(bases, t))
        out[lo : lo + k] = step * np.einsum("bk,bk->k", outer, inner)
    return out


def _support(w: Wavepacket) -> tuple[float, float]:
    mag = np.abs(w.samples)
    idx = np.nonzero(mag > EDGE_TOLERANCE * mag.max())[0]
    return w.grid_start + idx[0] * w.grid_step, w.grid_start + idx[-1] * w.grid_step


def _check_shift(w: Wavepacket, taus: np.ndarray) -> None:
    lo, hi = _support(w)
    stop = w.grid.stop
    if taus.size == 0:
        return
    if lo + taus.min() < w.grid_start or hi + taus.max() > stop:
        raise OffGridShiftError(
            f"shift range [{taus.min():.4g}, {taus.max():.4g}] moves support [{lo:.4g}, {hi:.4g}] off the grid"
        )


def displaced_overlap(w: Wavepacket, tau, convention: str = CONJUGATE_PHASE):
    """``<psi | D(tau) psi>`` for the chosen displacement convention.

    Scalar ``tau`` gives a complex scalar, array-like gives an array.  Results
    are memoised per packet; batches are evaluated in one pass.
    """
    _check_convention(convention)
    scalar = np.ndim(tau) == 0
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    if convention == NATIVE_SHIFT:
        _check_shift(w, taus)
    memo = w._overlap_memo[convention]
    keys = taus.tolist()
    missing = sorted({t for t in keys if t not in memo and -t not in memo})
    if missing:
        if convention == CONJUGATE_PHASE:
            values = characteristic(w.density, w.grid_start, w.grid_step, missing)
        else:
            spec = w.spectrum
            values = characteristic(spec.density, spec.grid_start, spec.grid_step, missing)
        memo.update(zip(missing, values))
    # the density is real, so O(-tau) = conj(O(tau))
    out = np.array([memo[t] if t in memo else np.conj(memo[-t]) for t in keys], dtype=np.complex128)
    return complex(out[0]) if scalar else out


def overlap_matrix(w: Wavepacket, shifts_a: Sequence[float], shifts_b: Sequence[float], convention: str) -> np.ndarray:
    """``G[r, s] = <D(a_r) psi | D(b_s) psi> = O(b_s - a_r)``."""
    a = np.asarray(shifts_a, dtype=float)
    b = np.asarray(shifts_b, dtype=float)
    diff = b[None, :] - a[:, None]
    return displaced_overlap(w, diff.ravel(), convention).reshape(diff.shape)


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------

REFINEMENT_GROWTH = 0.10


def _variance_with_refinement(x: np.ndarray, d: np.ndarray, mid: float, span: float) -> tuple[float, float]:
    """Variance over the whole grid and over its central half."""
    inner = np.abs(x - mid) < span / 4.0
    return _centered_variance(x, d), _centered_variance(x[inner], d[inner])


def curvature(w: Wavepacket, convention: str = CONJUGATE_PHASE) -> float:
    """Variance of the variable conjugate to the displacement; ``math.inf`` when divergent.

    ``native_shift`` uses the spectral variance of ``fourier(w)``;
    ``conjugate_phase`` uses the variance of ``|psi|^2`` itself.  Divergence is
    declared when restricting to half the relevant band (the same samples at
    half the resolution, or half the grid span) changes the value by more than
    10 %.
    """
    _check_convention(convention)
    if convention == NATIVE_SHIFT:
        spec = w.spectrum
        x, d = spec.x, spec.density
        span = spec.n * spec.grid_step
    else:
        x, d = w.x, w.density
        span = w.n * w.grid_step
    mid = x[0] + 0.5 * span
    full, half = _variance_with_refinement(x, d, mid, span)
    if half > 0 and full > (1.0 + REFINEMENT_GROWTH) * half:
        return math.inf
    return full


def dip_curvature_fd(w: Wavepacket, convention: str = CONJUGATE_PHASE, step: float = 1e-3) -> float:
    """``-(1/2) d^2 |O|^2 / d tau^2`` at zero by central differences (a check on :func:`curvature`)."""
    o = displaced_overlap(w, np.array([-step, 0.0, step]), convention)
    g = np.abs(o) ** 2
    return float(-(g[0] - 2.0 * g[1] + g[2]) / step**2 / 2.0)


# ---------------------------------------------------------------------------
# spectral filtering
# ---------------------------------------------------------------------------

FILTER_KINDS = ("gaussian", "lorentzian", "rectangular")


@dataclass(frozen=True)
class SpectralFilter:
    """Amplitude transmission ``T(omega)``.

    gaussian: ``peak exp(-(omega - centre)^2 / (2 width^2))``;
    lorentzian: ``peak width / (width + i (omega - centre))``;
    rectangular: ``peak`` on ``|omega - centre| <= width``.
    """

    kind: str
    width: float
    center: float = 0.0
    peak: float = 1.0

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if not self.width > 0:
            raise ValueError("filter width must be positive")
        if not 0 < self.peak <= 1:
            raise ValueError("filter peak transmission must lie in (0, 1]")

    def transmission(self, omega) -> np.ndarray:
        u = (np.asarray(omega, dtype=float) - self.center) / self.width
        if self.kind == "gaussian":
            return self.peak * np.exp(-0.5 * u * u) + 0j
        if self.kind == "lorentzian":
            return self.peak / (1.0 + 1j * u)
        return np.where(np.abs(u) <= 1.0, self.peak, 0.0) + 0j


def apply_filter(w: Wavepacket, f: SpectralFilter) -> tuple[Wavepacket, float]:
    """Filter a frequency-domain packet; returns the renormalised packet and the transmitted fraction."""
    if w.domain != FREQUENCY_OMEGA:
        raise ValueError("spectral filtering needs a frequency_omega packet")
    filtered = w.with_samples(f.transmission(w.x) * w.samples)
    fraction = filtered.norm_sq
    if fraction < 1e-12:
        raise NumericalError(f"filter annihilates the packet (transmitted fraction {fraction:.3g})")
    return normalize(filtered), fraction


# ---------------------------------------------------------------------------
# time jitter
# ---------------------------------------------------------------------------

JITTER_KINDS = ("none", "gaussian", "uniform", "discrete")


@dataclass(frozen=True)
class JitterModel:
    """Distribution of emission-time offsets.

    ``spread`` is the standard deviation (gaussian) or half-width (uniform);
    ``atoms`` lists ``(offset, weight)`` pairs for the discrete kind.
    """

    kind: str = "none"
    spread: float = 0.0
    atoms: tuple[tuple[float, float], ...] = field(default_factory=tuple)
    nodes: int = 32

    def __post_init__(self):
        if self.kind not in JITTER_KINDS:
            raise ValueError(f"unknown jitter kind {self.kind!r}")
        if self.spread < 0:
            raise ValueError("jitter spread must be non-negative")
        atoms = tuple((float(o), float(p)) for o, p in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if self.kind == "discrete":
            weights = np.array([p for _, p in atoms])
            if weights.size == 0 or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
                raise ValueError("discrete jitter weights must be non-negative and sum to 1")
        if self.nodes < 32 and self.kind in ("gaussian", "uniform"):
            raise ValueError("continuous jitter needs at least 32 quadrature nodes")

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """Offsets and weights representing f(tau)."""
        if self.kind == "none" or (self.kind in ("gaussian", "uniform") and self.spread == 0):
            return np.zeros(1), np.ones(1)
        if self.kind == "gaussian":
            nodes, weights = np.polynomial.hermite_e.hermegauss(self.nodes)
            return self.spread * nodes, weights / weights.sum()
        if self.kind == "uniform":
            nodes, weights = np.polynomial.legendre.leggauss(self.nodes)
            return self.spread * nodes, weights / weights.sum()
        offsets = np.array([o for o, _ in self.atoms])
        weights = np.array([p for _, p in self.atoms])
        return offsets, weights


def jitter_kernel(w: Wavepacket, f: JitterModel, tau: float, convention: str = CONJUGATE_PHASE) -> float:
    """Mean of ``|O(tau + t1 - t2)|^2`` over independent offsets ``t1, t2 ~ f``."""
    offsets, weights = f.quadrature()
    diffs = tau + offsets[:, None] - offsets[None, :]
    pair_weights = weights[:, None] * weights[None, :]
    values = np.abs(displaced_overlap(w, diffs.ravel(), convention)) ** 2
    return float(np.clip(np.dot(pair_weights.ravel(), values), 0.0, 1.0))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def write_csv(w: Wavepacket, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "re", "im"])
        for xv, a in zip(w.x, w.samples):
            writer.writerow([repr(float(xv)), repr(float(a.real)), repr(float(a.imag))])


def read_csv(path, domain: str = FREQUENCY_OMEGA) -> Wavepacket:
    """Load ``x,re,im`` rows; the x column must be uniform to 1e-9 relative."""
    rows = list(csv.reader(Path(path).open(newline="")))
    if not rows or [c.strip() for c in rows[0]] != ["x", "re", "im"]:
        raise ValueError("wave-packet CSV must start with the header x,re,im")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if data.shape[0] < MIN_SAMPLES:
        raise ValueError(f"wave-packet CSV needs at least {MIN_SAMPLES} rows")
    x = data[:, 0]
    steps = np.diff(x)
    step = (x[-1] - x[0]) / (x.size - 1)
    if not step > 0 or np.max(np.abs(steps - step)) > 1e-9 * max(abs(step), np.max(np.abs(x))):
        raise ValueError("x column is not a uniform increasing grid")
    w = Wavepacket(x[0], step, data[:, 1] + 1j * data[:, 2], domain)
    check_containment(w)
    return w


def l2_distance(a: Wavepacket, b: Wavepacket) -> float:
    if a.n != b.n or not math.isclose(a.grid_step, b.grid_step, rel_tol=1e-12):
        raise ValueError("packets live on different grids")
    return float(np.sqrt(np.sum(np.abs(a.samples - b.samples) ** 2) * a.grid_step))


def reference_presets() -> dict[str, PresetSpec]:
    """Gaussian, lorentzian and double-sided-lorentzian packets at unit scale (frequency domain)."""
    return {
        "gaussian": PresetSpec("gaussian"),
        "lorentzian": PresetSpec("lorentzian"),
        "dsl": PresetSpec("double_lorentzian"),
    }


def iter_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive range ``lo, lo + step, ..., hi`` built from integer multiples (no drift)."""
    if not step > 0 or hi < lo:
        raise ValueError("empty range")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


__all__ = [
    "CONJUGATE_PHASE",
    "NATIVE_SHIFT",
    "FREQUENCY_OMEGA",
    "NATIVE_X",
    "Grid",
    "Wavepacket",
    "PresetSpec",
    "SpectralFilter",
    "JitterModel",
    "apply_filter",
    "build_preset",
    "characteristic",
    "check_containment",
    "curvature",
    "default_grid",
    "dip_curvature_fd",
    "edge_ratio",
    "reference_presets",
    "iter_grid",
    "l2_distance",
    "sample_function",
    "displaced_overlap",
    "fourier",
    "jitter_kernel",
    "moment",
    "normalize",
    "read_csv",
    "write_csv",
]
