"""Path-sum description of multi-photon states after a linear network.

A photon entering input ``k`` leaves in output ``i`` with amplitude ``U[i, k]``
and with its packet displaced by ``T[k, i]``.  Expanding the product over
photons gives a sum over assignments ``(i_1, ..., i_n)``.  Creation operators
commute, so assignments that put the same multiset of displaced packets into
the same modes describe the same vector; such terms are merged into one
*component* keyed by the per-mode tuple of displacements.

Two components can only overlap when their occupation numbers agree.  Their
inner product factorises over modes, and within a mode it is the permanent of
the matrix of displaced overlaps ``O(tau_b - tau_a)`` between the photons that
landed there.  Post-selected quantities reduce to the same double sums, so no
density matrix is ever built.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import GuardError, NonSmoothError, NullEventError, NumericalError
from .network import CompiledNetwork, hom_network
from .oracle import permanent
from .wavepacket import CONJUGATE_PHASE, Wavepacket, _check_convention, displaced_overlap

MAX_PHOTONS = 6
MAX_MODES = 10
NORM_TOLERANCE = 1e-6
FIDELITY_SLACK = 1e-9
PROBABILITY_RESIDUE = 1e-10
NULL_EVENT = 1e-12

# per-mode tuple of sorted displacements; its shape fixes the occupation numbers
ComponentKey = tuple[tuple[float, ...], ...]


@dataclass(frozen=True, eq=False)
class PhotonConfig:
    input_modes: tuple[int, ...]
    packet: Wavepacket
    convention: str = CONJUGATE_PHASE

    def __post_init__(self):
        modes = tuple(int(k) for k in self.input_modes)
        object.__setattr__(self, "input_modes", modes)
        if not modes:
            raise ValueError("at least one photon is required")
        if len(set(modes)) != len(modes) or min(modes) < 0:
            raise ValueError(f"input modes {modes} must be distinct non-negative indices")
        _check_convention(self.convention)
        if abs(self.packet.norm_sq - 1.0) > NORM_TOLERANCE:
            raise ValueError(f"packet is not normalised (norm^2 = {self.packet.norm_sq:.9g})")

    @property
    def n_photons(self) -> int:
        return len(self.input_modes)


@dataclass(frozen=True)
class PathTerm:
    assignment: tuple[int, ...]
    amplitude: complex
    displacements: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class PathState:
    """Expanded output state.

    ``terms`` lists every surviving assignment; ``components`` holds the merged
    amplitudes grouped by occupation vector.
    """

    terms: tuple[PathTerm, ...]
    packet: Wavepacket
    convention: str
    n_modes: int
    n_photons: int
    components: Mapping[tuple[int, ...], Mapping[ComponentKey, complex]] = field(repr=False)

    @classmethod
    def from_terms(cls, terms: Iterable[PathTerm], packet: Wavepacket, convention: str, n_modes: int, n_photons: int):
        terms = tuple(terms)
        return cls(terms, packet, convention, n_modes, n_photons, _merge(terms, n_modes))

    def compatible(self, other: "PathState") -> bool:
        return (
            self.n_modes == other.n_modes
            and self.n_photons == other.n_photons
            and self.convention == other.convention
            and (self.packet is other.packet or _same_packet(self.packet, other.packet))
        )


def _same_packet(a: Wavepacket, b: Wavepacket) -> bool:
    return a.grid_start == b.grid_start and a.grid_step == b.grid_step and a.n == b.n and np.array_equal(a.samples, b.samples)


def _component_key(assignment: Sequence[int], taus: Sequence[float], n_modes: int) -> ComponentKey:
    per_mode: list[list[float]] = [[] for _ in range(n_modes)]
    for i, t in zip(assignment, taus):
        per_mode[i].append(float(t))
    return tuple(tuple(sorted(v)) for v in per_mode)


def _occupation(key: ComponentKey) -> tuple[int, ...]:
    return tuple(len(v) for v in key)


def _merge(terms: Sequence[PathTerm], n_modes: int):
    merged: dict[tuple[int, ...], dict[ComponentKey, complex]] = defaultdict(lambda: defaultdict(complex))
    for t in terms:
        key = _component_key(t.assignment, t.displacements, n_modes)
        merged[_occupation(key)][key] += t.amplitude
    return {occ: dict(v) for occ, v in merged.items()}


def _check_guards(n_photons: int, n_modes: int, max_photons: int, max_modes: int) -> None:
    if n_photons > max_photons:
        raise GuardError(f"{n_photons} photons exceed the guard of {max_photons}")
    if n_modes > max_modes:
        raise GuardError(f"{n_modes} modes exceed the guard of {max_modes}")


def expand(
    c: CompiledNetwork, p: PhotonConfig, *, max_photons: int = MAX_PHOTONS, max_modes: int = MAX_MODES
) -> PathState:
    """Enumerate every assignment of input photons to output modes."""
    n_modes = c.n_modes
    if max(p.input_modes) >= n_modes:
        raise ValueError(f"input mode {max(p.input_modes)} outside a {n_modes}-mode network")
    _check_guards(p.n_photons, n_modes, max_photons, max_modes)
    u, t = c.unitary, c.displacements
    # per photon: the outputs it can reach, with amplitude and displacement
    routes = [[(i, u[i, k], float(t[k, i])) for i in range(n_modes) if u[i, k] != 0] for k in p.input_modes]
    terms = []
    for combo in itertools.product(*routes):
        amp = complex(np.prod([r[1] for r in combo]))
        if amp == 0:
            continue
        terms.append(PathTerm(tuple(r[0] for r in combo), amp, tuple(r[2] for r in combo)))
    return PathState.from_terms(terms, p.packet, p.convention, n_modes, p.n_photons)


# ---------------------------------------------------------------------------
# overlap contractions
# ---------------------------------------------------------------------------


class _Overlaps:
    """Batch evaluation of ``O(tau_b - tau_a)`` over all displacement pairs that can meet."""

    def __init__(self, packet: Wavepacket, convention: str, taus_a: Iterable[float], taus_b: Iterable[float]):
        ta = sorted(set(taus_a))
        tb = sorted(set(taus_b))
        diffs = sorted({b - a for a in ta for b in tb})
        values = displaced_overlap(packet, np.array(diffs, dtype=float), convention) if diffs else []
        self._table = dict(zip(diffs, np.atleast_1d(values)))

    def __call__(self, ta: float, tb: float) -> complex:
        return self._table[tb - ta]

    def mode_product(self, ka: ComponentKey, kb: ComponentKey, modes: Iterable[int]) -> complex:
        out = 1.0 + 0j
        for m in modes:
            a, b = ka[m], kb[m]
            if not a:
                continue
            if len(a) == 1:
                out *= self(a[0], b[0])
            elif len(a) == 2:
                out *= self(a[0], b[0]) * self(a[1], b[1]) + self(a[0], b[1]) * self(a[1], b[0])
            else:
                out *= permanent([[self(x, y) for y in b] for x in a])
            if out == 0:
                break
        return out


def _all_taus(s: PathState) -> set[float]:
    return {t for comp in s.components.values() for key in comp for per in key for t in per}


def _pair_sum(a: Mapping[ComponentKey, complex], b: Mapping[ComponentKey, complex], ov: _Overlaps, modes) -> complex:
    total = 0j
    for ka, wa in a.items():
        for kb, wb in b.items():
            total += np.conj(wa) * wb * ov.mode_product(ka, kb, modes)
    return total


def inner(a: PathState, b: PathState) -> complex:
    """``<A|B>``."""
    if not a.compatible(b):
        raise ValueError("states differ in photon number, mode count, convention or packet")
    ov = _Overlaps(a.packet, a.convention, _all_taus(a), _all_taus(b))
    modes = range(a.n_modes)
    return complex(sum((_pair_sum(a.components[occ], b.components[occ], ov, modes) for occ in a.components if occ in b.components), 0j))


def norm_check(s: PathState) -> float:
    """``<S|S>``; differs from one when the displacement matrix is not a physical mismatch."""
    return float(inner(s, s).real)


@dataclass(frozen=True)
class FidelityReport:
    fidelity: float
    raw: float
    norm_check: float
    normalized: bool


def fidelity_report(c: CompiledNetwork, p: PhotonConfig, normalized: bool = False, **guards) -> FidelityReport:
    ideal = expand(c.ideal(), p, **guards)
    actual = expand(c, p, **guards)
    norm = norm_check(actual)
    raw = abs(inner(ideal, actual)) ** 2
    if normalized:
        if norm <= NULL_EVENT:
            raise NullEventError("displaced state has zero norm")
        raw /= norm
    if raw > 1.0 + FIDELITY_SLACK:
        raise NumericalError(f"fidelity {raw!r} exceeds one (norm_check = {norm!r}); the displacement matrix is unphysical")
    return FidelityReport(min(max(raw, 0.0), 1.0), raw, norm, normalized)


def fidelity(c: CompiledNetwork, p: PhotonConfig, normalized: bool = False, **guards) -> float:
    """``|<ideal|displaced>|^2`` (optionally divided by the displaced norm)."""
    return fidelity_report(c, p, normalized, **guards).fidelity


# ---------------------------------------------------------------------------
# detection
# ---------------------------------------------------------------------------

DetectionPattern = Mapping[int, int]


def _check_pattern(pattern: DetectionPattern, n_modes: int, n_photons: int) -> dict[int, int]:
    pattern = {int(m): int(v) for m, v in pattern.items()}
    for m, v in pattern.items():
        if not 0 <= m < n_modes:
            raise ValueError(f"detected mode {m} outside 0..{n_modes - 1}")
        if v < 0:
            raise ValueError("detection counts must be non-negative")
    if sum(pattern.values()) > n_photons:
        raise ValueError(f"pattern asks for {sum(pattern.values())} photons but only {n_photons} are present")
    return pattern


def _matches(occ: Sequence[int], pattern: Mapping[int, int]) -> bool:
    return all(occ[m] == v for m, v in pattern.items())


def _clamp_probability(value: complex, what: str) -> float:
    if abs(value.imag) > PROBABILITY_RESIDUE:
        raise NumericalError(f"{what} has imaginary residue {value.imag:.3g}")
    return min(max(value.real, 0.0), 1.0)


def detection_prob(s: PathState, pattern: DetectionPattern) -> float:
    """Probability that the detected modes hold exactly the requested photon numbers."""
    pattern = _check_pattern(pattern, s.n_modes, s.n_photons)
    ov = _Overlaps(s.packet, s.convention, _all_taus(s), _all_taus(s))
    modes = range(s.n_modes)
    total = sum((_pair_sum(comp, comp, ov, modes) for occ, comp in s.components.items() if _matches(occ, pattern)), 0j)
    return _clamp_probability(complex(total), "detection probability")


def coincidence(c: CompiledNetwork, p: PhotonConfig, mode_a: int = 0, mode_b: int = 1) -> float:
    return detection_prob(expand(c, p), {mode_a: 1, mode_b: 1})


def _split(key: ComponentKey, detected: Sequence[int]) -> tuple[ComponentKey, ComponentKey]:
    det = set(detected)
    d = tuple(v if m in det else () for m, v in enumerate(key))
    u = tuple(() if m in det else v for m, v in enumerate(key))
    return d, u


def _conditional_overlap(ideal: PathState, actual: PathState, pattern: Mapping[int, int]) -> tuple[float, float]:
    """``(<phi|rho_c|phi>, ||phi||^2)`` with ``phi`` the unnormalised ideal conditional state.

    ``rho_c`` is the unnormalised post-selected state of the undetected modes.
    """
    detected = sorted(pattern)
    undetected = [m for m in range(actual.n_modes) if m not in pattern]
    ov = _Overlaps(actual.packet, actual.convention, _all_taus(ideal) | _all_taus(actual), _all_taus(actual))
    # ideal conditional state: undisplaced undetected parts, merged per occupation
    phi: dict[ComponentKey, complex] = defaultdict(complex)
    for occ, comp in ideal.components.items():
        if _matches(occ, pattern):
            for key, w in comp.items():
                phi[_split(key, detected)[1]] += w
    phi_norm = sum(abs(w) ** 2 * math.prod(math.factorial(len(v)) for v in key) for key, w in phi.items())
    if phi_norm <= NULL_EVENT:
        return 0.0, 0.0
    # W_d = sum over components with detected part d of w_b <phi|b_U>
    weights: dict[ComponentKey, complex] = defaultdict(complex)
    for occ, comp in actual.components.items():
        if not _matches(occ, pattern):
            continue
        for key, w in comp.items():
            d, u = _split(key, detected)
            proj = sum(
                (np.conj(lc) * ov.mode_product(kc, u, undetected) for kc, lc in phi.items() if _occupation(kc) == _occupation(u)),
                0j,
            )
            weights[d] += w * proj
    q = _pair_sum(weights, weights, ov, detected)
    return float(q.real) / phi_norm, phi_norm


def conditional_fidelity(c: CompiledNetwork, p: PhotonConfig, pattern: DetectionPattern, **guards) -> tuple[float, float]:
    """Fidelity of the post-selected state with the ideal post-selected state, and the success probability."""
    pattern = _check_pattern(pattern, c.n_modes, p.n_photons)
    if sum(pattern.values()) >= p.n_photons:
        raise ValueError("the pattern must leave at least one photon undetected")
    ideal = expand(c.ideal(), p, **guards)
    actual = expand(c, p, **guards)
    if detection_prob(ideal, pattern) <= NULL_EVENT:
        raise NullEventError("the ideal circuit never produces this pattern")
    p_success = detection_prob(actual, pattern)
    if p_success <= NULL_EVENT:
        raise NullEventError(f"conditioning on an outcome of probability {p_success:.3g}")
    q, _ = _conditional_overlap(ideal, actual, pattern)
    return min(max(q / p_success, 0.0), 1.0), p_success


# ---------------------------------------------------------------------------
# feed-forward
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Block:
    """A network stage; photons in ``detected`` modes are measured after it."""

    network: CompiledNetwork
    detected: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "detected", tuple(sorted(int(m) for m in self.detected)))
        if any(not 0 <= m < self.network.n_modes for m in self.detected):
            raise ValueError("detected mode outside the block")


def _outcomes(detected: Sequence[int], n_photons: int) -> list[tuple[int, ...]]:
    return [o for o in itertools.product(range(n_photons + 1), repeat=len(detected)) if sum(o) <= n_photons]


def _two_stage_state(first: Block, second: Block | None, p: PhotonConfig, ideal: bool, guards) -> PathState:
    """Both stages on an extended register: detected photons park in ancilla modes ``M + j``."""
    c1 = first.network
    m = c1.n_modes
    det = {mode: m + j for j, mode in enumerate(first.detected)}
    width = m + len(det)
    _check_guards(p.n_photons, width, guards.get("max_photons", MAX_PHOTONS), guards.get("max_modes", MAX_MODES) + len(det))
    u1 = c1.unitary
    t1 = np.zeros_like(c1.displacements) if ideal else c1.displacements
    if second is not None:
        if second.network.n_modes != m:
            raise ValueError("feed-forward blocks must act on the same modes")
        if second.detected:
            raise ValueError("only the first block may carry detectors")
        u2 = second.network.unitary
        t2 = np.zeros_like(second.network.displacements) if ideal else second.network.displacements
    else:
        u2, t2 = np.eye(m), np.zeros((m, m))
    routes = []
    for k in p.input_modes:
        r: dict[tuple[int, float], complex] = defaultdict(complex)
        for i in range(m):
            if u1[i, k] == 0:
                continue
            if i in det:
                r[(det[i], float(t1[k, i]))] += u1[i, k]
                continue
            for j in range(m):
                if u2[j, i] != 0:
                    r[(j, float(t1[k, i] + t2[i, j]))] += u2[j, i] * u1[i, k]
        routes.append([(i, a, t) for (i, t), a in r.items() if a != 0])
    terms = []
    for combo in itertools.product(*routes):
        terms.append(PathTerm(tuple(x[0] for x in combo), complex(np.prod([x[1] for x in combo])), tuple(x[2] for x in combo)))
    return PathState.from_terms(terms, p.packet, p.convention, width, p.n_photons)


def feedforward_fidelity(
    blocks: Sequence[Block], router: Mapping[tuple[int, ...], int], p: PhotonConfig, **guards
) -> float:
    """Outcome-weighted fidelity of a two-stage adaptive circuit.

    ``router`` maps the photon counts seen on ``blocks[0].detected`` (in
    ascending mode order) to the index of the block applied next.  The result is
    ``sum_o p(o) F_c(o)``; every outcome the displaced circuit produces with
    non-negligible probability must be routed.
    """
    if not blocks:
        raise ValueError("no blocks given")
    first = blocks[0]
    if len(blocks) == 1 and not first.detected:
        return fidelity(first.network, p, **guards)
    total = 0.0
    for outcome in _outcomes(first.detected, p.n_photons):
        if outcome in router:
            index = router[outcome]
            if not 0 < index < len(blocks):
                raise ValueError(f"router sends {outcome} to block {index}; the chain has two stages")
            second = blocks[index]
        else:
            second = None
        actual = _two_stage_state(first, second, p, False, guards)
        pattern = {first.network.n_modes + j: v for j, v in enumerate(outcome)}
        prob = detection_prob(actual, pattern)
        if second is None:
            if prob > NULL_EVENT:
                raise ValueError(f"router has no entry for outcome {outcome} (probability {prob:.3g})")
            continue
        if prob <= NULL_EVENT:
            continue
        ideal = _two_stage_state(first, second, p, True, guards)
        q, _ = _conditional_overlap(ideal, actual, pattern)
        total += q
    if total > 1.0 + FIDELITY_SLACK:
        raise NumericalError(f"feed-forward fidelity {total!r} exceeds one")
    return min(max(total, 0.0), 1.0)


# ---------------------------------------------------------------------------
# curvature and scans
# ---------------------------------------------------------------------------

FIRST_DERIVATIVE_TOLERANCE = 1e-6
CUSP_TOLERANCE = 1e-3


def fidelity_curvature(c: CompiledNetwork, p: PhotonConfig, edge: tuple[int, int], h: float = 1e-2, **guards) -> float:
    """Second derivative of the fidelity with respect to ``T[edge]`` at the current operating point.

    Central second differences at ``h``, ``h/2`` and ``h/4`` are extrapolated to
    zero step.  Disagreeing one-sided first derivatives flag a cusp, and a
    non-zero central first derivative flags an operating point that is not a
    maximum; both raise :class:`NonSmoothError`.
    """
    if not 1e-4 <= h <= 1e-1:
        raise ValueError("step must lie in [1e-4, 1e-1]")
    k, l = edge
    base = np.array(c.displacements)

    def f(tau: float) -> float:
        t = base.copy()
        t[k, l] += tau
        return fidelity_report(c.with_displacements(t), p, **guards).raw

    vals = {s: f(s * h) for s in (-2, -1, -0.5, -0.25, 0, 0.25, 0.5, 1, 2)}
    f0 = vals[0]
    if abs(f0 - 1.0) > FIDELITY_SLACK:
        raise NumericalError(f"fidelity at the operating point is {f0!r}, not one")
    forward = (-3 * f0 + 4 * vals[1] - vals[2]) / (2 * h)
    backward = (3 * f0 - 4 * vals[-1] + vals[-2]) / (2 * h)
    if abs(forward - backward) > CUSP_TOLERANCE:
        raise NonSmoothError(f"one-sided derivatives disagree ({forward:.3g} vs {backward:.3g}): cusp at zero")
    central = (vals[1] - vals[-1]) / (2 * h)
    if abs(central) > FIRST_DERIVATIVE_TOLERANCE:
        raise NonSmoothError(f"first derivative {central:.3g} at zero: not a maximum")
    d = {s: (vals[s] - 2 * f0 + vals[-s]) / (s * h) ** 2 for s in (1, 0.5, 0.25)}
    # heavy-tailed packets put a |tau|^3 term into O(tau), so the second
    # difference carries an O(h) error as well as the usual O(h^2) one; the
    # three-level extrapolation removes both
    return (8 * d[0.25] - 6 * d[0.5] + d[1]) / 3


@dataclass(frozen=True)
class ScanResult:
    param: str
    params: tuple[float, ...]
    values: tuple[float, ...]

    def to_csv(self, path=None) -> str:
        lines = [f"{self.param},value"] + [f"{x!r},{v!r}" for x, v in zip(self.params, self.values)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def hom_dip_scan(packet: Wavepacket, taus: Sequence[float], eta: float = 0.5, convention: str = CONJUGATE_PHASE) -> ScanResult:
    """Coincidence probability on a beamsplitter versus the delay of the second photon."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    taus = [float(t) for t in taus]
    # warm the overlap cache in one batch
    displaced_overlap(packet, np.array(taus + [-t for t in taus] + [0.0]), convention)
    p = PhotonConfig((0, 1), packet, convention)
    values = tuple(coincidence(hom_network(eta, t), p) for t in taus)
    return ScanResult("tau", tuple(taus), values)
