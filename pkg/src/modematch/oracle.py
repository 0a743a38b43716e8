"""Independent reference computations.

Nothing here touches the path-sum engine.  The routes are:

* exact permanents (Gray-code Ryser, plus a factorial sum for tiny cases);
* the permanent of a single-particle Gram matrix, which gives the inner
  product of two multi-photon product states directly;
* adaptive quadrature and closed forms for displaced overlaps of the presets;
* an explicit finite Fock-space construction in which every distinct displaced
  packet is embedded as a vector, so detection probabilities and post-selected
  states are computed by brute enumeration.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, GuardError
from .network import CompiledNetwork
from .wavepacket import CONJUGATE_PHASE, PresetSpec, Wavepacket, displaced_overlap

MAX_PERMANENT_DIM = 12

Overlap = Callable[[np.ndarray], np.ndarray]


def permanent(m) -> complex:
    """Exact permanent by Ryser's formula, visiting column subsets in Gray-code order."""
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError("permanent needs a square matrix")
    if n > MAX_PERMANENT_DIM:
        raise GuardError(f"permanent dimension {n} exceeds the cap of {MAX_PERMANENT_DIM}")
    if n == 0:
        return 1.0 + 0j
    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    in_set = np.zeros(n, dtype=bool)
    size = 0
    for k in range(1, 1 << n):
        col = (k & -k).bit_length() - 1
        if in_set[col]:
            row_sums -= m[:, col]
            size -= 1
        else:
            row_sums += m[:, col]
            size += 1
        in_set[col] = not in_set[col]
        term = np.prod(row_sums)
        total += -term if size % 2 else term
    return complex((-1) ** n * total)


def permanent_naive(m) -> complex:
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    return complex(sum(np.prod(m[np.arange(n), list(p)]) for p in itertools.permutations(range(n))))


# ---------------------------------------------------------------------------
# overlaps
# ---------------------------------------------------------------------------


def packet_overlap(packet: Wavepacket, convention: str = CONJUGATE_PHASE) -> Overlap:
    return lambda taus: displaced_overlap(packet, np.asarray(taus, dtype=float), convention)


def analytic_overlap(spec: PresetSpec, tau, convention: str = CONJUGATE_PHASE):
    """Closed-form ``O(tau)`` for the gaussian, lorentzian and double_lorentzian presets."""
    tau = np.asarray(tau, dtype=float)
    s = spec.scale
    # dilating x by s maps O(tau) -> O(s tau) (phase) or O(tau / s) (shift)
    t = tau * s if convention == CONJUGATE_PHASE else tau / s
    r2 = math.sqrt(2.0)
    if spec.kind == "gaussian":
        out = np.exp(-t * t / 8.0) if convention == CONJUGATE_PHASE else np.exp(-t * t / 2.0)
    elif spec.kind == "lorentzian":
        out = np.exp(-np.abs(t) / r2) if convention == CONJUGATE_PHASE else 1.0 / (1.0 - 1j * t / r2)
    elif spec.kind == "double_lorentzian":
        if convention == CONJUGATE_PHASE:
            a = np.abs(t) / r2
            out = (1.0 + a) * np.exp(-a)
        else:
            out = 1.0 / (1.0 + t * t / 2.0)
    else:
        raise ValueError(f"no closed form for the {spec.kind} preset")
    out = np.asarray(out, dtype=complex)
    return complex(out) if out.ndim == 0 else out


def _support(spec: PresetSpec) -> tuple[float, float]:
    if spec.kind == "rectangular":
        return -spec.scale, spec.scale
    if spec.kind == "one_sided_exponential":
        return 0.0, math.inf
    return -math.inf, math.inf


def adaptive_overlap(spec: PresetSpec, tau: float, convention: str = CONJUGATE_PHASE) -> complex:
    """``O(tau)`` by adaptive quadrature on the closed-form amplitude (relative error ~1e-10)."""
    amp = lambda x: complex(spec.amplitude(np.array([x]))[0])
    dens = lambda x: abs(amp(x)) ** 2
    lo, hi = _support(spec)
    opts = dict(limit=800, epsabs=1e-14, epsrel=1e-12)

    def quad(f, a, b, **kw):
        value, err = integrate.quad(f, a, b, **{**opts, **kw})
        if not np.isfinite(value):
            raise ConvergenceError("quadrature did not converge")
        return value

    if convention == CONJUGATE_PHASE:
        if tau == 0:
            return complex(_split_quad(quad, dens, lo, hi), 0.0)
        w = abs(tau)
        even = lambda x: dens(x) + dens(-x)
        odd = lambda x: dens(x) - dens(-x)
        top = max(abs(lo), abs(hi))
        if math.isinf(top):
            top = _tail_cutoff(dens)
        re = quad(even, 0.0, top, weight="cos", wvar=w)
        im = quad(odd, 0.0, top, weight="sin", wvar=w)
        if top >= _FOURIER_TAIL:
            # slowly decaying tail: Fourier-integral rule on [top, inf)
            re += quad(even, top, math.inf, weight="cos", wvar=w)
            im += quad(odd, top, math.inf, weight="sin", wvar=w)
        return complex(re, -math.copysign(1.0, tau) * im)
    # native shift: integral psi*(x) psi(x - tau) dx over the intersection of supports
    a = max(lo, lo + tau)
    b = min(hi, hi + tau)
    if a >= b:
        return 0j
    f = lambda x: np.conj(amp(x)) * amp(x - tau)
    re = _split_quad(quad, lambda x: f(x).real, a, b, extra=(0.0, tau))
    im = _split_quad(quad, lambda x: f(x).imag, a, b, extra=(0.0, tau))
    return complex(re, im)


_FOURIER_TAIL = 1024.0


def _tail_cutoff(dens) -> float:
    """Half-width beyond which the density is negligible, capped at the Fourier-tail switch."""
    peak = max(dens(0.0), 1e-300)
    x = 1.0
    while x < _FOURIER_TAIL and dens(x) + dens(-x) > 1e-30 * peak:
        x *= 2.0
    return x


def _split_quad(quad, f, a, b, extra=(0.0,)) -> float:
    """Integrate over ``[a, b]`` split at the interior points in ``extra``."""
    cuts = sorted({a, b, *[c for c in extra if a < c < b]})
    return sum(quad(f, lo, hi) for lo, hi in zip(cuts[:-1], cuts[1:]))


# ---------------------------------------------------------------------------
# product-state inner products
# ---------------------------------------------------------------------------


def gram_matrix(c: CompiledNetwork, input_modes: Sequence[int], overlap: Overlap, t_a, t_b) -> np.ndarray:
    """``M[j, j'] = sum_i conj(U[i, k_j]) U[i, k_j'] O(T_B[k_j', i] - T_A[k_j, i])``."""
    u = c.unitary
    t_a = np.asarray(t_a, dtype=float)
    t_b = np.asarray(t_b, dtype=float)
    ks = list(input_modes)
    n = len(ks)
    m = np.zeros((n, n), dtype=complex)
    for j, kj in enumerate(ks):
        for jp, kp in enumerate(ks):
            o = np.asarray(overlap(t_b[kp, :] - t_a[kj, :]))
            m[j, jp] = np.sum(np.conj(u[:, kj]) * u[:, kp] * o)
    return m


def product_state_inner(c: CompiledNetwork, input_modes: Sequence[int], overlap: Overlap, t_a, t_b) -> complex:
    """``<A|B>`` for the photons of ``input_modes`` sent through ``c`` with displacements ``T_A`` and ``T_B``."""
    if len(input_modes) > 8:
        raise GuardError("product_state_inner is limited to 8 photons")
    return permanent(gram_matrix(c, input_modes, overlap, t_a, t_b))


def two_photon_coincidence(overlap_value: complex, eta: float) -> float:
    """Coincidence probability from the explicit four-term expansion of two photons on a beamsplitter.

    ``overlap_value`` is ``<psi | psi_tau>`` between the photon in input 0 and the
    delayed photon in input 1.
    """
    r, t = math.sqrt(eta), math.sqrt(1.0 - eta)
    u = np.array([[r, t], [-t, r]])
    # amplitude[i, j]: photon from input 0 leaves in i, photon from input 1 leaves in j
    amp = {(i, j): u[i, 0] * u[j, 1] for i in (0, 1) for j in (0, 1)}
    o = complex(overlap_value)
    # coincidence components: |psi>_0 |psi_tau>_1 (weight amp[0,1]) and |psi_tau>_0 |psi>_1 (weight amp[1,0])
    a, b = amp[(0, 1)], amp[(1, 0)]
    return float(abs(a) ** 2 + abs(b) ** 2 + 2.0 * (np.conj(a) * b * o * np.conj(o)).real)


def brute_two_photon(packet, eta: float, tau: float, convention: str = CONJUGATE_PHASE) -> float:
    """Two-photon coincidence for a sampled packet (grid overlap) or a preset (quadrature overlap)."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    if isinstance(packet, PresetSpec):
        o = adaptive_overlap(packet, tau, convention)
    else:
        o = complex(displaced_overlap(packet, tau, convention))
    return two_photon_coincidence(o, eta)


def ideal_pattern_probability(c: CompiledNetwork, input_modes: Sequence[int], pattern: Mapping[int, int]) -> float:
    """Probability of a detection pattern for identical photons: ``sum |perm(U_S)|^2 / prod s!`` over outputs."""
    u = c.unitary
    n = len(input_modes)
    total = 0.0
    for outputs in itertools.combinations_with_replacement(range(u.shape[0]), n):
        occ = [outputs.count(m) for m in range(u.shape[0])]
        if any(occ[m] != v for m, v in pattern.items()):
            continue
        sub = u[np.ix_(list(outputs), list(input_modes))]
        total += abs(permanent(sub)) ** 2 / math.prod(math.factorial(k) for k in occ)
    return float(total)


# ---------------------------------------------------------------------------
# explicit Fock space
# ---------------------------------------------------------------------------


def embed_packets(taus: Sequence[float], overlap: Overlap) -> dict[float, np.ndarray]:
    """Vectors ``v_tau`` with ``<v_a, v_b> = O(b - a)`` for every pair of listed displacements."""
    taus = sorted(set(float(t) for t in taus))
    diff = np.subtract.outer(taus, taus)  # diff[a, b] = tau_a - tau_b
    gram = np.asarray(overlap((-diff).ravel())).reshape(diff.shape)
    gram = 0.5 * (gram + gram.conj().T)
    vals, vecs = np.linalg.eigh(gram)
    keep = vals > 1e-15 * vals.max()
    vals, vecs = vals[keep], vecs[:, keep]
    # column b of sqrt(L) V^dagger
    w = np.sqrt(vals)[:, None] * vecs.conj().T
    return {t: w[:, b] for b, t in enumerate(taus)}


FockState = dict


def fock_state(c: CompiledNetwork, input_modes: Sequence[int], displacements, embedding: Mapping[float, np.ndarray]) -> FockState:
    """Normalised-Fock-basis amplitudes of the output state.

    Basis keys are sorted tuples of (spatial mode, internal mode) pairs.
    """
    u = c.unitary
    t = np.asarray(displacements, dtype=float)
    state: dict[tuple, complex] = {(): 1.0 + 0j}
    for k in input_modes:
        single: dict[tuple[int, int], complex] = defaultdict(complex)
        for i in range(u.shape[0]):
            if u[i, k] == 0:
                continue
            vec = embedding[float(t[k, i])]
            for q, amp in enumerate(vec):
                if amp != 0:
                    single[(i, q)] += u[i, k] * amp
        nxt: dict[tuple, complex] = defaultdict(complex)
        for key, amp in state.items():
            for mode, coef in single.items():
                occupied = key.count(mode)
                new_key = tuple(sorted(key + (mode,)))
                nxt[new_key] += amp * coef * math.sqrt(occupied + 1)
        state = dict(nxt)
    return state


def _counts(key: tuple, modes: Sequence[int]) -> tuple[int, ...]:
    return tuple(sum(1 for (i, _) in key if i == m) for m in modes)


def brute_inner(c: CompiledNetwork, input_modes, overlap: Overlap, t_a, t_b) -> complex:
    t_a = np.asarray(t_a, dtype=float)
    t_b = np.asarray(t_b, dtype=float)
    emb = embed_packets(np.concatenate([t_a.ravel(), t_b.ravel()]), overlap)
    a = fock_state(c, input_modes, t_a, emb)
    b = fock_state(c, input_modes, t_b, emb)
    return complex(sum(np.conj(a[k]) * v for k, v in b.items() if k in a))


def brute_detection_prob(c: CompiledNetwork, input_modes, overlap: Overlap, pattern: Mapping[int, int]) -> float:
    t = np.asarray(c.displacements)
    emb = embed_packets(list(t.ravel()) + [0.0], overlap)
    state = fock_state(c, input_modes, t, emb)
    modes = sorted(pattern)
    want = tuple(pattern[m] for m in modes)
    return float(sum(abs(v) ** 2 for k, v in state.items() if _counts(k, modes) == want))


def brute_conditional_fidelity(
    c: CompiledNetwork, input_modes, overlap: Overlap, pattern: Mapping[int, int]
) -> tuple[float, float]:
    """Post-selected fidelity by explicit projection and partial trace.

    The conditional state on the undetected modes is ``sum_d |psi_d><psi_d|``,
    one branch per basis configuration ``d`` of the detected modes.
    """
    t = np.asarray(c.displacements, dtype=float)
    emb = embed_packets(list(t.ravel()) + [0.0], overlap)
    detected = sorted(pattern)
    want = tuple(pattern[m] for m in detected)

    def branches(state: FockState) -> dict[tuple, dict[tuple, complex]]:
        out: dict[tuple, dict[tuple, complex]] = defaultdict(dict)
        for key, amp in state.items():
            if _counts(key, detected) != want:
                continue
            d_part = tuple(p for p in key if p[0] in pattern)
            u_part = tuple(p for p in key if p[0] not in pattern)
            out[d_part][u_part] = out[d_part].get(u_part, 0j) + amp
        return out

    ideal = branches(fock_state(c, input_modes, np.zeros_like(t), emb))
    actual = branches(fock_state(c, input_modes, t, emb))
    norms = {d: math.sqrt(sum(abs(a) ** 2 for a in vec.values())) for d, vec in ideal.items()}
    if not norms or max(norms.values()) < 1e-12:
        raise ValueError("the ideal circuit never produces this pattern")
    best = max(norms, key=norms.get)
    ref = {k: a / norms[best] for k, a in ideal[best].items()}
    p_success = sum(abs(a) ** 2 for vec in actual.values() for a in vec.values())
    overlap_sq = sum(abs(sum(np.conj(ref[k]) * a for k, a in vec.items() if k in ref)) ** 2 for vec in actual.values())
    return float(overlap_sq / p_success), float(p_success)
