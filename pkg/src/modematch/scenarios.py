"""Studies behind the command-line subcommands.

Each function returns a header and a list of rows so that the CLI, the tests
and the acceptance suite all consume the same numbers.  Randomised suites take
an explicit seed and are byte-reproducible.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np

from . import oracle
from .network import compile_network, hom_network, random_network
from .pathsum import PhotonConfig, coincidence, conditional_fidelity, expand, fidelity_curvature, inner
from .wavepacket import (
    CONJUGATE_PHASE,
    DEFAULT_POINTS,
    NATIVE_SHIFT,
    JitterModel,
    PresetSpec,
    SpectralFilter,
    Wavepacket,
    apply_filter,
    build_preset,
    curvature,
    displaced_overlap,
    reference_presets,
    jitter_kernel,
)
from .shapeopt import gaussian_distance

Table = tuple[list[str], list[list]]

FIG1_COLUMNS = ("gaussian", "lorentzian", "dsl")
CURVATURE_FILTER_WIDTH = 0.5
JITTER_FRACTIONS = (0.0, 0.05, 0.1, 0.2)
FILTER_WIDTHS = (2.0, 1.0, 0.5, 0.25)


def preset_spec(name: str) -> PresetSpec:
    """Reference presets by short name (``gaussian``, ``lorentzian``, ``dsl``) or any preset kind."""
    presets = reference_presets()
    if name in presets:
        return presets[name]
    return PresetSpec(name)


def packet(name: str, n_points: int = DEFAULT_POINTS) -> Wavepacket:
    return build_preset(preset_spec(name), n_points=n_points)


def format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_table(path, header: Sequence[str], rows: Sequence[Sequence]) -> str:
    text = ",".join(header) + "\n" + "".join(",".join(format_cell(v) for v in row) + "\n" for row in rows)
    if path is not None:
        Path(path).write_text(text)
    return text


def _random_instance(rng: np.random.Generator, max_modes: int, max_photons: int, displaced: bool = True):
    m = int(rng.integers(2, max_modes + 1))
    n = int(rng.integers(1, min(max_photons, m) + 1))
    modes = tuple(sorted(int(k) for k in rng.choice(m, n, replace=False)))
    t = rng.normal(size=(m, m)) if displaced else np.zeros((m, m))
    return compile_network(random_network(m, rng), t), modes


# ---------------------------------------------------------------------------
# dip shapes
# ---------------------------------------------------------------------------


def fig1_table(taus: Sequence[float], convention: str = CONJUGATE_PHASE, n_points: int = DEFAULT_POINTS) -> Table:
    """Balanced-beamsplitter coincidence versus delay for the three reference presets."""
    cols = []
    for name in FIG1_COLUMNS:
        w = packet(name, n_points)
        # fill the overlap cache in one batch, then run the general engine per delay
        displaced_overlap(w, np.asarray(taus, dtype=float), convention)
        p = PhotonConfig((0, 1), w, convention)
        cols.append([coincidence(hom_network(0.5, float(t)), p) for t in taus])
    rows = [[float(t), *vals] for t, *vals in zip(taus, *cols)]
    return ["tau", *FIG1_COLUMNS], rows


def fig1_ordering_violations(rows: Sequence[Sequence[float]]) -> list[float]:
    """Delays (excluding zero) where ``lorentzian > dsl > gaussian`` fails."""
    return [r[0] for r in rows if r[0] != 0 and not (r[2] > r[3] > r[1])]


# ---------------------------------------------------------------------------
# curvature proportionality
# ---------------------------------------------------------------------------


def curvature_packets(n_points: int = DEFAULT_POINTS) -> dict[str, Wavepacket]:
    presets = reference_presets()
    g = build_preset(presets["gaussian"], n_points=n_points)
    d = build_preset(presets["dsl"], n_points=n_points)
    f, _ = apply_filter(d, SpectralFilter("gaussian", CURVATURE_FILTER_WIDTH))
    return {"gaussian": g, "dsl": d, "filtered": f}


def curvature_table(
    seed: int,
    n_circuits: int = 20,
    max_modes: int = 5,
    max_photons: int = 3,
    convention: str = CONJUGATE_PHASE,
    n_points: int = DEFAULT_POINTS,
) -> Table:
    """Fidelity curvature per edge for three packet families, with the packet-curvature ratios they should follow."""
    rng = np.random.default_rng(seed)
    packets = curvature_packets(n_points)
    s = {k: curvature(w, convention) for k, w in packets.items()}
    header = [
        "circuit", "n_modes", "inputs", "k", "l",
        "fc_gaussian", "fc_dsl", "fc_filtered",
        "ratio_dsl", "expected_dsl", "ratio_filtered", "expected_filtered",
    ]
    rows = []
    for index in range(n_circuits):
        c, modes = _random_instance(rng, max_modes, max_photons, displaced=False)
        configs = {k: PhotonConfig(modes, w, convention) for k, w in packets.items()}
        for k in modes:
            for l in range(c.n_modes):
                fc = {name: fidelity_curvature(c, p, (k, l)) for name, p in configs.items()}
                rows.append([
                    index, c.n_modes, " ".join(map(str, modes)), k, l,
                    fc["gaussian"], fc["dsl"], fc["filtered"],
                    fc["dsl"] / fc["gaussian"], s["dsl"] / s["gaussian"],
                    fc["filtered"] / fc["gaussian"], s["filtered"] / s["gaussian"],
                ])
    return header, rows


def curvature_ratio_error(rows: Sequence[Sequence]) -> float:
    """Largest relative deviation between measured and expected ratios."""
    worst = 0.0
    for r in rows:
        for got, want in ((r[8], r[9]), (r[10], r[11])):
            worst = max(worst, abs(got - want) / abs(want))
    return worst


# ---------------------------------------------------------------------------
# engine versus oracles
# ---------------------------------------------------------------------------


def inner_oracle_table(seed: int, n_instances: int = 200, max_modes: int = 5, max_photons: int = 3, n_points: int = DEFAULT_POINTS) -> Table:
    rng = np.random.default_rng(seed)
    w = packet("gaussian", n_points)
    ov = oracle.packet_overlap(w)
    rows = []
    for index in range(n_instances):
        c, modes = _random_instance(rng, max_modes, max_photons)
        t_a = rng.normal(size=c.displacements.shape)
        p = PhotonConfig(modes, w)
        got = inner(expand(c.with_displacements(t_a), p), expand(c, p))
        want = oracle.product_state_inner(c, modes, ov, t_a, c.displacements)
        rows.append([index, c.n_modes, len(modes), got.real, got.imag, want.real, want.imag, abs(got - want)])
    return ["instance", "n_modes", "n_photons", "engine_re", "engine_im", "oracle_re", "oracle_im", "abs_diff"], rows


def two_photon_table(seed: int, n_instances: int = 50, convention: str = CONJUGATE_PHASE, n_points: int = DEFAULT_POINTS) -> Table:
    rng = np.random.default_rng(seed)
    packets = {name: packet(name, n_points) for name in FIG1_COLUMNS}
    rows = []
    for index in range(n_instances):
        name = FIG1_COLUMNS[int(rng.integers(len(FIG1_COLUMNS)))]
        eta = float(rng.uniform(0.0, 1.0))
        tau = float(rng.uniform(-4.0, 4.0))
        w = packets[name]
        got = coincidence(hom_network(eta, tau), PhotonConfig((0, 1), w, convention))
        want = oracle.brute_two_photon(w, eta, tau, convention)
        rows.append([index, name, eta, tau, got, want, abs(got - want)])
    return ["instance", "preset", "eta", "tau", "engine", "oracle", "abs_diff"], rows


def conditional_oracle_table(seed: int, n_instances: int = 20, n_points: int = DEFAULT_POINTS) -> Table:
    """Three-photon post-selection: engine versus explicit Fock-space projection."""
    rng = np.random.default_rng(seed)
    w = packet("gaussian", n_points)
    ov = oracle.packet_overlap(w)
    rows = []
    index = 0
    while len(rows) < n_instances:
        m = int(rng.integers(3, 6))
        c = compile_network(random_network(m, rng), rng.normal(size=(m, m)))
        modes = tuple(sorted(int(k) for k in rng.choice(m, 3, replace=False)))
        pattern = {int(rng.integers(m)): 1}
        p = PhotonConfig(modes, w)
        if oracle.ideal_pattern_probability(c, modes, pattern) < 1e-9:
            continue
        f, ps = conditional_fidelity(c, p, pattern)
        fb, pb = oracle.brute_conditional_fidelity(c, modes, ov, pattern)
        f0, p0 = conditional_fidelity(c.ideal(), p, pattern)
        closed = oracle.ideal_pattern_probability(c, modes, pattern)
        mode, count = next(iter(pattern.items()))
        rows.append([index, m, " ".join(map(str, modes)), f"{mode}:{count}", f, fb, ps, pb, f0, p0, closed])
        index += 1
    header = ["instance", "n_modes", "inputs", "pattern", "engine_f", "oracle_f", "engine_p", "oracle_p", "ideal_f", "ideal_p", "closed_p"]
    return header, rows


# ---------------------------------------------------------------------------
# jitter and filtering
# ---------------------------------------------------------------------------


def temporal_width(w: Wavepacket, convention: str = CONJUGATE_PHASE) -> float:
    """Standard deviation of the variable conjugate to the displacement's dual, i.e. the packet's duration."""
    other = NATIVE_SHIFT if convention == CONJUGATE_PHASE else CONJUGATE_PHASE
    return math.sqrt(curvature(w, other))


def jitter_study(
    presets: Sequence[str] = ("gaussian", "lorentzian"),
    fractions: Sequence[float] = JITTER_FRACTIONS,
    convention: str = CONJUGATE_PHASE,
    n_points: int = DEFAULT_POINTS,
) -> Table:
    """HOM visibility ``1 - 2 C(0)`` under gaussian emission-time jitter scaled to each packet's duration."""
    rows = []
    for name in presets:
        w = packet(name, n_points)
        width = temporal_width(w, convention)
        for frac in fractions:
            sigma = frac * width
            k = jitter_kernel(w, JitterModel("gaussian", sigma), 0.0, convention)
            c0 = 0.5 - 0.5 * k
            rows.append([name, frac, sigma, c0, 1.0 - 2.0 * c0])
    return ["preset", "fraction", "sigma", "coincidence", "visibility"], rows


def filter_study(widths: Sequence[float] = FILTER_WIDTHS, convention: str = CONJUGATE_PHASE, n_points: int = DEFAULT_POINTS) -> Table:
    """Gaussian filtering of the heralded double-sided-Lorentzian packet."""
    w = packet("dsl", n_points)
    rows = [["none", 1.0, gaussian_distance(w), curvature(w, convention)]]
    for width in widths:
        f, frac = apply_filter(w, SpectralFilter("gaussian", width))
        rows.append([width, frac, gaussian_distance(f), curvature(f, convention)])
    return ["width", "transmitted_fraction", "gaussian_distance", "curvature"], rows


def strictly_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))

