"""Linear optical networks: element lists, compilation to a mode unitary, displacement matrices.

Beamsplitters follow the phase-asymmetric convention::

    a_out =  sqrt(eta) a + sqrt(1 - eta) b
    b_out =  sqrt(eta) b - sqrt(1 - eta) a

``U[i, k]`` is the amplitude for a photon entering mode ``k`` to leave in mode
``i``.  Elements are applied in list order (the first element acts first), so
``U = M_last @ ... @ M_first``.

Network files are JSON::

    {"n_modes": 2,
     "elements": [{"type": "bs", "a": 0, "b": 1, "eta": 0.5},
                  {"type": "ps", "mode": 1, "angle": 0.3}],
     "displacements": [[0, 0], [0.5, 0.5]]}

``displacements[k][l]`` is the cumulative displacement picked up between input
``k`` and output ``l``; it is optional and defaults to zeros.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import NumericalError

UNITARITY_TOLERANCE = 1e-10


@dataclass(frozen=True)
class BeamSplitter:
    a: int
    b: int
    eta: float

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("beamsplitter needs two distinct modes")
        if min(self.a, self.b) < 0:
            raise ValueError("mode indices must be non-negative")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"reflectivity eta={self.eta} outside [0, 1]")

    def modes(self) -> tuple[int, ...]:
        return (self.a, self.b)

    def block(self) -> np.ndarray:
        r = math.sqrt(self.eta)
        t = math.sqrt(1.0 - self.eta)
        return np.array([[r, t], [-t, r]], dtype=complex)


@dataclass(frozen=True)
class PhaseShift:
    mode: int
    angle: float

    def __post_init__(self):
        if self.mode < 0:
            raise ValueError("mode indices must be non-negative")

    def modes(self) -> tuple[int, ...]:
        return (self.mode,)


Element = Union[BeamSplitter, PhaseShift]


@dataclass(frozen=True)
class Network:
    n_modes: int
    elements: tuple[Element, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("a network needs at least one mode")
        object.__setattr__(self, "elements", tuple(self.elements))
        for el in self.elements:
            if max(el.modes()) >= self.n_modes:
                raise ValueError(f"{el} addresses a mode outside 0..{self.n_modes - 1}")


@dataclass(frozen=True, eq=False)
class CompiledNetwork:
    unitary: np.ndarray
    displacements: np.ndarray

    def __post_init__(self):
        u = np.array(self.unitary, dtype=complex)
        t = np.array(self.displacements, dtype=float)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise ValueError("unitary must be square")
        if t.shape != u.shape:
            raise ValueError(f"displacement matrix shape {t.shape} does not match {u.shape}")
        if not np.all(np.isfinite(t)):
            raise ValueError("displacements must be finite")
        u.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "unitary", u)
        object.__setattr__(self, "displacements", t)

    @property
    def n_modes(self) -> int:
        return self.unitary.shape[0]

    def with_displacements(self, displacements) -> "CompiledNetwork":
        return CompiledNetwork(self.unitary, displacements)

    def ideal(self) -> "CompiledNetwork":
        return CompiledNetwork(self.unitary, np.zeros_like(self.displacements))


def element_matrix(el: Element, n_modes: int) -> np.ndarray:
    m = np.eye(n_modes, dtype=complex)
    if isinstance(el, BeamSplitter):
        idx = np.ix_([el.a, el.b], [el.a, el.b])
        m[idx] = el.block()
    else:
        m[el.mode, el.mode] = np.exp(1j * el.angle)
    return m


def validate_unitarity(c: CompiledNetwork | np.ndarray) -> float:
    """``max |U^dagger U - I|``."""
    u = c.unitary if isinstance(c, CompiledNetwork) else np.asarray(c)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def compile_network(net: Network, displacements=None) -> CompiledNetwork:
    n = net.n_modes
    u = np.eye(n, dtype=complex)
    for el in net.elements:
        u = element_matrix(el, n) @ u
    if displacements is None:
        displacements = np.zeros((n, n))
    displacements = np.asarray(displacements, dtype=float)
    if displacements.shape != (n, n):
        raise ValueError(f"displacement matrix must be {n}x{n}, got {displacements.shape}")
    deviation = validate_unitarity(u)
    if deviation > UNITARITY_TOLERANCE:
        raise NumericalError(f"compiled matrix is not unitary (deviation {deviation:.3g})")
    return CompiledNetwork(u, displacements)


def beamsplitter_network(eta: float = 0.5) -> Network:
    return Network(2, (BeamSplitter(0, 1, eta),))


def hom_network(eta: float = 0.5, tau: float = 0.0) -> CompiledNetwork:
    """Two-mode beamsplitter with input 1 delayed by ``tau`` on both of its paths."""
    return compile_network(beamsplitter_network(eta), [[0.0, 0.0], [tau, tau]])


def random_network(n_modes: int, rng: np.random.Generator, depth: int | None = None) -> Network:
    """Brick-wall of beamsplitters with random reflectivities, each followed by a random phase."""
    depth = n_modes if depth is None else depth
    elements: list[Element] = [PhaseShift(m, rng.uniform(0, 2 * math.pi)) for m in range(n_modes)]
    for layer in range(depth):
        for a in range(layer % 2, n_modes - 1, 2):
            elements.append(BeamSplitter(a, a + 1, float(rng.uniform(0.05, 0.95))))
            elements.append(PhaseShift(a, float(rng.uniform(0, 2 * math.pi))))
    if n_modes == 1:
        elements.append(PhaseShift(0, float(rng.uniform(0, 2 * math.pi))))
    return Network(n_modes, tuple(elements))


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def _element_from_json(obj: dict) -> Element:
    kind = obj.get("type")
    try:
        if kind == "bs":
            return BeamSplitter(int(obj["a"]), int(obj["b"]), float(obj["eta"]))
        if kind == "ps":
            return PhaseShift(int(obj["mode"]), float(obj["angle"]))
    except KeyError as exc:
        raise ValueError(f"element {obj} is missing field {exc}") from None
    raise ValueError(f"unknown element type {kind!r}")


def network_from_dict(data: dict) -> tuple[Network, np.ndarray | None]:
    if "n_modes" not in data or "elements" not in data:
        raise ValueError("network description needs 'n_modes' and 'elements'")
    net = Network(int(data["n_modes"]), tuple(_element_from_json(e) for e in data["elements"]))
    t = data.get("displacements")
    if t is not None:
        t = np.asarray(t, dtype=float)
        if t.shape != (net.n_modes, net.n_modes):
            raise ValueError(f"displacements must be {net.n_modes}x{net.n_modes}")
    return net, t


def network_to_dict(net: Network, displacements=None) -> dict:
    elements = []
    for el in net.elements:
        if isinstance(el, BeamSplitter):
            elements.append({"type": "bs", "a": el.a, "b": el.b, "eta": el.eta})
        else:
            elements.append({"type": "ps", "mode": el.mode, "angle": el.angle})
    out = {"n_modes": net.n_modes, "elements": elements}
    if displacements is not None:
        out["displacements"] = np.asarray(displacements, dtype=float).tolist()
    return out


def load_network(path) -> tuple[Network, np.ndarray | None]:
    with Path(path).open() as fh:
        return network_from_dict(json.load(fh))


def save_network(path, net: Network, displacements=None) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net, displacements), indent=2) + "\n")


def load_compiled(path) -> CompiledNetwork:
    net, t = load_network(path)
    return compile_network(net, t)


def permutation_network(perm: Sequence[int]) -> CompiledNetwork:
    """Unitary sending input ``k`` to output ``perm[k]``."""
    n = len(perm)
    u = np.zeros((n, n), dtype=complex)
    for k, l in enumerate(perm):
        u[l, k] = 1.0
    return CompiledNetwork(u, np.zeros((n, n)))
