import math

import numpy as np
import pytest

from modematch import oracle
from modematch import pathsum as ps
from modematch import wavepacket as wp
from modematch.errors import GuardError, NonSmoothError, NullEventError, NumericalError
from modematch.network import CompiledNetwork, compile_network, hom_network, permutation_network, random_network


def _hom_state(packet, tau, eta=0.5):
    return ps.expand(hom_network(eta, tau), ps.PhotonConfig((0, 1), packet))


def test_expand_hom_terms(gaussian):
    s = _hom_state(gaussian, 0.4)
    assert len(s.terms) == 4
    by_assignment = {t.assignment: t for t in s.terms}
    assert by_assignment[(0, 1)].amplitude == pytest.approx(0.5)
    assert by_assignment[(1, 0)].amplitude == pytest.approx(-0.5)
    assert by_assignment[(1, 1)].displacements == (0.0, 0.4)
    assert set(s.components) == {(2, 0), (1, 1), (0, 2)}
    assert len(s.components[(1, 1)]) == 2


def test_expand_merges_commuting_terms(gaussian):
    # without a delay the two coincidence paths are the same vector and cancel
    s = _hom_state(gaussian, 0.0)
    assert s.components[(1, 1)] == {((0.0,), (0.0,)): pytest.approx(0.0)}


def test_expand_skips_zero_routes(gaussian):
    c = permutation_network([1, 2, 0])
    s = ps.expand(c, ps.PhotonConfig((0, 2), gaussian))
    assert [t.assignment for t in s.terms] == [(1, 0)]


def test_guards(gaussian):
    with pytest.raises(GuardError):
        ps.expand(permutation_network(list(range(7))), ps.PhotonConfig(tuple(range(7)), gaussian))
    with pytest.raises(GuardError):
        ps.expand(permutation_network(list(range(11))), ps.PhotonConfig((0,), gaussian))
    s = ps.expand(permutation_network(list(range(11))), ps.PhotonConfig((0,), gaussian), max_modes=11)
    assert ps.norm_check(s) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ps.expand(hom_network(), ps.PhotonConfig((2,), gaussian))


def test_photon_config_validation(gaussian):
    with pytest.raises(ValueError):
        ps.PhotonConfig((), gaussian)
    with pytest.raises(ValueError):
        ps.PhotonConfig((0, 0), gaussian)
    with pytest.raises(ValueError):
        ps.PhotonConfig((0,), gaussian, "sideways")
    with pytest.raises(ValueError):
        ps.PhotonConfig((0,), gaussian.with_samples(2 * gaussian.samples))


def test_inner_properties(dsl):
    rng = np.random.default_rng(11)
    for _ in range(10):
        m = int(rng.integers(2, 5))
        c = compile_network(random_network(m, rng))
        modes = tuple(range(min(m, 3)))
        p = ps.PhotonConfig(modes, dsl)
        a = ps.expand(c.with_displacements(rng.normal(size=(m, m))), p)
        b = ps.expand(c.with_displacements(rng.normal(size=(m, m))), p)
        assert abs(ps.inner(a, b) - np.conj(ps.inner(b, a))) < 1e-12
        assert abs(ps.inner(a, b)) ** 2 <= ps.norm_check(a) * ps.norm_check(b) + 1e-12
        assert abs(ps.norm_check(ps.expand(c, p)) - 1) < 1e-12


def test_inner_rejects_incompatible_states(gaussian, dsl):
    a = _hom_state(gaussian, 0.1)
    with pytest.raises(ValueError):
        ps.inner(a, _hom_state(dsl, 0.1))
    with pytest.raises(ValueError):
        ps.inner(a, ps.expand(hom_network(), ps.PhotonConfig((0,), gaussian)))


def test_input_uniform_delays_preserve_norm(gaussian):
    rng = np.random.default_rng(2)
    c = compile_network(random_network(4, rng))
    t = np.repeat(rng.normal(size=(4, 1)), 4, axis=1)
    s = ps.expand(c.with_displacements(t), ps.PhotonConfig((0, 1, 2), gaussian))
    assert abs(ps.norm_check(s) - 1) < 1e-12


def test_single_edge_delay_breaks_norm(gaussian):
    c = compile_network(random_network(3, np.random.default_rng(0)))
    t = np.zeros((3, 3))
    t[0, 1] = 1.0
    rep = ps.fidelity_report(c.with_displacements(t), ps.PhotonConfig((0, 1), gaussian))
    assert abs(rep.norm_check - 1) > 1e-4
    norm = ps.fidelity_report(c.with_displacements(t), ps.PhotonConfig((0, 1), gaussian), normalized=True)
    assert norm.fidelity == pytest.approx(rep.raw / rep.norm_check)


@pytest.mark.parametrize("name", ["gaussian", "lorentzian", "dsl"])
def test_hom_fidelity_is_squared_overlap(request, name):
    w = request.getfixturevalue(name)
    p = ps.PhotonConfig((0, 1), w)
    for tau in (0.0, 0.3, -1.5):
        f = ps.fidelity(hom_network(0.5, tau), p)
        assert f == pytest.approx(abs(wp.displaced_overlap(w, tau)) ** 2, abs=1e-12)


def test_constant_displacement_invariance(gaussian):
    rng = np.random.default_rng(8)
    c = compile_network(random_network(3, rng), rng.normal(size=(3, 3)))
    p = ps.PhotonConfig((0, 2), gaussian)
    a, b = ps.expand(c, p), ps.expand(c.with_displacements(c.displacements + 0.7), p)
    # shifting every path of both states leaves their inner product alone
    ideal = ps.expand(c.ideal(), p)
    ideal_shifted = ps.expand(c.ideal().with_displacements(np.full((3, 3), 0.7)), p)
    assert abs(ps.inner(ideal, a) - ps.inner(ideal_shifted, b)) < 1e-12
    # shifting only one undisplaced state multiplies the overlap by O(c)^n
    o = complex(wp.displaced_overlap(gaussian, 0.7))
    assert abs(ps.inner(ideal, ideal_shifted) - o**2) < 1e-12


def test_per_input_constant_displacement_fidelity(gaussian):
    rng = np.random.default_rng(6)
    c = compile_network(random_network(4, rng))
    shifts = np.array([0.3, -0.8, 0.0, 1.1])
    t = np.repeat(shifts[:, None], 4, axis=1)
    modes = (0, 1, 3)
    f = ps.fidelity(c.with_displacements(t), ps.PhotonConfig(modes, gaussian))
    want = math.prod(abs(complex(wp.displaced_overlap(gaussian, shifts[k]))) ** 2 for k in modes)
    assert f == pytest.approx(want, abs=1e-12)


def test_unphysical_fidelity_rejected(monkeypatch, gaussian):
    monkeypatch.setattr(ps, "norm_check", lambda s: 1.0)
    monkeypatch.setattr(ps, "inner", lambda a, b: 1.01 + 0j)
    with pytest.raises(NumericalError):
        ps.fidelity(hom_network(), ps.PhotonConfig((0, 1), gaussian))


def test_detection_probabilities_sum_to_norm(dsl):
    rng = np.random.default_rng(12)
    c = compile_network(random_network(3, rng), rng.normal(size=(3, 3)) * 0.3)
    s = ps.expand(c, ps.PhotonConfig((0, 1, 2), dsl))
    total = sum(ps.detection_prob(s, {0: a, 1: b}) for a in range(4) for b in range(4 - a))
    assert total == pytest.approx(ps.norm_check(s), abs=1e-12)
    assert ps.detection_prob(s, {}) == pytest.approx(min(ps.norm_check(s), 1.0), abs=1e-12)


def test_detection_matches_fock_space(gaussian):
    rng = np.random.default_rng(13)
    ov = oracle.packet_overlap(gaussian)
    for _ in range(5):
        c = compile_network(random_network(3, rng), rng.normal(size=(3, 3)) * 0.3)
        s = ps.expand(c, ps.PhotonConfig((0, 1), gaussian))
        for pattern in ({0: 1}, {1: 2}, {0: 1, 2: 1}):
            want = min(oracle.brute_detection_prob(c, (0, 1), ov, pattern), 1.0)
            assert ps.detection_prob(s, pattern) == pytest.approx(want, abs=1e-12)


def test_pattern_validation(gaussian):
    s = _hom_state(gaussian, 0.1)
    for bad in ({2: 1}, {0: -1}, {0: 2, 1: 1}):
        with pytest.raises(ValueError):
            ps.detection_prob(s, bad)


def test_coincidence_closed_form(dsl):
    for eta, tau in ((0.5, 0.0), (0.5, 1.3), (0.2, -0.6)):
        got = ps.coincidence(hom_network(eta, tau), ps.PhotonConfig((0, 1), dsl))
        o = complex(wp.displaced_overlap(dsl, tau))
        want = eta**2 + (1 - eta) ** 2 - 2 * eta * (1 - eta) * abs(o) ** 2
        assert got == pytest.approx(want, abs=1e-12)


def test_conditional_fidelity_ideal(gaussian):
    rng = np.random.default_rng(21)
    c = compile_network(random_network(4, rng))
    p = ps.PhotonConfig((0, 1, 2), gaussian)
    f, prob = ps.conditional_fidelity(c, p, {3: 1})
    assert f == pytest.approx(1.0, abs=1e-12)
    assert prob == pytest.approx(oracle.ideal_pattern_probability(c, (0, 1, 2), {3: 1}), abs=1e-12)


def test_conditional_fidelity_matches_fock_space(gaussian):
    rng = np.random.default_rng(22)
    ov = oracle.packet_overlap(gaussian)
    c = compile_network(random_network(4, rng), rng.normal(size=(4, 4)))
    p = ps.PhotonConfig((0, 1, 3), gaussian)
    for pattern in ({2: 1}, {0: 0, 1: 1}):
        f, prob = ps.conditional_fidelity(c, p, pattern)
        fb, pb = oracle.brute_conditional_fidelity(c, (0, 1, 3), ov, pattern)
        assert f == pytest.approx(fb, abs=1e-10)
        assert prob == pytest.approx(pb, abs=1e-12)


def test_conditional_fidelity_errors(gaussian):
    p = ps.PhotonConfig((0, 1), gaussian)
    with pytest.raises(ValueError):
        ps.conditional_fidelity(hom_network(), p, {0: 1, 1: 1})
    # an ideal balanced splitter never puts exactly one photon in output 0
    with pytest.raises(NullEventError):
        ps.conditional_fidelity(hom_network(), p, {0: 1})


def _extended(u1, det_mode, u2, shift_in, shift_out):
    """Flattened two-stage circuit: the detected mode is swapped into an ancilla before the second block."""
    m = u1.shape[0]
    big1 = np.eye(m + 1, dtype=complex)
    big1[:m, :m] = u1
    swap = np.eye(m + 1)
    swap[[det_mode, m]] = swap[[m, det_mode]]
    big2 = np.eye(m + 1, dtype=complex)
    big2[:m, :m] = u2
    t = np.zeros((m + 1, m + 1))
    t[:m, :m] = shift_in[:, None] + shift_out[None, :]
    t[:m, m] = shift_in
    return CompiledNetwork(big2 @ swap @ big1, t)


def test_feedforward_matches_flattened_circuit(gaussian):
    rng = np.random.default_rng(31)
    m = 3
    u1 = compile_network(random_network(m, rng)).unitary
    u2 = compile_network(random_network(m, rng)).unitary
    # path-independent displacements so that the flattened circuit can carry them
    a, b = rng.normal(size=m) * 0.4, rng.normal(size=m) * 0.4
    first = ps.Block(CompiledNetwork(u1, np.repeat(a[:, None], m, axis=1)), detected=(2,))
    second = ps.Block(CompiledNetwork(u2, np.repeat(b[None, :], m, axis=0)))
    modes = (0, 1, 2)
    p = ps.PhotonConfig(modes, gaussian)
    router = {(k,): 1 for k in range(4)}
    got = ps.feedforward_fidelity([first, second], router, p)
    flat = _extended(u1, 2, u2, a, b)
    want = 0.0
    for k in range(3):
        try:
            f, prob = ps.conditional_fidelity(flat, p, {m: k})
        except NullEventError:
            continue
        want += f * prob
    # all photons detected: the conditional state is the vacuum
    want += ps.detection_prob(ps.expand(flat, p), {m: 3})
    assert got == pytest.approx(want, abs=1e-12)
    assert 0 < got < 1


def test_feedforward_without_displacement_is_perfect(gaussian):
    rng = np.random.default_rng(32)
    first = ps.Block(compile_network(random_network(3, rng)), detected=(0,))
    blocks = [first, ps.Block(compile_network(random_network(3, rng))), ps.Block(compile_network(random_network(3, rng)))]
    router = {(0,): 1, (1,): 2, (2,): 1}
    assert ps.feedforward_fidelity(blocks, router, ps.PhotonConfig((0, 1), gaussian)) == pytest.approx(1.0, abs=1e-12)


def test_feedforward_single_block_is_plain_fidelity(gaussian):
    c = hom_network(0.5, 0.9)
    p = ps.PhotonConfig((0, 1), gaussian)
    assert ps.feedforward_fidelity([ps.Block(c)], {}, p) == pytest.approx(ps.fidelity(c, p))


def test_feedforward_routing_errors(gaussian):
    rng = np.random.default_rng(33)
    first = ps.Block(compile_network(random_network(3, rng)), detected=(0,))
    second = ps.Block(compile_network(random_network(3, rng)))
    p = ps.PhotonConfig((0, 1), gaussian)
    with pytest.raises(ValueError):
        ps.feedforward_fidelity([first, second], {(0,): 1}, p)
    with pytest.raises(ValueError):
        ps.feedforward_fidelity([first, second], {(k,): 0 for k in range(3)}, p)
    with pytest.raises(ValueError):
        ps.feedforward_fidelity([], {}, p)
    with pytest.raises(ValueError):
        ps.Block(first.network, detected=(5,))


def test_curvature_single_photon(gaussian, dsl):
    c = compile_network(random_network(1, np.random.default_rng(0)))
    for w in (gaussian, dsl):
        fc = ps.fidelity_curvature(c, ps.PhotonConfig((0,), w), (0, 0))
        assert fc == pytest.approx(-2 * wp.curvature(w), rel=1e-3)


def test_curvature_cusp_detected(lorentzian):
    c = compile_network(random_network(1, np.random.default_rng(0)))
    with pytest.raises(NonSmoothError):
        ps.fidelity_curvature(c, ps.PhotonConfig((0,), lorentzian), (0, 0))


def test_curvature_needs_ideal_operating_point(gaussian):
    c = hom_network(0.5, 0.5)
    with pytest.raises(NumericalError):
        ps.fidelity_curvature(c, ps.PhotonConfig((0, 1), gaussian), (0, 0))
    with pytest.raises(ValueError):
        ps.fidelity_curvature(c.ideal(), ps.PhotonConfig((0, 1), gaussian), (0, 0), h=1.0)


def test_hom_scan_shapes(gaussian, lorentzian, dsl):
    taus = np.geomspace(1e-3, 1e-2, 6)
    lin = np.array(ps.hom_dip_scan(lorentzian, taus).values) / taus
    assert np.ptp(lin) / lin.mean() < 0.02
    for w in (gaussian, dsl):
        quad = np.array(ps.hom_dip_scan(w, taus).values) / taus**2
        assert np.ptp(quad) / quad.mean() < 0.02
    with pytest.raises(ValueError):
        ps.hom_dip_scan(gaussian, taus, eta=2.0)


def test_scan_csv(tmp_path, gaussian):
    scan = ps.hom_dip_scan(gaussian, [0.0, 0.5])
    path = tmp_path / "scan.csv"
    text = scan.to_csv(path)
    assert path.read_text() == text
    assert text.splitlines()[0] == "tau,value"
    assert text.splitlines()[1] == f"0.0,{scan.values[0]!r}"


def test_conditional_fidelity_detected_mode_displacement():
    rect = wp.build_preset(wp.PresetSpec("rectangular"))
    rng = np.random.default_rng(23)
    c = compile_network(random_network(3, rng))
    p = ps.PhotonConfig((0, 1), rect, wp.NATIVE_SHIFT)
    ideal_f, ideal_p = ps.conditional_fidelity(c, p, {2: 1})
    # every path into the detected mode shifted to disjoint support: the heralded
    # photon is relabelled but carries no which-path information
    t = np.zeros((3, 3))
    t[:, 2] = 3.0
    f, prob = ps.conditional_fidelity(c.with_displacements(t), p, {2: 1})
    # band-limited shifting of the hard edges leaves a little ringing
    assert abs(complex(wp.displaced_overlap(rect, 3.0, wp.NATIVE_SHIFT))) < 1e-4
    assert f == pytest.approx(1.0, abs=1e-9)
    assert prob == pytest.approx(ideal_p, abs=1e-12)
    # shifting only one input's path into it marks which photon was heralded
    t = np.zeros((3, 3))
    t[0, 2] = 3.0
    f, prob = ps.conditional_fidelity(c.with_displacements(t), p, {2: 1})
    fb, pb = oracle.brute_conditional_fidelity(c.with_displacements(t), (0, 1), oracle.packet_overlap(rect, wp.NATIVE_SHIFT), {2: 1})
    assert f < 1 - 1e-3
    assert f == pytest.approx(fb, abs=1e-9)
    assert prob == pytest.approx(pb, abs=1e-12)
