import itertools
import json
import math

import numpy as np
import pytest

from minent.errors import InfeasibleSOR, InvalidState, UnsupportedOrder
from minent.masking import (
    MolsPair,
    apply_secret_encoder,
    build_mols,
    build_scheme,
    decode_with_key,
    eavesdropper_spread,
    gf2_irreducible,
    gf2_tables,
    is_supported_order,
    marginal_deviation,
    mask_state,
    mask_via_double_dephasing,
    masking_diagnostics,
    next_supported_order,
    pst_decoder,
    secret_encoder,
    unmask_state,
    verify_masking,
)
from minent.entropy import masking_power, min_entropy, mutual_information
from minent.qstate import DensityMatrix, fidelity, haar_vector, partial_trace, random_state, tomographic_states

SUPPORTED = [3, 4, 5, 7, 8, 9]


def is_latin(t):
    d = t.shape[0]
    full = set(range(d))
    return all(set(t[i]) == full for i in range(d)) and all(set(t[:, j]) == full for j in range(d))


def is_orthogonal(g, h):
    d = g.shape[0]
    return len({(int(g[s, m]), int(h[s, m])) for s in range(d) for m in range(d)}) == d * d


def haar_secret(d, rng):
    return DensityMatrix.from_vector(haar_vector(d, rng))


# ---------------------------------------------------------------- finite fields


def test_irreducible_polynomials_frozen():
    # x^2+x+1, x^3+x+1, x^4+x+1, x^5+x^2+1
    assert [gf2_irreducible(k) for k in (2, 3, 4, 5)] == [0b111, 0b1011, 0b10011, 0b100101]


@pytest.mark.parametrize("k", [2, 3, 4])
def test_field_axioms(k):
    add, mul, prim = gf2_tables(k)
    q = 1 << k
    nonzero = set(range(1, q))
    for a in range(1, q):
        assert set(mul[a, 1:]) == nonzero
    for a, b, c in itertools.product(range(q), repeat=3):
        assert mul[a, add[b, c]] == add[mul[a, b], mul[a, c]]
        assert mul[a, mul[b, c]] == mul[mul[a, b], c]
    powers, x = set(), 1
    for _ in range(q - 1):
        x = int(mul[x, prim])
        powers.add(x)
    assert powers == nonzero


def test_gf4_primitive_is_x():
    _, mul, prim = gf2_tables(2)
    assert prim == 2
    assert mul[2, 2] == 3 and mul[2, 3] == 1


# ---------------------------------------------------------------- MOLS


def test_mols_order_three_exhaustive():
    pair = build_mols(3)
    for s, m in itertools.product(range(3), repeat=2):
        assert pair.g[s, m] == (s + m) % 3
        assert pair.h[s, m] == (2 * s + m) % 3
    assert is_latin(pair.g) and is_latin(pair.h) and is_orthogonal(pair.g, pair.h)


def test_mols_order_four_field_tables():
    pair = build_mols(4)
    add, mul, prim = gf2_tables(2)
    for s, m in itertools.product(range(4), repeat=2):
        assert pair.g[s, m] == add[m, s]
        assert pair.h[s, m] == add[m, mul[prim, s]]
    assert is_latin(pair.g) and is_latin(pair.h) and is_orthogonal(pair.g, pair.h)


@pytest.mark.parametrize("d", SUPPORTED + [12, 15, 16, 20])
def test_mols_valid(d):
    pair = build_mols(d)
    assert pair.validate() == []
    assert is_latin(pair.g) and is_latin(pair.h) and is_orthogonal(pair.g, pair.h)


@pytest.mark.parametrize("d", [1, 2, 6, 10, 14])
def test_unsupported_orders(d):
    with pytest.raises(UnsupportedOrder) as exc:
        build_mols(d)
    err = exc.value
    assert err.next_supported == next_supported_order(d)
    assert err.next_supported > d and is_supported_order(err.next_supported)
    assert err.overhead_bits == pytest.approx(math.log2(err.next_supported) - (math.log2(d)))
    assert "Latin square" in str(err)


def test_next_supported_order_values():
    assert next_supported_order(2) == 3
    assert next_supported_order(6) == 7
    assert next_supported_order(10) == 11


def test_mols_validate_catches_broken_pair():
    pair = build_mols(3)
    broken = MolsPair(3, pair.g, pair.g)
    assert broken.validate()


def test_mols_json_round_trip():
    pair = build_mols(8)
    back = MolsPair.from_dict(json.loads(json.dumps(pair.to_dict())))
    assert np.array_equal(back.g, pair.g) and np.array_equal(back.h, pair.h)


# ---------------------------------------------------------------- masker


@pytest.mark.parametrize("d", SUPPORTED)
def test_V_is_the_mols_permutation(d):
    scheme = build_scheme(d)
    V = scheme.V
    assert np.array_equal(V @ V.conj().T, np.eye(d * d))
    assert np.all((V == 0) | (V == 1))
    for s, m in itertools.product(range(d), repeat=2):
        col = V[:, s * d + m]
        assert col[scheme.mols.g[s, m] * d + scheme.mols.h[s, m]] == 1


def test_mask_zero_qutrit():
    scheme = build_scheme(3)
    out = mask_state(scheme, DensityMatrix.basis(3, 0))
    for k in (0, 1):
        assert np.max(np.abs(partial_trace(out, [k]).data - np.eye(3) / 3)) < 1e-15


def test_mask_maximally_mixed_gives_uniform():
    out = mask_state(build_scheme(3), DensityMatrix.maximally_mixed(3))
    assert np.max(np.abs(out.data - np.eye(9) / 9)) < 1e-15


def test_unmask_recovers_secret_and_key():
    scheme = build_scheme(5)
    psi = haar_secret(5, np.random.default_rng(0))
    back = unmask_state(scheme, mask_state(scheme, psi))
    assert np.max(np.abs(back.data - np.kron(psi.data, np.eye(5) / 5))) < 1e-14


def test_marginal_constancy_on_random_secrets():
    scheme = build_scheme(3)
    rng = np.random.default_rng(3)
    outs = [mask_state(scheme, haar_secret(3, rng)) for _ in range(50)]
    for k in (0, 1):
        assert eavesdropper_spread([partial_trace(o, [k]) for o in outs]) <= 1e-10


@pytest.mark.parametrize("d", SUPPORTED)
def test_marginals_on_tomographic_set(d):
    scheme = build_scheme(d)
    assert max(marginal_deviation(scheme, psi) for psi in tomographic_states(d)) <= 1e-10


def test_mask_dimension_mismatch():
    with pytest.raises(InvalidState):
        mask_state(build_scheme(3), DensityMatrix.maximally_mixed(4))


# ---------------------------------------------------------------- encoder / decoder


def test_secret_encoder_complete():
    scheme = build_scheme(3)
    rng = np.random.default_rng(5)
    for _ in range(20):
        ks = secret_encoder(scheme, haar_secret(3, rng))
        assert np.max(np.abs(sum(A.conj().T @ A for A in ks) - np.eye(3))) <= 1e-12


def test_secret_encoder_deterministic():
    scheme = build_scheme(3)
    psi = haar_secret(3, np.random.default_rng(1))
    a, b = secret_encoder(scheme, psi), secret_encoder(scheme, psi)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_encoder_output_constant_on_uniform_input():
    scheme = build_scheme(3)
    rng = np.random.default_rng(6)
    mixed = DensityMatrix.maximally_mixed(3)
    outs = [apply_secret_encoder(secret_encoder(scheme, haar_secret(3, rng)), mixed) for _ in range(40)]
    for a, b in zip(outs[::2], outs[1::2]):
        assert np.max(np.abs(a.data - b.data)) <= 1e-10


def test_encoder_matches_partial_trace_of_masker():
    scheme = build_scheme(4)
    psi = random_state("ginibre_mixed", 4, seed=2)
    sigma = random_state("ginibre_mixed", 4, seed=3)
    direct = scheme.V @ np.kron(psi.data, sigma.data) @ scheme.V.T
    expected = partial_trace(DensityMatrix(direct, (4, 4), check=False), [1]).data
    got = apply_secret_encoder(secret_encoder(scheme, psi), sigma).data
    assert np.max(np.abs(got - expected)) < 1e-13


@pytest.mark.parametrize("d", SUPPORTED)
def test_decoder_fidelity(d):
    scheme = build_scheme(d)
    rng = np.random.default_rng(d)
    for _ in range(100):
        psi = haar_secret(d, rng)
        assert fidelity(decode_with_key(scheme, psi), psi) >= 1 - 1e-10


def test_decoder_on_mixed_secret_leaves_product():
    scheme = build_scheme(3)
    out = decode_with_key(scheme, DensityMatrix.maximally_mixed(3), keep_junk=True)
    assert np.max(np.abs(out.data - np.eye(9) / 9)) < 1e-14


def test_decoder_junk_is_maximally_mixed():
    scheme = build_scheme(5)
    psi = haar_secret(5, np.random.default_rng(9))
    out = decode_with_key(scheme, psi, keep_junk=True)
    assert np.max(np.abs(out.data - np.kron(psi.data, np.eye(5) / 5))) < 1e-12


def test_decoder_is_permutation():
    W = pst_decoder(build_scheme(7))
    assert np.array_equal(W @ W.T, np.eye(49))
    assert np.all(W.sum(axis=0) == 1) and np.all(W.sum(axis=1) == 1)


# ---------------------------------------------------------------- diagnostics


@pytest.mark.parametrize("d", [3, 5])
def test_masking_diagnostics(d):
    rep = masking_diagnostics(build_scheme(d))
    assert rep.passed
    assert abs(rep.extras["I_RAB"] - 2 * math.log2(d)) <= 1e-8


def test_classical_flag_uncorrelated():
    # flag register deciding between two secrets
    scheme = build_scheme(3)
    a, b = DensityMatrix.basis(3, 0), DensityMatrix.basis(3, 1)
    for k in (0, 1):
        ma, mb = partial_trace(mask_state(scheme, a), [k]), partial_trace(mask_state(scheme, b), [k])
        cq = np.zeros((6, 6), dtype=complex)
        cq[:3, :3], cq[3:, 3:] = ma.data / 2, mb.data / 2
        assert mutual_information(DensityMatrix(cq, (2, 3)), [0], [1]) < 1e-12


@pytest.mark.parametrize("d", SUPPORTED)
def test_safe_state_min_entropy_matches_order(d):
    scheme = build_scheme(d)
    assert abs(min_entropy(scheme.safe_state) - math.log2(d)) < 1e-12
    assert masking_power(scheme.safe_state) == d


def test_verify_masking_report():
    rep = verify_masking(build_scheme(3), 10, 0)
    assert rep.passed
    assert rep.to_dict()["pass"] is True


# ---------------------------------------------------------------- double dephasing


def test_double_dephasing_plus_plus():
    plus = np.array([1, 1]) / np.sqrt(2)
    psi = DensityMatrix.from_vector(np.kron(plus, plus))
    res = mask_via_double_dephasing(DensityMatrix.maximally_mixed(2), 2, psi)
    assert np.max(np.abs(res.system_out.data - np.eye(4) / 4)) <= 1e-12


def test_double_dephasing_mixed_input():
    res = mask_via_double_dephasing(DensityMatrix.maximally_mixed(2), 2, DensityMatrix.maximally_mixed(4))
    assert np.max(np.abs(res.system_out.data - np.eye(4) / 4)) <= 1e-14


def test_double_dephasing_infeasible():
    with pytest.raises(InfeasibleSOR):
        mask_via_double_dephasing(DensityMatrix.diagonal([0.6, 0.4]), 2, DensityMatrix.maximally_mixed(4))


def test_double_dephasing_registers_secret_independent():
    sigma = DensityMatrix.diagonal([1 / 2, 1 / 4, 1 / 8, 1 / 8])
    rng = np.random.default_rng(4)
    outs = [mask_via_double_dephasing(sigma, 2, random_state("ginibre_mixed", 4, seed=rng)) for _ in range(5)]
    for r in outs:
        assert np.max(np.abs(r.system_out.data - np.eye(4) / 4)) <= 1e-10
    assert eavesdropper_spread([r.sor_out for r in outs]) <= 1e-10
