import json
import math

import numpy as np
import pytest

from minent.dephasing import (
    check_min_entropy_nondecrease,
    collapse_to_standard,
    complementary_channel,
    dephase_in_joint,
    expand_outcome_pair,
    induced_channel,
    naive_dephasing_unitary,
    optimal_dephasing_unitary,
    plan_catalytic_dephasing,
    recover_catalyst,
    run_dephasing,
    verify_dephasing,
)
from minent.entropy import min_entropy, von_neumann_entropy
from minent.errors import CapacityExceeded, InfeasibleSOR, InvalidState
from minent.qstate import DensityMatrix, max_abs, partial_trace, random_state, trace_distance

from conftest import random_spectrum

DYADIC = [1 / 2, 1 / 4, 1 / 8, 1 / 8]


def off_diagonal(m):
    return max_abs(m - np.diag(np.diag(m)))


def random_catalyst(rng, d, n=None):
    n = n or d + int(rng.integers(0, 3))
    return random_state("spectrum_fixed", n, seed=rng, spectrum=random_spectrum(rng, n, 1.0 / d))


@pytest.fixture(scope="module")
def dyadic_plan():
    return plan_catalytic_dephasing(DensityMatrix.diagonal(DYADIC), 2)


# ---------------------------------------------------------------- unitaries


def test_optimal_unitary_definition():
    d = 3
    U = optimal_dephasing_unitary(d)
    w = np.exp(2j * np.pi / d)
    assert np.max(np.abs(U @ U.conj().T - np.eye(d ** 3))) < 1e-14
    for i, j, k in np.ndindex(d, d, d):
        e = np.zeros(d ** 3)
        e[(i * d + j) * d + k] = 1
        out = U @ e
        target = (i * d + j) * d + (k + i) % d
        assert abs(out[target] - w ** (j * k)) < 1e-14


def test_optimal_plus_plus_qubits():
    plus = np.array([1, 1]) / np.sqrt(2)
    rho = np.outer(np.kron(plus, plus), np.kron(plus, plus))
    U = optimal_dephasing_unitary(2)
    assert max_abs(induced_channel(U, rho, 2) - np.eye(4) / 4) < 1e-15
    assert max_abs(complementary_channel(U, rho, 2) - np.eye(2) / 2) < 1e-15


def test_diagonal_input_fixed():
    U = optimal_dephasing_unitary(2)
    rho = np.diag([0.1, 0.2, 0.3, 0.4])
    assert max_abs(induced_channel(U, rho, 2) - rho) < 1e-15


@pytest.mark.parametrize("d", [2, 3])
def test_optimal_unitary_properties(d):
    U = optimal_dephasing_unitary(d)
    comps = []
    for seed in range(20):
        rho = random_state("ginibre_mixed", d * d, seed=seed).data
        out = induced_channel(U, rho, d)
        assert off_diagonal(out) <= 1e-12
        assert max_abs(np.diag(out) - np.diag(rho)) <= 1e-12
        comp = complementary_channel(U, rho, d)
        assert max_abs(comp - np.eye(d) / d) <= 1e-12
        comps.append(comp)
    assert max(max_abs(c - comps[0]) for c in comps) <= 1e-10


def test_optimal_unitary_rejects_small_d():
    with pytest.raises(ValueError):
        optimal_dephasing_unitary(1)


def test_naive_unitary_qubit():
    plus = np.array([1, 1]) / np.sqrt(2)
    out = induced_channel(naive_dephasing_unitary(2), np.outer(plus, plus), 2)
    assert max_abs(out - np.eye(2) / 2) < 1e-15


def test_naive_unitary_dephases_and_preserves_catalyst():
    D = 4
    U = naive_dephasing_unitary(D)
    rho = random_state("ginibre_mixed", D, seed=3).data
    assert off_diagonal(induced_channel(U, rho, D)) <= 1e-12
    assert max_abs(complementary_channel(U, rho, D) - np.eye(D) / D) <= 1e-12
    joint = (U @ np.kron(rho, np.eye(D) / D) @ U.conj().T).reshape(D, D, D, D)
    # catalyst marginal returned unchanged
    assert max_abs(np.einsum("ajak->jk", joint) - np.eye(D) / D) <= 1e-12


def test_randomness_saving_of_optimal_construction():
    D = 9
    naive_bits = math.log2(naive_dephasing_unitary(D).shape[0] // D)
    optimal_bits = math.log2(optimal_dephasing_unitary(3).shape[0] // D)
    assert naive_bits == pytest.approx(2 * optimal_bits)


# ---------------------------------------------------------------- planning


def test_dyadic_plan_leftover(dyadic_plan):
    assert np.allclose(np.diag(dyadic_plan.leftover()).real, [1 / 2, 1 / 4, 1 / 4], atol=1e-14)
    assert np.allclose(dyadic_plan.instrument.all_probs(), [1 / 2, 1 / 4, 1 / 4])


def test_uniform_precatalyst_trivial_plan():
    plan = plan_catalytic_dephasing(DensityMatrix.maximally_mixed(2), 2)
    assert plan.num_outcomes == 1
    assert np.allclose(plan.leftover(), [[1.0]])


def test_infeasible_precatalyst():
    with pytest.raises(InfeasibleSOR) as exc:
        plan_catalytic_dephasing(DensityMatrix.diagonal([0.6, 0.4]), 2)
    assert "0.736966" in str(exc.value)


def test_embed_isometry(dyadic_plan):
    J = dyadic_plan.embed_isometry
    n, m = dyadic_plan.catalyst_dim, dyadic_plan.num_outcomes
    assert J.shape == (m * m * n, n)
    assert max_abs(J.conj().T @ J - np.eye(n)) < 1e-12
    out = J @ dyadic_plan.precatalyst.data @ J.conj().T
    # Tr_{B'} J sigma J^dagger = kappa_{A'} (x) Phi_B
    t = out.reshape(m, m, n, m, m, n)
    red = np.einsum("abcdbf->acdf", t).reshape(m * n, m * n)
    expected = np.kron(dyadic_plan.leftover(), dyadic_plan.uniform_catalyst())
    assert max_abs(red - expected) < 1e-12


def test_plan_json(dyadic_plan):
    doc = json.loads(json.dumps(dyadic_plan.to_dict()))
    assert doc["d"] == 2
    assert doc["leftover_weights"] == pytest.approx([0.5, 0.25, 0.25])


# ---------------------------------------------------------------- running


def test_uniform_superposition_dephased(dyadic_plan):
    v = np.ones(4) / 2
    run = run_dephasing(dyadic_plan, DensityMatrix.from_vector(v))
    assert max_abs(run.system_out.data - np.eye(4) / 4) <= 1e-12


def test_diagonal_input_unchanged(dyadic_plan):
    rho = DensityMatrix.diagonal([0.4, 0.3, 0.2, 0.1])
    assert max_abs(run_dephasing(dyadic_plan, rho).system_out.data - rho.data) <= 1e-12


def test_run_outputs(dyadic_plan):
    phi_kappa = np.kron(dyadic_plan.uniform_catalyst(), dyadic_plan.leftover())
    outs = []
    for seed in range(10):
        rho = random_state("ginibre_mixed", 4, seed=seed)
        run = run_dephasing(dyadic_plan, rho)
        assert max_abs(run.system_out.data - np.diag(np.diag(rho.data))) <= 1e-10
        assert max_abs(run.catalyst_out.data - phi_kappa) <= 1e-10
        assert max_abs(run.leftover_out.data - dyadic_plan.leftover()) <= 1e-10
        outs.append(run.complementary_out.data)
    assert max(max_abs(o - outs[0]) for o in outs) <= 1e-10


def test_run_dimension_mismatch(dyadic_plan):
    with pytest.raises(InvalidState):
        run_dephasing(dyadic_plan, DensityMatrix.maximally_mixed(3))


def test_joint_capacity():
    plan = plan_catalytic_dephasing(DensityMatrix.maximally_mixed(3), 3)
    with pytest.raises(CapacityExceeded):
        dephase_in_joint(plan, np.zeros((1, 1)), [9, 9, 9, 9], 0)


def test_idempotent(dyadic_plan):
    rho = random_state("ginibre_mixed", 4, seed=11)
    once = run_dephasing(dyadic_plan, rho).system_out
    twice = run_dephasing(dyadic_plan, once).system_out
    assert max_abs(once.data - twice.data) <= 1e-10


def test_entropy_accounting(dyadic_plan):
    rho = random_state("ginibre_mixed", 4, seed=12)
    run = run_dephasing(dyadic_plan, rho)
    total = von_neumann_entropy(run.joint)
    assert abs(total - von_neumann_entropy(rho) - von_neumann_entropy(dyadic_plan.precatalyst)) <= 1e-8


def test_catalyst_reuse(dyadic_plan):
    rho = random_state("ginibre_mixed", 4, seed=13)
    produced = run_dephasing(dyadic_plan, rho).catalyst_out
    assert min_entropy(produced) >= math.log2(2) - 1e-12
    fresh = plan_catalytic_dephasing(DensityMatrix(produced.data), 2)
    assert verify_dephasing(fresh, 5, seed=1).passed


def test_expand_outcome_pair(dyadic_plan):
    rho = random_state("ginibre_mixed", 4, seed=14)
    run = run_dephasing(dyadic_plan, rho)
    full = expand_outcome_pair(run.joint)
    assert full.dims == (4, 4, 3, 3)
    # tracing A' from the explicit pair gives the dephased (S, B, B') state
    cat = partial_trace(full, [1, 3])
    assert max_abs(cat.data - run.catalyst_out.data) <= 1e-12


# ---------------------------------------------------------------- diagnostics


def test_min_entropy_nondecrease_dyadic(dyadic_plan):
    rep = check_min_entropy_nondecrease(dyadic_plan)
    assert rep.passed
    assert rep.extras["max_branch_weight_over_d"] == pytest.approx(0.25)
    assert rep.extras["lambda_max_sigma"] == pytest.approx(0.5)


def test_min_entropy_equality_for_uniform():
    plan = plan_catalytic_dephasing(DensityMatrix.maximally_mixed(3), 3)
    rep = check_min_entropy_nondecrease(plan)
    assert rep.passed
    assert rep.extras["lambda_max_catalyst"] == pytest.approx(1 / 3)
    assert rep.extras["lambda_max_sigma"] == pytest.approx(1 / 3)


@pytest.mark.parametrize("d", [2, 3])
def test_min_entropy_sweep(d):
    rng = np.random.default_rng(70 + d)
    for _ in range(20):
        assert check_min_entropy_nondecrease(plan_catalytic_dephasing(random_catalyst(rng, d), d)).passed


def test_recover_catalyst_dyadic(dyadic_plan):
    assert max_abs(recover_catalyst(dyadic_plan).data - dyadic_plan.precatalyst.data) <= 1e-12


def test_recover_uniform_catalyst():
    sigma = DensityMatrix.maximally_mixed(2)
    plan = plan_catalytic_dephasing(sigma, 2)
    assert max_abs(recover_catalyst(plan).data - sigma.data) <= 1e-14


def test_recover_catalyst_random():
    rng = np.random.default_rng(5)
    for d in (2, 3):
        for _ in range(5):
            plan = plan_catalytic_dephasing(random_catalyst(rng, d), d)
            assert max_abs(recover_catalyst(plan).data - plan.precatalyst.data) <= 1e-12


def test_recover_catalyst_ablation():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(5):
        plan = plan_catalytic_dephasing(random_catalyst(rng, 2, 4), 2)
        for i in range(plan.num_outcomes):
            worst = max(worst, trace_distance(recover_catalyst(plan, omit=i), plan.precatalyst))
    assert worst > 1e-3


def test_recover_from_run_output(dyadic_plan):
    rho = random_state("ginibre_mixed", 4, seed=15)
    out = run_dephasing(dyadic_plan, rho).catalyst_out
    assert max_abs(recover_catalyst(dyadic_plan, out.data).data - dyadic_plan.precatalyst.data) <= 1e-12


def test_collapse_every_outcome(dyadic_plan):
    rho = random_state("ginibre_mixed", 4, seed=16)
    run = run_dephasing(dyadic_plan, rho)
    rep = collapse_to_standard(dyadic_plan, run.joint)
    assert [o.index for o in rep.outcomes] == [0, 1, 2]
    phi = DensityMatrix(dyadic_plan.uniform_catalyst())
    for o in rep.outcomes:
        assert trace_distance(o.catalyst_state, phi) <= 1e-10
        assert max_abs(o.system_state.data - run.system_out.data) <= 1e-10
    assert rep.mutual_information <= 1e-8
    assert rep.passed


def test_collapse_single_branch():
    plan = plan_catalytic_dephasing(DensityMatrix.maximally_mixed(2), 2)
    run = run_dephasing(plan, random_state("ginibre_mixed", 4, seed=17))
    rep = collapse_to_standard(plan, run.joint)
    assert len(rep.outcomes) == 1
    assert max_abs(rep.outcomes[0].system_state.data - run.system_out.data) <= 1e-12


def test_collapse_skips_zero_probability():
    plan = plan_catalytic_dephasing(DensityMatrix.diagonal([1 / 2, 1 / 2, 0.0]), 2)
    run = run_dephasing(plan, random_state("ginibre_mixed", 4, seed=18))
    rep = collapse_to_standard(plan, run.joint)
    assert rep.skipped == [plan.num_outcomes - 1]
    assert rep.passed


def test_collapse_fourier_basis(dyadic_plan):
    run = run_dephasing(dyadic_plan, random_state("ginibre_mixed", 4, seed=19))
    m = dyadic_plan.num_outcomes
    F = np.exp(2j * np.pi * np.outer(np.arange(m), np.arange(m)) / m) / np.sqrt(m)
    rep = collapse_to_standard(dyadic_plan, run.joint, F)
    assert len(rep.outcomes) == m
    assert rep.catalyst_deviation <= 1e-10


def test_verify_dephasing(dyadic_plan):
    rep = verify_dephasing(dyadic_plan, 5, seed=0)
    assert rep.passed
