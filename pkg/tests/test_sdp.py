"""Interior-point solver: closed-form oracles, duality certificates, lowering."""

import numpy as np
import pytest

from renyimeat.errors import InfeasibleSpec, InvalidState, SolverFailure
from renyimeat.registers import space
from renyimeat.sampling import random_density, rng_from
from renyimeat.sdp import (
    SdpProblem,
    embed_adjoint,
    hermitian_basis,
    hunvec,
    hvec,
    solve_sdp,
)


def random_hermitian(n, seed):
    rng = rng_from(seed)
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (G + G.conj().T)


def test_hermitian_basis_is_orthonormal():
    mats = list(hermitian_basis(3))
    assert len(mats) == 9
    for i, E in enumerate(mats):
        np.testing.assert_allclose(E, E.conj().T, atol=1e-14)
        for j, F in enumerate(mats):
            want = 1.0 if i == j else 0.0
            assert np.real(np.trace(E.conj().T @ F)) == pytest.approx(want, abs=1e-13)


def test_hvec_roundtrip():
    M = random_hermitian(4, 0)
    np.testing.assert_allclose(hunvec(hvec(M), 4), M, atol=1e-13)
    # isometry of the vectorization
    assert np.linalg.norm(hvec(M)) == pytest.approx(np.linalg.norm(M))


def test_scalar_box():
    # max x subject to x <= 3 (and x >= 0 from the PSD block)
    p = SdpProblem(sense="max")
    p.add_block("x", 1)
    p.add_block("s", 1)
    p.add_objective("x", np.array([[1.0]]))
    p.add_eq_constraint({"x": np.array([[1.0]]), "s": np.array([[1.0]])}, 3.0)
    sol = solve_sdp(p, start={"x": [[1.0]], "s": [[2.0]]})
    assert sol.value == pytest.approx(3.0, abs=1e-7)
    assert sol.gap <= 1e-6


def test_top_eigenvalue_program():
    H = random_hermitian(3, 7)
    p = SdpProblem(sense="max")
    p.add_block("X", 3)
    p.add_objective("X", H)
    p.add_eq_constraint({"X": np.eye(3)}, 1.0)
    sol = solve_sdp(p, start={"X": np.eye(3) / 3})
    top = float(np.linalg.eigvalsh(H)[-1])
    assert sol.value == pytest.approx(top, abs=1e-7)
    assert sol.residuals["primal_eq"] < 1e-9
    assert sol.residuals["min_eig_X"] > -1e-9


def test_psd_completion_oracle():
    """min tr[psi L] s.t. L >= G, L >= 0 equals tr[psi G_+] for psi = I/2."""
    G = random_hermitian(3, 11) - 0.5 * np.eye(3)  # force indefiniteness
    assert np.linalg.eigvalsh(G)[0] < 0
    psi = np.eye(3) / 2
    p = SdpProblem(sense="min")
    p.add_block("L", 3)
    p.add_objective("L", psi)
    p.add_operator_inequality([("L", lambda E: E)], G, slack="S")
    lam0 = (abs(np.linalg.eigvalsh(G)).max() + 1.0) * np.eye(3)
    sol = solve_sdp(p, start={"L": lam0, "S": lam0 - G})
    w = np.linalg.eigvalsh(G)
    want = 0.5 * float(np.sum(w[w > 0]))
    assert sol.value == pytest.approx(want, abs=1e-6)
    # the returned variable really dominates G
    slack_eig = np.linalg.eigvalsh(sol.variables["L"] - G).min()
    assert slack_eig > -1e-8


def test_leq_inequality_lowering():
    p = SdpProblem(sense="max")
    p.add_block("X", 2)
    p.add_objective("X", np.eye(2))
    p.add_operator_inequality([("X", lambda E: E)], np.eye(2), slack="S",
                              sense="<=")
    sol = solve_sdp(p, start={"X": np.eye(2) / 2, "S": np.eye(2) / 2})
    assert sol.value == pytest.approx(2.0, abs=1e-7)


@pytest.mark.parametrize("seed", range(10))
def test_random_instances_certify_small_gaps(seed):
    """Paired primal/dual residuals on random dominance programs."""
    rng = rng_from(100 + seed)
    n = int(rng.integers(2, 5))
    G = random_hermitian(n, rng)
    psi = random_density(space(("A", n)), seed=rng).matrix + 0.05 * np.eye(n)
    psi /= np.real(np.trace(psi))
    p = SdpProblem(sense="min")
    p.add_block("L", n)
    p.add_objective("L", psi)
    p.add_operator_inequality([("L", lambda E: E)], G, slack="S")
    lam0 = (abs(np.linalg.eigvalsh(G)).max() + 1.0) * np.eye(n)
    sol = solve_sdp(p, start={"L": lam0, "S": lam0 - G})
    scale = max(1.0, abs(sol.value))
    assert sol.gap <= 1e-6 * scale
    assert sol.residuals["primal_eq"] <= 1e-8
    assert sol.residuals["min_eig_X"] >= -1e-9
    assert sol.residuals["min_eig_S"] >= -1e-12
    # weak duality for the recovered pair (min problem: dual <= primal)
    assert sol.dual_value <= sol.value + 1e-7 * scale


def test_infeasible_equalities_detected():
    p = SdpProblem(sense="min")
    p.add_block("X", 2)
    p.add_objective("X", np.eye(2))
    p.add_eq_constraint({"X": np.eye(2)}, 1.0)
    p.add_eq_constraint({"X": np.eye(2)}, 2.0)
    with pytest.raises(InfeasibleSpec):
        solve_sdp(p)


def test_boundary_only_feasibility_reported():
    # tr X = 0 forces X = 0: no interior point exists
    p = SdpProblem(sense="min")
    p.add_block("X", 2)
    p.add_objective("X", np.eye(2))
    p.add_eq_constraint({"X": np.eye(2)}, 0.0)
    with pytest.raises(SolverFailure):
        solve_sdp(p)


def test_start_validation():
    p = SdpProblem(sense="min")
    p.add_block("X", 2)
    p.add_objective("X", np.eye(2))
    p.add_eq_constraint({"X": np.eye(2)}, 1.0)
    with pytest.raises(InvalidState):
        solve_sdp(p, start={})
    with pytest.raises(SolverFailure):
        solve_sdp(p, start={"X": np.eye(2)})  # violates tr X = 1


def test_embed_adjoint_is_the_partial_trace():
    amb = space(("A", 2), ("B", 3))
    adj = embed_adjoint(amb, ["B"])
    rng = rng_from(5)
    for _ in range(5):
        E = random_hermitian(6, rng)
        X = random_hermitian(3, rng)
        lhs = np.real(np.trace(E.conj().T @ np.kron(np.eye(2), X)))
        # embed acts as X on B tensor identity on A, with ambient order (A, B)
        rhs = np.real(np.trace(adj(E).conj().T @ X))
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_problem_serialization_roundtrip():
    p = SdpProblem(sense="max")
    p.add_block("X", 2)
    p.add_objective("X", np.array([[1.0, 1j], [-1j, 0.0]]))
    p.add_eq_constraint({"X": np.eye(2)}, 1.0)
    q = SdpProblem.from_jsonable(p.to_jsonable())
    a = solve_sdp(p, start={"X": np.eye(2) / 2})
    b = solve_sdp(q, start={"X": np.eye(2) / 2})
    assert a.value == pytest.approx(b.value, abs=1e-10)
    assert a.to_jsonable()["value"] == pytest.approx(b.value, abs=1e-10)
