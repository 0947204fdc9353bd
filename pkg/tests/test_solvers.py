import itertools

import numpy as np
import pytest
from hypothesis import given

from coherence_proj.errors import Infeasible, SolverError
from coherence_proj.polytope import Polytope, interior_point, vi_residual
from coherence_proj.solvers import QuadraticObjective, SolverOptions, minimize

from strategies import seeds, spd_matrices


def face_enumeration_qp(Q, c, u):
    """min 1/2 z'Qz + c'z s.t. sum z = 1, 0 <= z <= u, by solving every face's KKT system."""
    k = len(c)
    best, arg = np.inf, None
    for state in itertools.product((0, 1, 2), repeat=k):  # free, at 0, at u
        free = [i for i in range(k) if state[i] == 0]
        z = np.array([0.0 if s == 1 else (u[i] if s == 2 else 0.0) for i, s in enumerate(state)])
        if free:
            m = len(free)
            K = np.zeros((m + 1, m + 1))
            K[:m, :m] = Q[np.ix_(free, free)]
            K[:m, m] = 1.0
            K[m, :m] = 1.0
            fixed = [i for i in range(k) if state[i] != 0]
            rhs = np.concatenate([-(c[free] + Q[np.ix_(free, fixed)] @ z[fixed]), [1.0 - z[fixed].sum()]])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            z[free] = sol[:m]
        elif abs(z.sum() - 1.0) > 1e-12:
            continue
        if np.all(z >= -1e-12) and np.all(z <= u + 1e-12) and abs(z.sum() - 1) <= 1e-10:
            f = 0.5 * z @ Q @ z + c @ z
            if f < best:
                best, arg = f, z
    return best, arg


@given(Q=spd_matrices(3), seed=seeds)
def test_barrier_matches_face_enumeration(Q, seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=3)
    u = rng.uniform(0.4, 1.0, 3)
    poly = Polytope.build(3, A=np.ones((1, 3)), b=[1.0], lb=np.zeros(3), ub=u)
    z, rep = minimize(QuadraticObjective(Q, c), poly)
    best, arg = face_enumeration_qp(Q, c, u)
    assert rep.status == "optimal"
    assert rep.objective == pytest.approx(best, abs=1e-9)
    assert np.max(np.abs(z - arg)) <= 1e-6


@given(Q=spd_matrices(3), seed=seeds)
def test_projected_gradient_agrees_with_barrier(Q, seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=3)
    poly = Polytope.build(3, A=np.ones((1, 3)), b=[1.0], lb=np.zeros(3))
    obj = QuadraticObjective(Q, c)
    _, ref = minimize(obj, poly)
    _, alt = minimize(obj, poly, SolverOptions(algorithm="mirror_descent", tol_kkt=1e-7))
    assert alt.objective == pytest.approx(ref.objective, abs=1e-7)


@given(Q=spd_matrices(3), seed=seeds)
def test_frank_wolfe_agrees_with_barrier(Q, seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=3)
    poly = Polytope.build(3, A=np.ones((1, 3)), b=[1.0], lb=np.zeros(3))
    obj = QuadraticObjective(Q, c)
    _, ref = minimize(obj, poly)
    _, alt = minimize(obj, poly, SolverOptions(algorithm="frank_wolfe", tol_kkt=1e-8, max_iter=5000))
    assert alt.objective == pytest.approx(ref.objective, abs=1e-7)


def test_dykstra_does_not_stop_on_a_stalled_iterate():
    # from (1/3, 1/3, 1/3) the first projected step stalls the iterate while corrections move
    Q = np.diag([4.0, 5.0, 15.0])
    c = np.array([-2.0, 1.0, -14.0])
    poly = Polytope.build(3, A=np.ones((1, 3)), b=[1.0], lb=np.zeros(3))
    obj = QuadraticObjective(Q, c)
    _, ref = minimize(obj, poly)
    _, alt = minimize(obj, poly, SolverOptions(algorithm="mirror_descent", tol_kkt=1e-8))
    assert alt.objective == pytest.approx(ref.objective, abs=1e-9)


def test_fixed_variables_are_respected():
    poly = Polytope.build(2, A=np.ones((1, 2)), b=[1.0], lb=np.zeros(2))
    z, _ = minimize(QuadraticObjective(np.eye(2), np.zeros(2)), poly, fixed=[True, False],
                    fixed_values=[0.3, 0.0])
    assert np.allclose(z, [0.3, 0.7])


def test_infeasible_polytope():
    poly = Polytope.build(2, A=np.ones((1, 2)), b=[1.0], lb=np.zeros(2), ub=[0.2, 0.2])
    with pytest.raises(Infeasible):
        interior_point(poly)


def test_implicit_equalities_detected():
    # z0 + z1 = 1 with z1 <= 0 forces z1 = 0
    poly = Polytope.build(2, A=np.ones((1, 2)), b=[1.0], lb=np.zeros(2), ub=[1.0, 0.0])
    z, mask = interior_point(poly)
    assert poly.contains(z)
    assert mask.any()
    zz, rep = minimize(QuadraticObjective(np.eye(2), np.array([0.0, -5.0])), poly)
    assert np.allclose(zz, [1.0, 0.0])


def test_vi_residual_zero_at_vertex_optimum():
    poly = Polytope.build(2, A=np.ones((1, 2)), b=[1.0], lb=np.zeros(2))
    assert vi_residual(poly, np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0
    assert vi_residual(poly, np.array([0.0, 1.0]), np.array([0.0, 1.0])) == pytest.approx(1.0)


def test_unknown_algorithm_rejected():
    with pytest.raises(ValueError):
        SolverOptions(algorithm="simplex")


def test_iteration_cap_raises_solver_error():
    poly = Polytope.build(3, A=np.ones((1, 3)), b=[1.0], lb=np.zeros(3))
    # interior optimum, so no single Frank-Wolfe step can land on it
    obj = QuadraticObjective(np.diag([1.0, 3.0, 2.0]), np.array([0.1, 0.0, -0.1]))
    with pytest.raises(SolverError) as info:
        minimize(obj, poly, SolverOptions(algorithm="frank_wolfe", max_iter=1, tol_kkt=1e-14))
    assert info.value.report.status == "inaccurate"
