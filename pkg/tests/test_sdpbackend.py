import numpy as np
import pytest

from polyvi import sdpbackend as sb


def one_var_block(entries):
    """Helper: 1x1 or small dense block from (const, {var: mat}) style args."""
    const, coeffs = entries
    return sb.SdpBlock.from_dense(np.atleast_2d(const), [(j, np.atleast_2d(m)) for j, m in coeffs])


def make(num_vars, c, eq_rows, blocks):
    return sb.SdpProblem(num_vars, np.array(c, dtype=float),
                         [(np.array(a, dtype=float), float(b)) for a, b in eq_rows],
                         blocks)


# Analytic instances: (problem, optimal value, optimal y or None)
def toy_problems():
    toys = []

    # min y s.t. [y] >= 0
    toys.append((make(1, [1.0], [], [one_var_block((0.0, [(0, 1.0)]))]), 0.0, [0.0]))

    # min -y s.t. [1 - y] >= 0
    toys.append((make(1, [-1.0], [], [one_var_block((1.0, [(0, -1.0)]))]), -1.0, [1.0]))

    # separable: min y1 + y2, y1 >= 1, y2 >= 2
    toys.append((
        make(2, [1.0, 1.0], [],
             [one_var_block((-1.0, [(0, 1.0)])), one_var_block((-2.0, [(1, 1.0)]))]),
        3.0, [1.0, 2.0],
    ))

    # min y with [[1, y], [y, 1]] >= 0  ->  y = -1
    a1 = np.array([[0.0, 1.0], [1.0, 0.0]])
    toys.append((make(1, [1.0], [], [sb.SdpBlock.from_dense(np.eye(2), [(0, a1)])]), -1.0, [-1.0]))

    # min t with [[t, 1], [1, t]] >= 0  ->  t = 1
    toys.append((
        make(1, [1.0], [],
             [sb.SdpBlock.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]), [(0, np.eye(2))])]),
        1.0, [1.0],
    ))

    # equality: min -y2 s.t. y1 = 2, y1 - y2 >= 0
    toys.append((
        make(2, [0.0, -1.0], [([1.0, 0.0], 2.0)],
             [one_var_block((0.0, [(0, 1.0), (1, -1.0)]))]),
        -2.0, [2.0, 2.0],
    ))

    # min y with [[1, y], [y, 4]] >= 0  ->  y = -2
    toys.append((
        make(1, [1.0], [],
             [sb.SdpBlock.from_dense(np.diag([1.0, 4.0]), [(0, a1)])]),
        -2.0, [-2.0],
    ))

    # simplex vertex: min y1 + 2 y2, y1 + y2 = 1, y1 >= 0, y2 >= 0
    toys.append((
        make(2, [1.0, 2.0], [([1.0, 1.0], 1.0)],
             [one_var_block((0.0, [(0, 1.0)])), one_var_block((0.0, [(1, 1.0)]))]),
        1.0, [1.0, 0.0],
    ))

    # min t with (t+1) I - 2*offdiag >= 0  ->  t = 1
    toys.append((
        make(1, [1.0], [],
             [sb.SdpBlock.from_dense(np.array([[1.0, 2.0], [2.0, 1.0]]), [(0, np.eye(2))])]),
        1.0, [1.0],
    ))

    # largest eigenvalue: min t with t I - C >= 0, C = [[1,2],[2,1]], lam_max = 3
    toys.append((
        make(1, [1.0], [],
             [sb.SdpBlock.from_dense(np.array([[-1.0, -2.0], [-2.0, -1.0]]), [(0, np.eye(2))])]),
        3.0, [3.0],
    ))
    return toys


def infeasible_problems():
    probs = []
    # moments of a measure on {x: -1 - x^2 >= 0}: empty set
    m2 = sb.SdpBlock.from_dense(
        np.zeros((2, 2)),
        [(0, np.array([[1.0, 0.0], [0.0, 0.0]])),
         (1, np.array([[0.0, 1.0], [1.0, 0.0]])),
         (2, np.array([[0.0, 0.0], [0.0, 1.0]]))],
    )
    lin = one_var_block((0.0, [(0, -1.0), (2, -1.0)]))
    probs.append(make(3, [0.0, 0.0, 0.0], [([1.0, 0.0, 0.0], 1.0)], [m2, lin]))

    # y >= 0 and y <= -1
    probs.append(make(1, [0.0],
                      [],
                      [one_var_block((0.0, [(0, 1.0)])), one_var_block((-1.0, [(0, -1.0)]))]))

    # y1, y2 >= 0 with y1 + y2 = -3
    probs.append(make(2, [1.0, 1.0], [([1.0, 1.0], -3.0)],
                      [one_var_block((0.0, [(0, 1.0)])), one_var_block((0.0, [(1, 1.0)]))]))
    return probs


def unbounded_problems():
    probs = []
    # min -y with y >= 0
    probs.append(make(1, [-1.0], [], [one_var_block((0.0, [(0, 1.0)]))]))
    # min -y1 - y2 with y1, y2 >= 0; the all-ones direction is an improving ray
    probs.append(make(2, [-1.0, -1.0], [],
                      [one_var_block((0.0, [(0, 1.0)])),
                       one_var_block((0.0, [(1, 1.0)]))]))
    return probs


@pytest.mark.parametrize("idx", range(10))
def test_toy_optimal_values(idx):
    prob, opt, ystar = toy_problems()[idx]
    res = sb.solve(prob, tol=1e-8)
    assert res.status == sb.OPTIMAL
    assert res.objective == pytest.approx(opt, abs=1e-7)
    if ystar is not None:
        assert np.allclose(res.y, ystar, atol=1e-5)


@pytest.mark.parametrize("idx", range(3))
def test_infeasible_detection(idx):
    prob = infeasible_problems()[idx]
    res = sb.solve(prob, tol=1e-8)
    assert res.status == sb.PRIMAL_INFEASIBLE


@pytest.mark.parametrize("idx", range(2))
def test_unbounded_detection(idx):
    prob = unbounded_problems()[idx]
    res = sb.solve(prob, tol=1e-8)
    assert res.status == sb.DUAL_INFEASIBLE


def test_unbounded_without_ray_is_not_reported_optimal():
    # min y1 with [[1, y1], [y1, y2]] >= 0 has value -inf but no improving
    # ray, so no certificate exists; any status except optimal is acceptable
    prob = make(2, [1.0, 0.0], [],
                [sb.SdpBlock.from_dense(
                    np.array([[1.0, 0.0], [0.0, 0.0]]),
                    [(0, np.array([[0.0, 1.0], [1.0, 0.0]])),
                     (1, np.array([[0.0, 0.0], [0.0, 1.0]]))])])
    res = sb.solve(prob, tol=1e-8)
    assert res.status in (sb.DUAL_INFEASIBLE, sb.NUMERICAL_FAILURE)


def test_optimal_iterate_quality():
    # on optimal termination the returned point is nearly feasible
    for prob, _, _ in toy_problems():
        res = sb.solve(prob, tol=1e-8)
        assert res.status == sb.OPTIMAL
        assert sb.min_block_eigenvalue(prob, res.y) >= -1e-7
        assert sb.equality_violation(prob, res.y) <= 1e-7


def test_determinism():
    prob = toy_problems()[3][0]
    r1 = sb.solve(prob)
    r2 = sb.solve(prob)
    assert r1.status == r2.status
    assert np.array_equal(r1.y, r2.y)
    assert r1.objective == r2.objective


def test_weak_duality_gap_reported():
    prob, opt, _ = toy_problems()[4]
    res = sb.solve(prob)
    assert "gap" in res.residuals
    assert res.residuals["gap"] >= -1e-12


def test_inconsistent_equalities_rejected_fast():
    prob = make(2, [1.0, 1.0],
                [([1.0, 1.0], 1.0), ([2.0, 2.0], 5.0)],
                [one_var_block((0.0, [(0, 1.0)]))])
    res = sb.solve(prob)
    assert res.status == sb.PRIMAL_INFEASIBLE


def test_sdpa_export_smoke():
    prob, _, _ = toy_problems()[5]
    text = sb.to_sdpa_sparse(prob)
    lines = text.strip().splitlines()
    assert lines[0] == "2 = mDIM"
    assert lines[1].endswith("= nBLOCK")
    # diagonal block for the equality pair is announced with a negative size
    assert "-2" in lines[2]
    assert any(line.startswith("0 ") or " 0 " in line for line in lines[4:])


def test_block_evaluate_matches_dense():
    rng = np.random.default_rng(7)
    mats = [np.array([[2.0, 1.0], [1.0, 3.0]]), np.array([[0.0, -1.0], [-1.0, 4.0]])]
    const = np.array([[1.0, 0.5], [0.5, 2.0]])
    blk = sb.SdpBlock.from_dense(const, [(0, mats[0]), (1, mats[1])])
    y = rng.standard_normal(2)
    expect = const + y[0] * mats[0] + y[1] * mats[1]
    assert np.allclose(blk.evaluate(y), expect, atol=1e-14)
