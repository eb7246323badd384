import itertools

import numpy as np
import pytest

from eventlqg.errors import MalformedProblem, WindowTooLarge
from eventlqg.kernels import bind_error, build_noise_kernels
from eventlqg.milp import ScheduleVector, build_milp, check_assignment, cost_unfolded, implied_mu
from eventlqg.riccati import solve_gains
from eventlqg.solver import (
    cross_validate, objectives_close, solve, solve_bnb, solve_bruteforce, solve_dp,
)

from conftest import random_model


@pytest.fixture
def scalar_table(scalar_model, scalar_gains):
    return bind_error(build_noise_kernels(scalar_gains, scalar_model, 0), [2.0])


@pytest.mark.parametrize("method", ["brute", "dp", "bnb"])
def test_scalar_running_example(scalar_table, method):
    r = solve(scalar_table, 0.3, method)
    assert r.schedule.theta_bar == (0, 1)
    assert r.objective == pytest.approx(0.55, rel=1e-12)


@pytest.mark.parametrize("method", ["brute", "dp", "bnb"])
def test_free_communication_sends_always(rng, method):
    m = random_model(rng, 2, 6)
    tab = bind_error(build_noise_kernels(solve_gains(m), m, 0), rng.standard_normal(2))
    r = solve(tab, 0.0, method)
    assert r.objective == pytest.approx(0.0, abs=1e-12)
    assert r.schedule.theta_bar == (0,) * 6


@pytest.mark.parametrize("method", ["brute", "dp", "bnb"])
def test_expensive_communication_skips_always(rng, method):
    m = random_model(rng, 2, 6)
    tab = bind_error(build_noise_kernels(solve_gains(m), m, 0), rng.standard_normal(2))
    lam = tab.coefficients().sum() * 1.01
    r = solve(tab, lam, method)
    assert r.schedule.theta_bar == (1,) * 6
    # the enumeration agrees
    best = min(cost_unfolded(tab, ScheduleVector(0, b), lam)
               for b in itertools.product((0, 1), repeat=6))
    assert r.objective == pytest.approx(best, rel=1e-12)


def test_dp_single_step(rng):
    m = random_model(rng, 2, 4)
    g = solve_gains(m)
    for e in (np.zeros(2), rng.standard_normal(2), 10 * rng.standard_normal(2)):
        tab = bind_error(build_noise_kernels(g, m, 3), e)
        r = solve_dp(tab, m.lam)
        gi = tab.g_init[3]
        assert r.objective == pytest.approx(min(gi, m.lam), rel=1e-12, abs=1e-15)
        assert r.schedule.theta_bar == ((1,) if gi <= m.lam else (0,))


def test_dp_noiseless_zero_error(rng):
    m = random_model(rng, 3, 7)
    m = m.replace(Sigma_w=np.zeros((3, 3)))
    tab = bind_error(build_noise_kernels(solve_gains(m), m, 0), np.zeros(3))
    r = solve_dp(tab, m.lam)
    assert r.objective == 0.0 and r.schedule.theta_bar == (1,) * 7


def test_bruteforce_cap(rng):
    m = random_model(rng, 1, 23)
    tab = bind_error(build_noise_kernels(solve_gains(m), m, 0), [1.0])
    with pytest.raises(WindowTooLarge):
        solve_bruteforce(tab, m.lam)


def test_bruteforce_chunking_consistent(rng):
    m = random_model(rng, 2, 12)
    tab = bind_error(build_noise_kernels(solve_gains(m), m, 0), rng.standard_normal(2))
    a = solve_bruteforce(tab, m.lam)
    b = solve_bruteforce(tab, m.lam, chunk_bits=4)
    assert a.schedule == b.schedule and a.objective == b.objective


def test_tie_break_prefers_fewer_sends_then_earlier(scalar_model, scalar_gains):
    # lambda chosen so sending at 0 then skipping ties with skipping twice:
    # (0,1) costs 0.25 + lam, (1,1) costs 5.85 -> lam = 5.6 ties them.
    tab = bind_error(build_noise_kernels(scalar_gains, scalar_model, 0), [2.0])
    for method in ("brute", "dp"):
        r = solve(tab, 5.6, method)
        assert r.schedule.theta_bar == (1, 1)
    # zero error, no noise: every schedule with no sends costs 0
    m0 = scalar_model.replace(Sigma_w=np.zeros((1, 1)))
    tab0 = bind_error(build_noise_kernels(solve_gains(m0), m0, 0), [0.0])
    for method in ("brute", "dp"):
        assert solve(tab0, 0.0, method).schedule.theta_bar == (1, 1)


def test_dp_and_brute_agree_on_schedules(rng):
    for _ in range(100):
        n = int(rng.integers(1, 4))
        L = int(rng.integers(1, 10))
        m = random_model(rng, n, L)
        tab = bind_error(build_noise_kernels(solve_gains(m), m, 0), rng.standard_normal(n))
        a, b = solve_dp(tab, m.lam), solve_bruteforce(tab, m.lam)
        assert objectives_close(a.objective, b.objective)
        assert a.schedule == b.schedule


def test_hint_never_increases_nodes(rng):
    for _ in range(50):
        n = int(rng.integers(1, 4))
        L = int(rng.integers(1, 12))
        m = random_model(rng, n, L)
        tab = bind_error(build_noise_kernels(solve_gains(m), m, 0), rng.standard_normal(n))
        p = build_milp(tab, m.lam)
        cold = solve_bnb(p)
        warm = solve_bnb(p, incumbent_hint=solve_dp(tab, m.lam))
        assert warm.nodes_explored <= cold.nodes_explored
        assert objectives_close(warm.objective, cold.objective)


def test_bnb_zero_coefficients_linear_nodes(rng):
    m = random_model(rng, 2, 10)
    m = m.replace(Q=np.zeros((2, 2)), QT=np.zeros((2, 2)))
    tab = bind_error(build_noise_kernels(solve_gains(m), m, 0), rng.standard_normal(2))
    r = solve_bnb(build_milp(tab, 5.0))
    assert r.objective == 0.0 and r.schedule.theta_bar == (1,) * 10
    assert r.nodes_explored <= 10 + 1


def test_bnb_bounds_are_valid(rng):
    for _ in range(40):
        n = int(rng.integers(1, 4))
        L = int(rng.integers(1, 9))
        m = random_model(rng, n, L)
        tab = bind_error(build_noise_kernels(solve_gains(m), m, 0), rng.standard_normal(n))
        seen = []
        solve_bnb(build_milp(tab, m.lam), on_node=lambda bits, bound: seen.append((bits, bound)))
        for bits, bound in seen:
            best = min(cost_unfolded(tab, ScheduleVector(0, bits + rest), m.lam)
                       for rest in itertools.product((0, 1), repeat=L - len(bits)))
            assert bound <= best + 1e-12 * max(1.0, best)


def test_solutions_feasible_for_milp(rng):
    m = random_model(rng, 2, 7)
    tab = bind_error(build_noise_kernels(solve_gains(m), m, 0), rng.standard_normal(2))
    p = build_milp(tab, m.lam)
    for method in ("brute", "dp", "bnb"):
        r = solve(tab, m.lam, method)
        ok, obj = check_assignment(p, r.schedule.theta_bar, implied_mu(p, r.schedule.theta_bar))
        assert ok and objectives_close(obj, r.objective)


def test_bnb_rejects_malformed(scalar_table):
    p = build_milp(scalar_table, 0.3)
    bad = type(p)(**{**p.__dict__, "mu_index": {(0, 0): 2}})
    with pytest.raises(MalformedProblem):
        solve_bnb(bad)


def test_cross_validate_trivial_cases(rng):
    m = random_model(rng, 2, 6)
    g = solve_gains(m)
    rep = cross_validate(m, g, 0, rng.standard_normal(2), lam=0.0)
    assert all(r.objective == pytest.approx(0.0, abs=1e-12) for r in rep.results.values())
    m0 = m.replace(Sigma_w=np.zeros((2, 2)))
    rep = cross_validate(m0, solve_gains(m0), 2, np.zeros(2))
    assert all(r.objective == 0.0 for r in rep.results.values())


def test_cross_validate_random(rng):
    for _ in range(60):
        n = int(rng.integers(1, 4))
        T = int(rng.integers(1, 11))
        m = random_model(rng, n, T)
        k = int(rng.integers(0, T))
        rep = cross_validate(m, solve_gains(m), k, rng.standard_normal(n) * 3)
        assert set(rep.results) == {"bnb", "dp", "brute"}


def test_unknown_method(scalar_table):
    with pytest.raises(ValueError):
        solve(scalar_table, 0.3, "simplex")
