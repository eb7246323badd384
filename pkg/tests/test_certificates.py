import numpy as np
import pytest

from eventlqg.certificates import (
    Verdict, certificate_soundness_check, evaluate_certificate, tightness_witnesses,
)
from eventlqg.errors import DimensionMismatch
from eventlqg.kernels import bind_error, build_noise_kernels
from eventlqg.riccati import solve_gains
from eventlqg.solver import solve_bruteforce

from conftest import random_model


def test_scalar_send(scalar_gains):
    d = evaluate_certificate([2.0], scalar_gains.Gamma[0], scalar_gains.W[0], 0.3)
    assert d.verdict is Verdict.SEND
    assert d.lower == pytest.approx(3.3) and d.upper == pytest.approx(5.3)


def test_scalar_skip(scalar_model, scalar_gains):
    d = evaluate_certificate([0.1], scalar_gains.Gamma[0], scalar_gains.W[0], 0.3)
    assert d.verdict is Verdict.SKIP
    assert d.upper == pytest.approx(-0.286)
    tab = bind_error(build_noise_kernels(scalar_gains, scalar_model, 0), [0.1])
    assert solve_bruteforce(tab, 0.3).schedule.theta_bar == (1, 1)


def test_zero_error_skips(scalar_gains):
    d = evaluate_certificate([0.0], scalar_gains.Gamma[0], scalar_gains.W[0], 0.3)
    assert d.verdict is Verdict.SKIP and d.lower == d.upper == -0.3


def test_boundary_resolves_to_skip():
    d = evaluate_certificate([1.0], [[1.0]], [[1.0]], 1.0)
    assert d.lower == 0.0 == d.upper
    assert d.verdict is Verdict.SKIP


def test_indeterminate(scalar_gains):
    # lower = 0.9 e^2 - 2 < 0 < 1.4 e^2 - 2 for e = 1.3
    d = evaluate_certificate([1.3], scalar_gains.Gamma[0], scalar_gains.W[0], 2.0)
    assert d.verdict is Verdict.INDETERMINATE and not d.determinate


def test_dimension_mismatch(scalar_gains):
    with pytest.raises(DimensionMismatch):
        evaluate_certificate([1.0, 2.0], scalar_gains.Gamma[0], scalar_gains.W[0], 0.3)


def test_free_communication_certifies_send(rng):
    m = random_model(rng, 2, 6)
    g = solve_gains(m)
    for k in range(6):
        e = rng.standard_normal(2)
        if np.linalg.eigvalsh(g.Gamma[k])[0] > 1e-9:
            d = certificate_soundness_check(m, g, k, e, lam=0.0)
            assert d.verdict is Verdict.SEND


def test_huge_penalty_skips_everywhere(rng):
    m = random_model(rng, 2, 6)
    g = solve_gains(m)
    e = rng.standard_normal(2)
    tab = bind_error(build_noise_kernels(g, m, 0), e)
    lam = 2.0 * tab.coefficients().sum() + 1.0
    for k in range(6):
        d = certificate_soundness_check(m, g, k, e, lam=lam)
        assert d.verdict is Verdict.SKIP


def test_soundness_random(rng):
    counts = {v: 0 for v in Verdict}
    for _ in range(150):
        n = int(rng.integers(1, 4))
        T = int(rng.integers(1, 9))
        m = random_model(rng, n, T)
        g = solve_gains(m)
        k = int(rng.integers(0, T))
        d = certificate_soundness_check(m, g, k, rng.standard_normal(n) * 10 ** rng.uniform(-1, 1))
        counts[d.verdict] += 1
    assert all(c > 0 for c in counts.values())


def test_tightness_witnesses_scalar(scalar_model, scalar_gains):
    lo, hi = tightness_witnesses(scalar_model, scalar_gains, 0, [2.0])
    assert lo == pytest.approx(3.6 - 0.3) and hi == pytest.approx(5.6 - 0.3)
