"""One-step send/skip certificates.

The benefit of sending at k (expected cost of skipping minus sending) is
sandwiched between e'Gamma_k e - lambda and e'W_k e - lambda. A nonnegative
lower value makes sending weakly optimal; a nonpositive upper value makes
skipping weakly optimal; otherwise the window problem has to be solved.
"""

from __future__ import annotations

import enum
from itertools import product
from dataclasses import dataclass

from .errors import SoundnessViolation
from .kernels import bind_error, build_noise_kernels
from .milp import ScheduleVector, cost_matrix_recursion, cost_unfolded
from .model import quadratic_form
from .solver import solve_bruteforce, objectives_close


class Verdict(enum.Enum):
    SEND = "Send"
    SKIP = "Skip"
    INDETERMINATE = "Indeterminate"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class CertificateDecision:
    verdict: Verdict
    lower: float
    upper: float

    @property
    def determinate(self):
        return self.verdict is not Verdict.INDETERMINATE


def evaluate_certificate(e_s, Gamma_k, W_k, lam) -> CertificateDecision:
    lower = quadratic_form(e_s, Gamma_k) - lam
    upper = quadratic_form(e_s, W_k) - lam
    # Skip wins the (boundary-only) case where both conditions hold.
    if upper <= 0:
        verdict = Verdict.SKIP
    elif lower >= 0:
        verdict = Verdict.SEND
    else:
        verdict = Verdict.INDETERMINATE
    return CertificateDecision(verdict, float(lower), float(upper))


def certificate_at(gains, k, e_s, lam) -> CertificateDecision:
    return evaluate_certificate(e_s, gains.Gamma[k], gains.W[k], lam)


def _optimal_first_actions(table, lam):
    """First-step skip bits attained by at least one optimal schedule."""
    best = solve_bruteforce(table, lam)
    actions = {first for first in (0, 1)
               if objectives_close(_best_with_first(table, lam, first), best.objective)}
    return actions, best


def _best_with_first(table, lam, first):
    L = table.window
    return min(cost_unfolded(table, ScheduleVector(table.k, (first,) + rest), lam)
               for rest in product((0, 1), repeat=L - 1))


def certificate_soundness_check(model, gains, k, e_s, lam=None, table=None) -> CertificateDecision:
    """Confirm a determinate verdict against enumeration of the window.

    Also checks the sandwich ordering and that the bounds are attained by the
    "send at k+1" and "never send again" completions.

    Raises:
        SoundnessViolation
    """
    lam = model.lam if lam is None else float(lam)
    if lam != model.lam:
        model = model.replace(lam=lam)
    dec = certificate_at(gains, k, e_s, lam)
    if dec.lower > dec.upper + 1e-12 * max(1.0, abs(dec.upper)):
        raise SoundnessViolation(f"sandwich violated at k={k}: {dec.lower} > {dec.upper}", data=dec)
    if table is None:
        table = build_noise_kernels(gains, model, k)
    table = bind_error(table, e_s)
    if dec.determinate:
        actions, best = _optimal_first_actions(table, lam)
        want = 0 if dec.verdict is Verdict.SEND else 1
        if want not in actions:
            raise SoundnessViolation(
                f"{dec.verdict} certificate at k={k} but no optimal schedule agrees "
                f"(optimum {best.objective!r}, {best.schedule})", data=(dec, best))
    (lo, hi), scale = _witnesses(model, gains, k, e_s)
    tol = 1e-9 * max(1.0, scale)
    if abs(lo - dec.lower) > tol or abs(hi - dec.upper) > tol:
        raise SoundnessViolation(
            f"bounds not attained at k={k}: witnesses ({lo}, {hi}) vs ({dec.lower}, {dec.upper})",
            data=dec)
    return dec


def tightness_witnesses(model, gains, k, e_s):
    """Realized skip-minus-send benefit for the two extreme completions.

    Returns ``(benefit if the next send is at k+1, benefit if never sending again)``,
    each computed by re-costing both first actions with the covariance recursion.
    """
    return _witnesses(model, gains, k, e_s)[0]


def _witnesses(model, gains, k, e_s):
    L = model.T - k
    out = []
    scale = 0.0
    for tail in ((0,) + (1,) * (L - 2), (1,) * (L - 1)):
        tail = tail[:L - 1]
        skip = cost_matrix_recursion(model, gains, k, e_s, ScheduleVector(k, (1,) + tail))
        send = cost_matrix_recursion(model, gains, k, e_s, ScheduleVector(k, (0,) + tail))
        out.append(skip - send)
        scale = max(scale, abs(skip), abs(send))
    return tuple(out), scale
