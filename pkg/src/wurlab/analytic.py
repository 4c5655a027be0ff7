"""Closed-form steady-state model: channel-busyness fixed point and metrics.

The contention schemes (CCA, CSMA-CA, ADP) share one structure: a frame at
the head of line performs up to ma+1 transmission attempts, each attempt
costing the scheme's accumulated duration w_j, with a constant probability
alpha of sensing the channel busy on any attempt.  alpha itself solves a
fixed point that balances the competitors' channel occupancy against their
busy-cycle length.  The SCM baseline has no sensing; its JReq survives a
round with the collision probability gamma instead.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .config import (MacParams, MacScheme, PowerTable, ProtocolConfig,
                     TimingTable, derive_power, derive_timing)

ALPHA_TOL = 1e-9
ALPHA_MAX_ITER = 10_000
ALPHA_DAMPING = 0.5
ALPHA_SCAN_POINTS = 1000
_ALPHA_CEIL = 1.0 - 1e-12


def accumulated_duration(scheme: MacScheme, j: int, mac: MacParams,
                         timing: TimingTable) -> float:
    """Mean accumulated contention duration w_j through the j-th attempt.

    CCA: j plain carrier-sense windows.  CSMA-CA: every attempt adds a mean
    backoff of (cw-1)/2 slots before its window.  ADP: plain windows until
    attempt adp_threshold, backoffs from there on.
    """
    if scheme is MacScheme.SCM:
        raise ValueError("SCM performs no sensing attempts; w_j is undefined")
    if not 1 <= j <= mac.ma + 1:
        raise ValueError(f"attempt index {j} outside 1..{mac.ma + 1}")
    mean_backoff = (mac.cw - 1) / 2.0 * timing.slot_duration
    if scheme is MacScheme.CCA:
        return j * timing.t_cca
    if scheme is MacScheme.CSMA_CA:
        return j * (mean_backoff + timing.t_cca)
    if scheme is MacScheme.ADP:
        if j < mac.adp_threshold:
            return j * timing.t_cca
        return (j + 1 - mac.adp_threshold) * mean_backoff + j * timing.t_cca
    raise ValueError(f"unknown scheme {scheme}")


@dataclass(frozen=True)
class ServiceProfile:
    """Per-scheme attempt cost table for one parameter set.

    w[j-1] is the accumulated duration through attempt j; backoff_time[j-1]
    is its backoff-only share.  t_loss/e_loss are the time and energy cost of
    exhausting all ma+1 attempts.
    """

    scheme: MacScheme
    w: tuple
    backoff_time: tuple
    t_loss: float
    e_loss: float
    e_attempts: tuple

    @property
    def ma(self) -> int:
        return len(self.w) - 1


def build_profile(scheme: MacScheme, mac: MacParams, timing: TimingTable,
                  power: PowerTable) -> ServiceProfile:
    w = tuple(accumulated_duration(scheme, j, mac, timing)
              for j in range(1, mac.ma + 2))
    backoff_time = tuple(w[j - 1] - j * timing.t_cca for j in range(1, mac.ma + 2))
    e_cca = timing.t_cca * power.cca
    e_attempts = tuple(backoff_time[j - 1] * power.backoff + j * e_cca
                       for j in range(1, mac.ma + 2))
    return ServiceProfile(scheme=scheme, w=w, backoff_time=backoff_time,
                          t_loss=w[-1], e_loss=e_attempts[-1],
                          e_attempts=e_attempts)


def p_loss(alpha: float, ma: int) -> float:
    """Probability that all ma+1 sensing attempts find the channel busy."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    return alpha ** (ma + 1)


def hol_delay(alpha: float, profile: ServiceProfile) -> float:
    """Mean head-of-line service time: success on attempt i+1 with weight
    alpha^i (1-alpha), plus the exhaustion branch."""
    ma = profile.ma
    total = sum(alpha**i * (1.0 - alpha) * profile.w[i] for i in range(ma + 1))
    return total + alpha ** (ma + 1) * profile.w[ma]


def a0(alpha: float, profile: ServiceProfile, lam: float, t_tr: float) -> float:
    """Probability a frame leaves behind an empty queue (no arrival during
    its service plus exchange)."""
    ma = profile.ma
    total = sum(
        alpha**i * (1.0 - alpha) * math.exp(-(profile.w[i] + t_tr) * lam)
        for i in range(ma + 1)
    )
    return total + alpha ** (ma + 1)


def expected_frames_served(a0_value: float) -> float:
    """Mean frames served per busy cycle under geometric cycle lengths."""
    if a0_value <= 0.0:
        raise ValueError("a0 must be positive")
    return 1.0 / a0_value


def _occupancy_gain(alpha, n_nodes, lam, profile, timing):
    """g(alpha): competitors' busy share implied by a candidate alpha."""
    ma = profile.ma
    ploss = alpha ** (ma + 1)
    a0_value = a0(alpha, profile, lam, timing.t_tr_mean)
    e_tau = 1.0 / a0_value
    e_hol = hol_delay(alpha, profile)
    numerator = ((n_nodes - 1) * (1.0 - ploss) * e_tau
                 * (timing.t_cca + timing.t_tr_mean))
    denominator = 1.0 / lam + e_tau * e_hol
    g = numerator / denominator
    if g < 0.0:
        return 0.0
    return min(g, _ALPHA_CEIL)


def alpha_residual(alpha: float, n_nodes: int, lam: float,
                   profile: ServiceProfile, timing: TimingTable) -> float:
    """g(alpha) - alpha; a root is a self-consistent busyness probability."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must be in [0, 1)")
    return _occupancy_gain(alpha, n_nodes, lam, profile, timing) - alpha


@dataclass(frozen=True)
class AlphaSolution:
    alpha: float
    residual: float
    iterations: int
    converged: bool
    bracket: tuple
    multiple_roots: bool = False
    method: str = "fixed-point"


def _scan_brackets(res, points=ALPHA_SCAN_POINTS):
    """Sign-change brackets of the residual on a uniform grid of [0, 1)."""
    hi = 1.0 - 1e-9
    xs = [i * hi / (points - 1) for i in range(points)]
    brackets = []
    prev_x, prev_f = xs[0], res(xs[0])
    for x in xs[1:]:
        f = res(x)
        if prev_f == 0.0 or (prev_f > 0.0) != (f > 0.0):
            brackets.append((prev_x, x))
        prev_x, prev_f = x, f
    return brackets


def bisect_alpha(n_nodes, lam, profile, timing, lo=0.0, hi=1.0 - 1e-9):
    """Plain bisection on the residual; independent of the damped iteration."""
    res = lambda a: alpha_residual(a, n_nodes, lam, profile, timing)
    flo, fhi = res(lo), res(hi)
    if flo <= 0.0:
        return lo
    if fhi >= 0.0:
        return hi
    while True:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            return mid
        if res(mid) > 0.0:
            lo = mid
        else:
            hi = mid


def solve_alpha(config: ProtocolConfig, timing: TimingTable = None,
                power: PowerTable = None,
                scheme: MacScheme = None) -> AlphaSolution:
    """Solve the busyness fixed point: damped iteration with bisection fallback.

    Returns the smallest non-negative root; flags the solution when the
    residual changes sign more than once on a 1000-point scan.
    """
    scheme = scheme or config.mac.scheme
    if scheme is MacScheme.SCM:
        raise ValueError("SCM has no busyness fixed point; use scm_gamma")
    timing = timing or derive_timing(config)
    power = power or derive_power(config)
    profile = build_profile(scheme, config.mac, timing, power)
    n, lam = config.traffic.n_nodes, config.traffic.lam
    res = lambda a: alpha_residual(a, n, lam, profile, timing)

    origin = res(0.0)
    if origin <= 0.0:
        # No positive occupancy at the origin: the root is alpha = 0 exactly.
        return AlphaSolution(alpha=0.0, residual=origin, iterations=0,
                             converged=abs(origin) < ALPHA_TOL,
                             bracket=(0.0, 0.0), method="origin")

    brackets = _scan_brackets(res)
    multiple = len(brackets) > 1

    alpha = 0.5
    best = float("inf")
    stalled = 0
    for iteration in range(1, ALPHA_MAX_ITER + 1):
        g = _occupancy_gain(alpha, n, lam, profile, timing)
        gap = abs(g - alpha)
        if gap < ALPHA_TOL:
            # Damped iteration found *a* root; accept it only if it is the
            # smallest one the scan saw.
            if not brackets or alpha <= brackets[0][1] + 1e-6:
                return AlphaSolution(alpha=alpha, residual=g - alpha,
                                     iterations=iteration, converged=True,
                                     bracket=(alpha, alpha),
                                     multiple_roots=multiple,
                                     method="fixed-point")
            break
        # When the map is steeply contracting-divergent the iteration cycles
        # without progress; hand over to bisection early.
        if gap < best * 0.999:
            best, stalled = gap, 0
        else:
            stalled += 1
            if stalled >= 100:
                break
        alpha = (1.0 - ALPHA_DAMPING) * alpha + ALPHA_DAMPING * g

    lo, hi = brackets[0] if brackets else (0.0, 1.0 - 1e-9)
    root = bisect_alpha(n, lam, profile, timing, lo, hi)
    residual = res(root)
    return AlphaSolution(alpha=root, residual=residual,
                         iterations=ALPHA_MAX_ITER,
                         converged=abs(residual) < ALPHA_TOL,
                         bracket=(lo, hi), multiple_roots=multiple,
                         method="bisection")


def scm_gamma(n_nodes: int, lam: float, t_tr: float) -> float:
    """JReq collision probability for the no-MAC baseline."""
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    exponent = (n_nodes - 1) * lam * t_tr * (1.0 + math.exp(-t_tr * lam))
    return -math.expm1(-exponent)


def exchange_energy(timing: TimingTable, power: PowerTable,
                    e_delta: float) -> float:
    """Energy of one full exchange: wake-call listen, two mode switches,
    JReq out, assignment in, e_delta data frames out, ACK in."""
    return (timing.t_wuc * power.wuc_listen
            + timing.t_mst * power.mode_switch
            + timing.t_jreq * power.tx
            + timing.t_tdma * power.rx
            + e_delta * timing.t_t * power.tx
            + timing.t_ack * power.rx
            + timing.t_mst * power.mode_switch)


def avg_delay(scheme: MacScheme, alpha_or_gamma: float,
              profile: ServiceProfile, timing: TimingTable) -> float:
    """Mean time from head-of-line arrival to ACK reception (or to discard)."""
    t_tr = timing.t_tr_mean
    if scheme is MacScheme.SCM:
        gamma = alpha_or_gamma
        return gamma * (t_tr - timing.t_ack) + (1.0 - gamma) * t_tr
    alpha = alpha_or_gamma
    ploss = p_loss(alpha, profile.ma)
    t_loss = profile.t_loss
    if ploss >= 1.0:
        return t_loss
    t_tq = (hol_delay(alpha, profile) - ploss * t_loss) / (1.0 - ploss) + t_tr
    return (1.0 - ploss) * t_tq + ploss * t_loss


def energy_hol(alpha: float, profile: ServiceProfile) -> float:
    """Energy mirror of the head-of-line delay: expected backoff plus sensing
    energy over the stopping attempt, plus the exhaustion branch."""
    ma = profile.ma
    total = sum(alpha**i * (1.0 - alpha) * profile.e_attempts[i]
                for i in range(ma + 1))
    return total + alpha ** (ma + 1) * profile.e_loss


def avg_energy(scheme: MacScheme, alpha_or_gamma: float,
               profile: ServiceProfile, timing: TimingTable,
               power: PowerTable, e_delta: float) -> float:
    """Mean node energy spent on one frame's round participation."""
    e_tr = exchange_energy(timing, power, e_delta)
    if scheme is MacScheme.SCM:
        gamma = alpha_or_gamma
        e_ack = timing.t_ack * power.rx
        return gamma * (e_tr - e_ack) + (1.0 - gamma) * e_tr
    alpha = alpha_or_gamma
    ploss = p_loss(alpha, profile.ma)
    if ploss >= 1.0:
        return profile.e_loss
    e_tq = (energy_hol(alpha, profile) - ploss * profile.e_loss) \
        / (1.0 - ploss) + e_tr
    return (1.0 - ploss) * e_tq + ploss * profile.e_loss


@dataclass(frozen=True)
class SchemeMetrics:
    scheme: MacScheme
    n_nodes: int
    p_loss: float
    d_a: float
    e_r: float
    alpha: float = None
    gamma: float = None
    e_d_hol: float = None
    a0: float = None
    e_tau: float = None
    solution: AlphaSolution = None


class SolverError(RuntimeError):
    """Fixed-point solver failed to converge."""


def evaluate_scheme(config: ProtocolConfig, scheme: MacScheme = None,
                    n_nodes: int = None) -> SchemeMetrics:
    """Full analytic metric bundle for one (scheme, cluster size) point."""
    scheme = scheme or config.mac.scheme
    if n_nodes is not None:
        config = config.replace(
            traffic=dataclasses.replace(config.traffic, n_nodes=n_nodes))
    config.validate()
    n = config.traffic.n_nodes
    lam = config.traffic.lam
    timing = derive_timing(config)
    power = derive_power(config)
    e_delta = config.traffic.mean_delta

    if scheme is MacScheme.SCM:
        gamma = scm_gamma(n, lam, timing.t_tr_mean)
        profile = None
        return SchemeMetrics(
            scheme=scheme, n_nodes=n, gamma=gamma, p_loss=gamma,
            d_a=avg_delay(scheme, gamma, profile, timing),
            e_r=avg_energy(scheme, gamma, profile, timing, power, e_delta),
        )

    profile = build_profile(scheme, config.mac, timing, power)
    solution = solve_alpha(config, timing, power, scheme)
    if not solution.converged:
        raise SolverError(
            f"busyness fixed point did not converge for {scheme.value} at "
            f"N={n}: residual {solution.residual:.3e} in bracket "
            f"{solution.bracket}")
    alpha = solution.alpha
    ploss = p_loss(alpha, config.mac.ma)
    a0_value = a0(alpha, profile, lam, timing.t_tr_mean)
    return SchemeMetrics(
        scheme=scheme, n_nodes=n, alpha=alpha, p_loss=ploss,
        e_d_hol=hol_delay(alpha, profile), a0=a0_value,
        e_tau=expected_frames_served(a0_value),
        d_a=avg_delay(scheme, alpha, profile, timing),
        e_r=avg_energy(scheme, alpha, profile, timing, power, e_delta),
        solution=solution,
    )
