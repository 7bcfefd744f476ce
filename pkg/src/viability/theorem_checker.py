"""Boundary sufficient conditions for invariance, evaluated over an eps sweep.

Two boundary conditions are estimated on sampled offset surfaces S_eps and
decided by explicit finite rules:

- tangency: sup over noise channels and boundary samples of |b_j . nu| must
  vanish faster than eps (decided by a log-log slope fit plus an absolute
  threshold at the smallest eps);
- inward pressure: the drift projected on the outward normal, corrected by
  -1/2 sum_k nu^T (Db_k) b_k, must stay below a negative margin as eps shrinks.

No finite computation certifies a limit, so the decision parameters
(delta_abs, delta_margin, p_min) are recorded in the report and every verdict
is a deterministic, re-checkable function of the stored profiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import geometry, sde_model
from .errors import ViabilityError
from .geometry import BoundarySample, ImplicitDomain
from .sde_model import RegularityReport, SdeModel
from .seeds import child_seed

VERDICT_HOLDS = "holds"
VERDICT_FAILS = "fails"
VERDICT_INCONCLUSIVE = "inconclusive"

REFINE_TOP = 5
REFINE_STEPS = 20


@dataclass
class CheckerConfig:
    eps_grid: Sequence[float] = (0.2, 0.1, 0.05, 0.025)
    samples_per_eps: int = 200
    delta_abs: float = 0.05
    delta_margin: float = 1e-3
    p_min: float = 1.5
    time_grid: Sequence[float] = (0.0,)
    seed: int = 12345
    lipschitz_L: float = 10.0
    regularity_pairs: int = 200
    regularity_box: tuple | None = None


@dataclass
class ConditionReport:
    """Profiles, decision parameters, and verdicts; self-contained in the
    sense that re-running the verdict rules on the stored profiles reproduces
    the stored verdicts exactly."""

    eps_grid: list
    cond2_sup: list
    cond2_ratio: list
    cond2_verdict: str
    cond3_sup: list
    cond3_verdict: str
    delta_abs: float
    delta_margin: float
    p_min: float
    samples_per_eps: int
    time_grid: list
    seed: int
    regularity: RegularityReport | None = None
    invariance_predicted: bool | None = None
    errors: list = field(default_factory=list)


def _tangent_basis(nu: np.ndarray) -> list[np.ndarray]:
    n = nu.shape[0]
    basis = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        t = e - np.dot(e, nu) * nu
        for b in basis:
            t = t - np.dot(t, b) * b
        norm = np.linalg.norm(t)
        if norm > 1e-8:
            basis.append(t / norm)
        if len(basis) == n - 1:
            break
    return basis


def _reproject(domain: ImplicitDomain, eps: float, x: np.ndarray) -> BoundarySample:
    foot, _ = geometry.project_to_boundary(domain, x)
    nu = geometry.outward_normal(domain, foot)
    return BoundarySample(point=foot + eps * nu, normal=nu, offset=eps)


def _refine_sup(
    domain: ImplicitDomain,
    eps: float,
    samples: Sequence[BoundarySample],
    objective: Callable[[BoundarySample], float],
    values: np.ndarray,
) -> float:
    """Sharpen a sampled boundary sup by local ascent along the surface.

    The best few samples are walked along tangent directions with a shrinking
    step, re-projecting onto S_eps after each move. Deterministic, and the
    result is never below the sampled maximum.
    """
    best = float(np.max(values))
    order = np.argsort(values)[::-1][:REFINE_TOP]
    scale = max(eps, 0.05 * geometry.bounding_radius(domain))
    for start in order:
        sample = samples[start]
        current = float(values[start])
        step = 0.5 * scale
        for _ in range(REFINE_STEPS):
            improved = False
            for t in _tangent_basis(sample.normal):
                for sgn in (1.0, -1.0):
                    cand = _reproject(domain, eps, sample.point + sgn * step * t)
                    val = objective(cand)
                    if val > current:
                        sample, current, improved = cand, val, True
            if not improved:
                step *= 0.5
                if step < 1e-6 * scale:
                    break
        best = max(best, current)
    return best


def _profile(
    model: SdeModel,
    domain: ImplicitDomain,
    eps_grid: Sequence[float],
    time_grid: Sequence[float],
    samples_per_eps: int,
    seed: int,
    pointwise: Callable[[float, BoundarySample], float],
) -> list[float]:
    _validate_grid(eps_grid)
    sups = []
    for e_idx, eps in enumerate(eps_grid):
        samples = geometry.sample_offset_boundary(
            domain, eps, samples_per_eps, child_seed(seed, e_idx)
        )
        objective = lambda smp: max(pointwise(s, smp) for s in time_grid)
        values = np.array([objective(smp) for smp in samples])
        sups.append(_refine_sup(domain, eps, samples, objective, values))
    return sups


def _validate_grid(eps_grid: Sequence[float]):
    if len(eps_grid) < 3:
        raise ValueError("eps_grid needs at least 3 entries")
    arr = np.asarray(eps_grid, dtype=float)
    if np.any(arr <= 0) or np.any(np.diff(arr) >= 0):
        raise ValueError("eps_grid must be positive and strictly decreasing")


def condition2_profile(
    model: SdeModel,
    domain: ImplicitDomain,
    eps_grid: Sequence[float],
    time_grid: Sequence[float],
    samples_per_eps: int,
    seed: int,
) -> list[float]:
    """Per-eps sup over samples, times, and noise channels of |b_j . nu|."""

    def pointwise(s, smp):
        return max(
            abs(float(np.dot(col(s, smp.point), smp.normal)))
            for col in model.diffusion_columns
        )

    return _profile(model, domain, eps_grid, time_grid, samples_per_eps, seed, pointwise)


def condition2_verdict(
    profile: Sequence[float],
    eps_grid: Sequence[float],
    delta_abs: float = 0.05,
    p_min: float = 1.5,
) -> str:
    """Decide whether the tangency profile behaves like o(eps).

    holds: every sup is at most delta_abs (identically tangent case), or the
    log-log least-squares slope is at least p_min and sup/eps at the smallest
    eps is at most delta_abs. fails: sup/eps stays at or above delta_abs and
    does not decrease as eps shrinks. Anything else is inconclusive.
    """
    sup = np.asarray(profile, dtype=float)
    eps = np.asarray(eps_grid, dtype=float)
    if sup.shape != eps.shape or sup.size < 3:
        raise ValueError("profile and eps_grid must align with >= 3 entries")

    if np.all(sup <= delta_abs):
        return VERDICT_HOLDS

    ratio = sup / eps
    positive = sup > 0.0
    if np.sum(positive) >= 2:
        slope = np.polyfit(np.log(eps[positive]), np.log(sup[positive]), 1)[0]
        if slope >= p_min and ratio[-1] <= delta_abs:
            return VERDICT_HOLDS

    nondecreasing = np.all(np.diff(ratio) >= -1e-9 * np.maximum(ratio[:-1], 1e-300))
    if np.all(ratio >= delta_abs) and nondecreasing:
        return VERDICT_FAILS
    return VERDICT_INCONCLUSIVE


def condition3_value(
    model: SdeModel, domain: ImplicitDomain, s: float, sample: BoundarySample
) -> float:
    """Drift pressure along the normal with the diffusion correction:
    a . nu - 1/2 sum_k nu^T (Db_k) b_k evaluated at the sample point."""
    z, nu = sample.point, sample.normal
    a = model.drift(s, z)
    jac = sde_model.diffusion_jacobian(model, s, z)
    corr = 0.0
    for k, col in enumerate(model.diffusion_columns):
        b = col(s, z)
        corr += float(nu @ jac[k] @ b)
    return float(np.dot(a, nu)) - 0.5 * corr


def condition3_profile(
    model: SdeModel,
    domain: ImplicitDomain,
    eps_grid: Sequence[float],
    time_grid: Sequence[float],
    samples_per_eps: int,
    seed: int,
) -> list[float]:
    """Per-eps sup over samples and times of the condition-3 functional."""

    def pointwise(s, smp):
        return condition3_value(model, domain, s, smp)

    return _profile(model, domain, eps_grid, time_grid, samples_per_eps, seed, pointwise)


def condition3_verdict(profile: Sequence[float], delta_margin: float = 1e-3) -> str:
    """holds when the sup at the two smallest eps sits below -delta_margin;
    fails when the smallest-eps sup reaches +delta_margin; else inconclusive."""
    sup = np.asarray(profile, dtype=float)
    if sup.size < 3:
        raise ValueError("profile needs >= 3 entries")
    if sup[-1] <= -delta_margin and sup[-2] <= -delta_margin:
        return VERDICT_HOLDS
    if sup[-1] >= delta_margin:
        return VERDICT_FAILS
    return VERDICT_INCONCLUSIVE


def _default_box(domain: ImplicitDomain) -> tuple[np.ndarray, np.ndarray]:
    r = geometry.bounding_radius(domain) + 1.0
    lo = domain.center - r
    hi = domain.center + r
    return lo, hi


def theorem1_report(
    model: SdeModel, domain: ImplicitDomain, config: CheckerConfig | None = None
) -> ConditionReport:
    """Run the regularity spot check and both boundary conditions.

    Invariance is predicted only when the regularity check passes and both
    condition verdicts are holds. Failures inside one phase are recorded in
    the report and leave the other phases intact.
    """
    cfg = config or CheckerConfig()
    if model.dimension != domain.dimension:
        raise ValueError("model and domain dimensions differ")
    _validate_grid(cfg.eps_grid)

    report = ConditionReport(
        eps_grid=[float(e) for e in cfg.eps_grid],
        cond2_sup=[],
        cond2_ratio=[],
        cond2_verdict=VERDICT_INCONCLUSIVE,
        cond3_sup=[],
        cond3_verdict=VERDICT_INCONCLUSIVE,
        delta_abs=cfg.delta_abs,
        delta_margin=cfg.delta_margin,
        p_min=cfg.p_min,
        samples_per_eps=cfg.samples_per_eps,
        time_grid=[float(t) for t in cfg.time_grid],
        seed=cfg.seed,
    )

    try:
        box = cfg.regularity_box or _default_box(domain)
        report.regularity = sde_model.check_regularity(
            model,
            cfg.lipschitz_L,
            box,
            cfg.regularity_pairs,
            child_seed(cfg.seed, 1001),
            times=cfg.time_grid,
        )
    except (ViabilityError, ValueError) as exc:
        report.errors.append(f"regularity: {exc}")

    try:
        prof2 = condition2_profile(
            model, domain, cfg.eps_grid, cfg.time_grid, cfg.samples_per_eps, cfg.seed
        )
        report.cond2_sup = [float(v) for v in prof2]
        report.cond2_ratio = [float(v / e) for v, e in zip(prof2, cfg.eps_grid)]
        report.cond2_verdict = condition2_verdict(
            prof2, cfg.eps_grid, cfg.delta_abs, cfg.p_min
        )
    except (ViabilityError, ValueError) as exc:
        report.errors.append(f"condition2: {exc}")

    try:
        prof3 = condition3_profile(
            model, domain, cfg.eps_grid, cfg.time_grid, cfg.samples_per_eps, cfg.seed
        )
        report.cond3_sup = [float(v) for v in prof3]
        report.cond3_verdict = condition3_verdict(prof3, cfg.delta_margin)
    except (ViabilityError, ValueError) as exc:
        report.errors.append(f"condition3: {exc}")

    report.invariance_predicted = bool(
        report.regularity is not None
        and report.regularity.passed
        and report.cond2_verdict == VERDICT_HOLDS
        and report.cond3_verdict == VERDICT_HOLDS
    )
    return report
