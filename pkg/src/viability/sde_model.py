"""SDE coefficient families, the diffusion matrix, and regularity spot checks.

Models represent dX = a(t, x) dt + sum_k b_k(t, x) dW_k with n driving noise
channels in dimension n. Built-in families are autonomous, but every evaluation
threads a time argument so inhomogeneous families can be added behind the same
interface. Coefficient callables broadcast over a leading batch axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

FD_REL_STEP = 1e-6


@dataclass(frozen=True)
class SdeModel:
    """Drift, diffusion columns, and their spatial derivatives.

    diffusion_columns holds one callable per noise channel; jacobian returns
    the stacked arrays d b_k,i / d x_j with shape (channels, n, n). Models are
    immutable after construction and all evaluations are pure.
    """

    dimension: int
    family: str
    drift: Callable
    diffusion_columns: tuple
    jacobian: Callable | None
    params: dict


@dataclass(frozen=True)
class RegularityReport:
    """Sampled Lipschitz and linear-growth ratios against a bound L.

    This is a spot check on random pairs, not a proof: it can only refute the
    bound, never certify it.
    """

    lipschitz_estimate: float
    growth_estimate: float
    sample_count: int
    bound: float
    passed: bool


def brownian(dimension: int, scale: float = 1.0) -> SdeModel:
    """Pure diffusion: a = 0, b_k = scale * e_k."""
    n = dimension
    s = float(scale)

    def drift(t, x):
        x = np.asarray(x, dtype=float)
        return np.zeros_like(x)

    def make_col(k):
        def col(t, x):
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            out[..., k] = s
            return out

        return col

    cols = tuple(make_col(k) for k in range(n))

    def jac(t, x):
        return np.zeros((n, n, n))

    return SdeModel(n, "brownian", drift, cols, jac, {"scale": s})


def ou_inward(dimension: int, rate: float = 1.0) -> SdeModel:
    """Deterministic contraction toward the origin: a = -rate * x, no noise."""
    n = dimension
    r = float(rate)

    def drift(t, x):
        return -r * np.asarray(x, dtype=float)

    def make_col():
        def col(t, x):
            return np.zeros_like(np.asarray(x, dtype=float))

        return col

    cols = tuple(make_col() for _ in range(n))

    def jac(t, x):
        return np.zeros((n, n, n))

    return SdeModel(n, "ou_inward", drift, cols, jac, {"rate": r})


def rotational(spin: float = 1.0, inward_rate: float = 1.0) -> SdeModel:
    """Planar model with inward drift and tangential noise.

    a(x) = -inward_rate * x; the single active noise column is
    b_1(x) = spin * (-x_2, x_1), which is orthogonal to x everywhere, so the
    noise never pushes across origin-centered circles.
    """
    s, rho = float(spin), float(inward_rate)

    def drift(t, x):
        return -rho * np.asarray(x, dtype=float)

    def col1(t, x):
        x = np.asarray(x, dtype=float)
        return np.stack([-s * x[..., 1], s * x[..., 0]], axis=-1)

    def col2(t, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def jac(t, x):
        out = np.zeros((2, 2, 2))
        out[0, 0, 1] = -s
        out[0, 1, 0] = s
        return out

    return SdeModel(
        2, "rotational", drift, (col1, col2), jac, {"spin": s, "inward_rate": rho}
    )


def linear(A, c=None, B=None, d=None) -> SdeModel:
    """Affine family: a = A x + c, b_k = B_k x + d_k.

    B is a sequence of n matrices and d a sequence of n vectors (zeros when
    omitted). The analytic Jacobian is verified against finite differences on
    construction.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("A must be square")
    c = np.zeros(n) if c is None else np.asarray(c, dtype=float)
    if B is None:
        B = [np.zeros((n, n)) for _ in range(n)]
    B = [np.asarray(Bk, dtype=float) for Bk in B]
    if d is None:
        d = [np.zeros(n) for _ in range(n)]
    d = [np.asarray(dk, dtype=float) for dk in d]
    if len(B) != n or len(d) != n:
        raise ValueError("need one B matrix and one d vector per channel")

    def drift(t, x):
        x = np.asarray(x, dtype=float)
        return x @ A.T + c

    def make_col(k):
        Bk, dk = B[k], d[k]

        def col(t, x):
            x = np.asarray(x, dtype=float)
            return x @ Bk.T + dk

        return col

    cols = tuple(make_col(k) for k in range(n))
    jac_stack = np.stack(B)

    def jac(t, x):
        return jac_stack

    model = SdeModel(
        n, "linear", drift, cols, jac,
        {"A": A, "c": c, "B": [Bk for Bk in B], "d": [dk for dk in d]},
    )
    _self_test_jacobian(model)
    return model


def zero(dimension: int) -> SdeModel:
    """All coefficients zero (frozen paths)."""
    return linear(np.zeros((dimension, dimension)))


def outward(dimension: int, rate: float = 1.0) -> SdeModel:
    """Pure outward drift a = +rate * x, no noise; a negative control."""
    return linear(rate * np.eye(dimension))


def from_config(cfg: dict) -> SdeModel:
    family = cfg.get("family")
    if family == "brownian":
        return brownian(int(cfg["dimension"]), float(cfg.get("scale", 1.0)))
    if family == "ou_inward":
        return ou_inward(int(cfg["dimension"]), float(cfg.get("rate", 1.0)))
    if family == "rotational":
        return rotational(
            float(cfg.get("spin", 1.0)), float(cfg.get("inward_rate", 1.0))
        )
    if family == "linear":
        return linear(cfg["A"], cfg.get("c"), cfg.get("B"), cfg.get("d"))
    raise ValueError(f"unknown model family: {family!r}")


def _self_test_jacobian(model: SdeModel, points: int = 3, seed: int = 424242):
    rng = np.random.default_rng(seed)
    for _ in range(points):
        x = rng.uniform(-1.0, 1.0, size=model.dimension)
        ana = model.jacobian(0.0, x)
        num = _fd_jacobian(model, 0.0, x)
        if not np.allclose(ana, num, rtol=1e-8, atol=1e-8):
            raise ValueError("analytic diffusion Jacobian disagrees with finite differences")


def _fd_jacobian(model: SdeModel, s: float, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = model.dimension
    k_channels = len(model.diffusion_columns)
    h = FD_REL_STEP * (1.0 + float(np.linalg.norm(x)))
    out = np.zeros((k_channels, n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        for k, col in enumerate(model.diffusion_columns):
            out[k, :, j] = (col(s, x + e) - col(s, x - e)) / (2.0 * h)
    return out


def sigma(model: SdeModel, s: float, x) -> np.ndarray:
    """Diffusion matrix sigma_ij = sum_k b_ki b_kj; symmetric PSD."""
    x = np.asarray(x, dtype=float)
    n = model.dimension
    out = np.zeros(x.shape[:-1] + (n, n)) if x.ndim > 1 else np.zeros((n, n))
    for col in model.diffusion_columns:
        b = col(s, x)
        out += np.einsum("...i,...j->...ij", b, b)
    return out


def diffusion_jacobian(model: SdeModel, s: float, x) -> np.ndarray:
    """d b_k,i / d x_j stacked over channels, shape (channels, n, n).

    Analytic for the built-in families; central finite differences with step
    1e-6 * (1 + |x|) otherwise.
    """
    if model.jacobian is not None:
        return model.jacobian(s, np.asarray(x, dtype=float))
    return _fd_jacobian(model, s, np.asarray(x, dtype=float))


def check_regularity(
    model: SdeModel,
    L: float,
    box: Sequence,
    pairs: int,
    seed: int,
    times: Sequence[float] = (0.0,),
) -> RegularityReport:
    """Spot-check Lipschitz and linear-growth ratios on random pairs in a box.

    box is (lower, upper) coordinate bounds. The Lipschitz ratio is
    (|a(x) - a(y)| + sum_k |b_k(x) - b_k(y)|) / |x - y| and the growth ratio is
    (|a|^2 + sum_k |b_k|^2) / (1 + |x|^2); the verdict passes when the sampled
    maxima fit under L and L^2 respectively.
    """
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed)))
    max_lip = 0.0
    max_growth = 0.0
    for _ in range(pairs):
        x = rng.uniform(lo, hi)
        y = rng.uniform(lo, hi)
        for s in times:
            for pt in (x, y):
                a = model.drift(s, pt)
                g = float(np.dot(a, a))
                for col in model.diffusion_columns:
                    b = col(s, pt)
                    g += float(np.dot(b, b))
                max_growth = max(max_growth, g / (1.0 + float(np.dot(pt, pt))))
            gap = float(np.linalg.norm(x - y))
            if gap < 1e-12:
                continue
            num = float(np.linalg.norm(model.drift(s, x) - model.drift(s, y)))
            for col in model.diffusion_columns:
                num += float(np.linalg.norm(col(s, x) - col(s, y)))
            max_lip = max(max_lip, num / gap)
    passed = max_lip <= L and max_growth <= L * L
    return RegularityReport(max_lip, max_growth, pairs, float(L), passed)
