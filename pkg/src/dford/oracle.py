"""Brute-force reference values for every expectation-level claim.

Each function enumerates the K possible queried labels and weights them by
their sampling probability, so results are exact up to float rounding.
Only the label distribution is shared with the learner code; the label
estimates and losses are re-derived here from scratch.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .sampling import mixture

INF = math.inf
GAMMA_GRID = (0.2, 0.4, 0.6, 0.8)


def _full_thresholds(thresholds) -> list[float]:
    return [float(v) for v in thresholds] + [INF]


def _indicator_active(z: float, score: float, th: float) -> bool:
    if z == 0.0:
        return False
    v = z * (score - th)
    return v <= 0  # nan (never produced for z != 0) would count as inactive


def true_z(K: int, y_true: int) -> np.ndarray:
    return np.array([1.0 if i < y_true else -1.0 for i in range(1, K + 1)])


def true_tau(K: int, y_true: int, score: float, thresholds) -> np.ndarray:
    th = _full_thresholds(thresholds)
    z = true_z(K, y_true)
    return np.array([z[i] if _indicator_active(z[i], score, th[i]) else 0.0 for i in range(K)])


def _outcomes(K: int, y_true: int, y_hat: int, gamma: float):
    """``(label, probability, bit)`` for each label with nonzero probability."""
    probs = mixture(K, y_hat, gamma).probs
    for s in range(1, K + 1):
        p = float(probs[s - 1])
        if p > 0:
            yield s, p, 1 if s < y_true else 0


def exact_expectation_z(K: int, y_true: int, y_hat: int, gamma: float, score: float = 0.0,
                        thresholds=None) -> np.ndarray:
    out = np.zeros(K)
    for s, p, d in _outcomes(K, y_true, y_hat, gamma):
        out[s - 1] += p * ((2 * d - 1) / p)
    return out


def exact_expectation_tau(K: int, y_true: int, y_hat: int, gamma: float, score: float,
                          thresholds) -> np.ndarray:
    th = _full_thresholds(thresholds)
    out = np.zeros(K)
    for s, p, d in _outcomes(K, y_true, y_hat, gamma):
        z = (2 * d - 1) / p
        if _indicator_active(z, score, th[s - 1]):
            out[s - 1] += p * z
    return out


def regularized_loss(w, theta, x, y_true: int, lam: float) -> float:
    w = np.asarray(w, dtype=float)
    theta = np.asarray(theta, dtype=float)
    f = float(np.dot(w, x))
    K = theta.shape[0] + 1
    z = true_z(K, y_true)[:-1]
    hinge = np.maximum(0.0, -z * (f - theta)).sum()
    return 0.5 * lam * (float(np.dot(w, w)) + float(np.dot(theta, theta))) + float(hinge)


def analytic_subgradient(w, theta, x, y_true: int, lam: float) -> tuple[np.ndarray, np.ndarray]:
    w = np.asarray(w, dtype=float)
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    K = theta.shape[0] + 1
    tau = true_tau(K, y_true, float(np.dot(w, x)), theta)
    return lam * w - tau.sum() * x, lam * theta + tau[:-1]


def exact_expectation_gradient(w, theta, x, y_true: int, y_hat: int, gamma: float,
                               lam: float) -> tuple[np.ndarray, np.ndarray]:
    """``E[(lam w - tau~ x, lam theta + tau~ e_s)]`` over the queried label."""
    w = np.asarray(w, dtype=float)
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    K = theta.shape[0] + 1
    f = float(np.dot(w, x))
    th = _full_thresholds(theta)
    g_w = np.zeros_like(w)
    g_theta = np.zeros_like(theta)
    for s, p, d in _outcomes(K, y_true, y_hat, gamma):
        z = (2 * d - 1) / p
        tau = z if _indicator_active(z, f, th[s - 1]) else 0.0
        e = np.zeros(K - 1)
        if s < K:
            e[s - 1] = tau
        g_w += p * (lam * w - tau * x)
        g_theta += p * (lam * theta + e)
    return g_w, g_theta


def is_kink_free(w, theta, x, margin: float = 1e-3) -> bool:
    f = float(np.dot(w, x))
    return bool(np.all(np.abs(f - np.asarray(theta)) > margin))


def finite_difference_gradient(w, theta, x, y_true: int, lam: float,
                               h: float = 1e-5) -> tuple[np.ndarray, np.ndarray]:
    u = np.concatenate([np.asarray(w, float), np.asarray(theta, float)])
    dim = len(w)
    grad = np.zeros_like(u)
    for j in range(u.shape[0]):
        up, dn = u.copy(), u.copy()
        up[j] += h
        dn[j] -= h
        grad[j] = (regularized_loss(up[:dim], up[dim:], x, y_true, lam)
                   - regularized_loss(dn[:dim], dn[dim:], x, y_true, lam)) / (2 * h)
    return grad[:dim], grad[dim:]


# ---------------------------------------------------------------------------
# bounds


def tau_moment_bound(K: int, gamma: float) -> float:
    return 2.0 * K * K / gamma * (1.0 + math.log(K))


def exact_tau_moments(K: int, y_true: int, y_hat: int, gamma: float, score: float,
                      thresholds) -> tuple[float, float]:
    """``(E|tau~|, E[tau~^2])`` at the queried label."""
    th = _full_thresholds(thresholds)
    m1 = m2 = 0.0
    for s, p, d in _outcomes(K, y_true, y_hat, gamma):
        z = (2 * d - 1) / p
        if _indicator_active(z, score, th[s - 1]):
            m1 += p * abs(z)
            m2 += p * z * z
    return m1, m2


def inverse_prob_sum(K: int, y_hat: int, gamma: float) -> float:
    return float(np.sum(1.0 / mixture(K, y_hat, gamma).probs))


def exact_grad_sq(w, theta, x, y_true: int, y_hat: int, gamma: float, lam: float) -> float:
    """``E||g||^2`` over the queried label, in closed form per outcome."""
    f = float(np.dot(w, x))
    xx = float(np.dot(x, x))
    base = lam * lam * (float(np.dot(w, w)) + float(np.dot(theta, theta)))
    K = len(theta) + 1
    th = _full_thresholds(theta)
    total = 0.0
    for s, p, d in _outcomes(K, y_true, y_hat, gamma):
        z = (2 * d - 1) / p
        tau = z if _indicator_active(z, f, th[s - 1]) else 0.0
        val = base - 2 * lam * tau * f + tau * tau * xx
        if s < K:
            val += 2 * lam * tau * th[s - 1] + tau * tau
        total += p * val
    return total


@dataclass
class BoundCheck:
    name: str
    n: int = 0
    violations: int = 0
    max_ratio: float = 0.0
    detail: dict = field(default_factory=dict)

    def observe(self, value: float, bound: float):
        self.n += 1
        ratio = value / bound
        self.max_ratio = max(self.max_ratio, ratio)
        if value > bound:
            self.violations += 1

    @property
    def passed(self) -> bool:
        return self.violations == 0


@dataclass
class BoundReport:
    checks: list[BoundCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"schema": "dford-bounds/1", "passed": self.passed,
                "checks": [{**asdict(c), "passed": c.passed} for c in self.checks]}


def random_configs(K: int, draws: int, rng: np.random.Generator, scale: float = 2.0):
    """``draws`` random ``(score, thresholds)`` pairs; thresholds may be unsorted."""
    for _ in range(draws):
        yield float(rng.normal(scale=scale)), rng.normal(scale=scale, size=K - 1)


def enumerable_bound_checks(K_values: Iterable[int] = range(2, 9),
                            gammas: Sequence[float] = GAMMA_GRID, draws: int = 50,
                            seed: int = 0, inverse_K_max: int = 50) -> list[BoundCheck]:
    rng = np.random.default_rng(seed)
    abs_check = BoundCheck("E|tau~| <= K")
    sq_check = BoundCheck("E[tau~^2] <= 2K^2/gamma (1 + ln K)")
    for K in K_values:
        for gamma in gammas:
            bound = tau_moment_bound(K, gamma)
            for y_true in range(1, K + 1):
                for y_hat in range(1, K + 1):
                    for score, theta in random_configs(K, draws, rng):
                        m1, m2 = exact_tau_moments(K, y_true, y_hat, gamma, score, theta)
                        abs_check.observe(m1, K)
                        sq_check.observe(m2, bound)
    inv_check = BoundCheck("sum 1/P <= 2K^2/gamma (1 + ln K)", detail={"K_max": inverse_K_max})
    for K in range(2, inverse_K_max + 1):
        for gamma in gammas:
            for y_hat in range(1, K + 1):
                inv_check.observe(inverse_prob_sum(K, y_hat, gamma), tau_moment_bound(K, gamma))
    return [abs_check, sq_check, inv_check]


def trajectory_bound_checks(seeds: Sequence[int] = tuple(range(10)), T: int = 2000,
                            K: int = 5, d: int = 5, lam: float = 1.0, gamma: float = 0.4,
                            cadence: int = 100) -> list[BoundCheck]:
    """Sample-mean checks of the norm and gradient bounds along DFORD-Linear runs.

    The bounds hold in expectation, so each checkpoint compares the mean
    over seeds plus three standard errors' slack against the bound.
    """
    from .data import generate_synthetic
    from .harness import DirectionalOracle
    from .linear import DFORDLinear, LinearLearnerConfig

    ds = generate_synthetic(2000, d, K, seed=12345)
    R = float(np.max(np.linalg.norm(ds.features, axis=1)))
    n_ckpt = T // cadence
    u_norm = np.zeros((len(seeds), n_ckpt))
    u_sq = np.zeros((len(seeds), n_ckpt))
    g_sq = np.zeros((len(seeds), T))
    ts = np.zeros(n_ckpt, dtype=int)
    for r, seed in enumerate(seeds):
        learner = DFORDLinear(LinearLearnerConfig(K=K, dim=d, lam=lam, gamma=gamma, seed=seed))
        idx = np.random.default_rng(seed).integers(0, ds.n, size=T)
        for n in range(T):
            x = ds.features[idx[n]]
            y = int(ds.labels[idx[n]])
            y_hat = learner.predict(x)
            g_sq[r, n] = exact_grad_sq(learner.w, learner.theta, x, y, y_hat, gamma, lam)
            t = learner.t
            learner.step(x, DirectionalOracle(y))
            if (n + 1) % cadence == 0:
                c = (n + 1) // cadence - 1
                ts[c] = t
                u_norm[r, c] = math.sqrt(learner.norm_sq)
                u_sq[r, c] = learner.norm_sq

    def slack(a):
        return a.mean(0) - 3 * a.std(0, ddof=1) / math.sqrt(a.shape[0]) if a.shape[0] > 1 else a.mean(0)

    log_term = 1.0 + math.log(K)
    norm_check = BoundCheck("E||u|| <= K sqrt(R^2+1)/lam", detail={"R": R})
    for v in slack(u_norm):
        norm_check.observe(v, K * math.sqrt(R * R + 1) / lam)
    sq_check = BoundCheck("E||u||^2 <= (R^2+1)K^2/lam^2 (6/(t gamma)(1+ln K) + 2)")
    tight = 0.0
    for v, t in zip(slack(u_sq), ts):
        sq_check.observe(v, (R * R + 1) * K * K / lam ** 2 * (6 / (t * gamma) * log_term + 2))
        tight = max(tight, v / ((R * R + 1) * K * K / lam ** 2 * (2 / (t * gamma) * log_term + 2)))
    sq_check.detail["max_ratio_with_constant_2"] = tight
    g_check = BoundCheck("E||g||^2 <= 8(R^2+1)K^2(1+ln K)/gamma")
    g_bound = 8 * (R * R + 1) * K * K * log_term / gamma
    for v in slack(g_sq[:, ::cadence]):
        g_check.observe(v, g_bound)
    return [norm_check, sq_check, g_check]


def bound_checks(K_values: Iterable[int] = range(2, 9), gammas: Sequence[float] = GAMMA_GRID,
                 draws: int = 50, seed: int = 0, trajectory: bool = True,
                 trajectory_kwargs: Optional[dict] = None) -> BoundReport:
    checks = enumerable_bound_checks(K_values, gammas, draws, seed)
    if trajectory:
        checks += trajectory_bound_checks(**(trajectory_kwargs or {}))
    return BoundReport(checks)


def unbiasedness_sweep(K_values: Iterable[int] = range(2, 9), gammas: Sequence[float] = GAMMA_GRID,
                       draws: int = 50, seed: int = 0) -> dict:
    """Max deviation of enumerated ``E[z~]``, ``E[tau~]`` from ``z``, ``tau``."""
    rng = np.random.default_rng(seed)
    err_z = err_tau = 0.0
    cases = 0
    for K in K_values:
        for gamma in gammas:
            for y_true in range(1, K + 1):
                z = true_z(K, y_true)
                for y_hat in range(1, K + 1):
                    ez = exact_expectation_z(K, y_true, y_hat, gamma)
                    err_z = max(err_z, float(np.max(np.abs(ez - z))))
                    for score, theta in random_configs(K, draws, rng):
                        et = exact_expectation_tau(K, y_true, y_hat, gamma, score, theta)
                        tau = true_tau(K, y_true, score, theta)
                        err_tau = max(err_tau, float(np.max(np.abs(et - tau))))
                        cases += 1
    return {"cases": cases, "max_err_z": err_z, "max_err_tau": err_tau}


def gradient_sweep(points: int = 1000, seed: int = 0, K_values: Sequence[int] = range(2, 9),
                   d: int = 4, lam: float = 0.7, h: float = 1e-5) -> dict:
    """Enumerated ``E[g]`` vs analytic subgradient vs central differences."""
    rng = np.random.default_rng(seed)
    err_enum = err_fd = 0.0
    done = 0
    K_values = list(K_values)
    while done < points:
        K = K_values[done % len(K_values)]
        w = rng.normal(size=d)
        theta = rng.normal(scale=2.0, size=K - 1)
        x = rng.uniform(-1, 1, size=d)
        if not is_kink_free(w, theta, x):
            continue
        y_true = int(rng.integers(1, K + 1))
        y_hat = int(rng.integers(1, K + 1))
        gamma = float(rng.choice(GAMMA_GRID))
        aw, at = analytic_subgradient(w, theta, x, y_true, lam)
        ew, et = exact_expectation_gradient(w, theta, x, y_true, y_hat, gamma, lam)
        fw, ft = finite_difference_gradient(w, theta, x, y_true, lam, h)
        err_enum = max(err_enum, float(np.max(np.abs(np.concatenate([ew - aw, et - at])))))
        err_fd = max(err_fd, float(np.max(np.abs(np.concatenate([fw - aw, ft - at])))))
        done += 1
    return {"points": done, "max_err_enumerated": err_enum, "max_err_finite_difference": err_fd}
