"""AR(p) simulation and forecast-error growth.

For ``x_t = c + sum_i theta_i x_{t-i} + e_t`` observed up to ``x_{p-1}``, the
forecast error at ``x_{p+j}`` is ``sum_{i<=j} psi_i e_{p+j-i}`` where the
psi-weights come from inverting the AR polynomial.  Its variance,
``sigma2 * sum_{i<=j} psi_i**2``, is the smallest MSE any forecaster can
reach at that horizon.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class ARProcess:
    theta: tuple[float, ...]
    c: float = 0.0
    sigma2: float = 1.0

    def __post_init__(self):
        theta = tuple(float(t) for t in np.atleast_1d(self.theta))
        if not theta:
            raise ValueError("an AR process needs at least one coefficient")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        object.__setattr__(self, "theta", theta)

    @property
    def order(self) -> int:
        return len(self.theta)

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))

    def is_stationary(self) -> bool:
        # roots of z^p - theta_1 z^{p-1} - ... - theta_p inside the unit circle
        poly = np.concatenate([[1.0], -np.asarray(self.theta)])
        return bool(np.all(np.abs(np.roots(poly)) < 1))


def simulate_ar(proc: ARProcess, length: int, init, seed=None) -> np.ndarray:
    """``init`` (p values) followed by ``length`` simulated values."""
    init = np.asarray(init, dtype=np.float64).ravel()
    if init.size != proc.order:
        raise ValueError(f"init has {init.size} values, process order is {proc.order}")
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, proc.sigma, size=length)
    theta = np.asarray(proc.theta)
    p = proc.order
    x = np.empty(p + length)
    x[:p] = init
    for t in range(p, p + length):
        # theta_1 pairs with the most recent value
        x[t] = proc.c + theta @ x[t - 1 :: -1][:p] + noise[t - p]
    return x


def psi_weights(proc: ARProcess, k: int) -> np.ndarray:
    if k < 0:
        raise ValueError("k must be >= 0")
    theta = proc.theta
    psi = np.zeros(k + 1)
    psi[0] = 1.0
    for j in range(1, k + 1):
        psi[j] = sum(theta[i - 1] * psi[j - i] for i in range(1, min(j, proc.order) + 1))
    return psi


def analytic_forecast_variance(proc: ARProcess, k: int) -> np.ndarray:
    psi = psi_weights(proc, k)
    return proc.sigma2 * np.cumsum(psi**2)


def _scaled_variance_sums(proc: ARProcess, k: int) -> tuple[int, list[int]]:
    """``(d, acc)`` with ``sum_{i<=j} psi_i**2 == acc[j] / 4**(d*j)`` exactly.

    Every float is ``n / 2**e``; with a common exponent ``d`` the psi recursion
    runs on integers ``Psi_j = psi_j * 2**(d*j)`` and never needs a gcd.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    theta = [Fraction(t) for t in proc.theta]
    d = max(t.denominator for t in theta).bit_length() - 1
    nums = [t.numerator << (d - (t.denominator.bit_length() - 1)) for t in theta]
    big = [1]
    for j in range(1, k + 1):
        big.append(sum(nums[i - 1] * big[j - i] << (d * (i - 1)) for i in range(1, min(j, proc.order) + 1)))
    acc, total = [], 0
    for value in big:
        total = (total << (2 * d)) + value * value
        acc.append(total)
    return d, acc


def exact_forecast_variance(proc: ARProcess, k: int) -> list[Fraction]:
    """Same as :func:`analytic_forecast_variance` in exact rational arithmetic.

    Late increments ``psi_j**2`` of a fast-decaying process fall below one ulp
    of the running sum, so the float curve can flatten even though the true
    curve keeps rising.  The float parameters are converted exactly.
    """
    d, acc = _scaled_variance_sums(proc, k)
    sigma2 = Fraction(proc.sigma2)
    return [sigma2 * Fraction(a, 1 << (2 * d * j)) for j, a in enumerate(acc)]


def exact_variance_is_strictly_increasing(proc: ARProcess, k: int) -> bool:
    """Whether the exact variance curve rises at every horizon 1..k.

    Compares consecutive terms on a common denominator, so it stays cheap
    where building the reduced fractions would not.
    """
    d, acc = _scaled_variance_sums(proc, k)
    return all(acc[j] > acc[j - 1] << (2 * d) for j in range(1, k + 1))


def conditional_mean_path(proc: ARProcess, k: int, prefix) -> np.ndarray:
    """Noise-free continuation of ``prefix``: the optimal point forecast for x_p..x_{p+k}."""
    prefix = np.asarray(prefix, dtype=np.float64).ravel()
    if prefix.size != proc.order:
        raise ValueError("prefix length must equal the process order")
    theta = np.asarray(proc.theta)
    p = proc.order
    x = np.concatenate([prefix, np.zeros(k + 1)])
    for t in range(p, p + k + 1):
        x[t] = proc.c + theta @ x[t - 1 :: -1][:p]
    return x[p:]


def _simulate_paths(proc: ARProcess, k: int, n_trials: int, prefix, seed) -> np.ndarray:
    """``(n_trials, k+1)`` future values x_p..x_{p+k} from a shared observed prefix."""
    prefix = np.asarray(prefix, dtype=np.float64).ravel()
    if prefix.size != proc.order:
        raise ValueError("prefix length must equal the process order")
    rng = np.random.default_rng(seed)
    p = proc.order
    theta = np.asarray(proc.theta)
    paths = np.empty((n_trials, p + k + 1))
    paths[:, :p] = prefix
    for t in range(p, p + k + 1):
        lags = paths[:, t - p : t][:, ::-1]
        paths[:, t] = proc.c + lags @ theta + rng.normal(0.0, proc.sigma, size=n_trials)
    return paths[:, p:]


def monte_carlo_forecast_variance(proc: ARProcess, k: int, n_trials: int, seed=None, prefix=None) -> np.ndarray:
    """Per-horizon sample variance (ddof=1) of x_{p+j} over simulated futures."""
    if n_trials < 2:
        raise ValueError("n_trials must be >= 2")
    prefix = np.zeros(proc.order) if prefix is None else prefix
    paths = _simulate_paths(proc, k, n_trials, prefix, seed)
    return paths.var(axis=0, ddof=1)


def optimal_forecast_mse(proc: ARProcess, k: int, n_trials: int, seed=None, prefix=None) -> np.ndarray:
    """Empirical per-horizon MSE of the true conditional mean used as the forecast."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    prefix = np.zeros(proc.order) if prefix is None else np.asarray(prefix, dtype=np.float64)
    paths = _simulate_paths(proc, k, n_trials, prefix, seed)
    best = conditional_mean_path(proc, k, prefix)
    return np.mean((paths - best) ** 2, axis=0)


def random_stationary_ar(rng: np.random.Generator, order: int, max_modulus: float = 0.95, sigma2: float = 1.0) -> ARProcess:
    """Stationary AR(order) built from random characteristic roots inside the unit disk."""
    roots = []
    while len(roots) < order:
        modulus = rng.uniform(0.05, max_modulus)
        if order - len(roots) >= 2 and rng.random() < 0.5:
            angle = rng.uniform(0.1, np.pi - 0.1)
            z = modulus * np.exp(1j * angle)
            roots.extend([z, np.conj(z)])
        else:
            roots.append(modulus * rng.choice([-1.0, 1.0]))
    theta = -np.real(np.poly(roots))[1:]
    return ARProcess(tuple(theta), 0.0, sigma2)
