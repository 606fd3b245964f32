"""Exponential-kernel Hawkes processes: intensity, likelihood, estimation, simulation.

All rates are per minute. The univariate kernel is ``alpha * exp(-beta * u)``; in
K dimensions ``alpha[k, m]`` and ``beta[k, m]`` describe how an event of type
``m`` excites type ``k``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import optimize, signal, stats

log = logging.getLogger(__name__)

_LOG_BOUNDS = (-25.0, 6.0)


def _asmat(x, k):
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = np.full((k, k), float(a))
    return a.reshape(k, k)


@dataclass
class HawkesModel:
    lam: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    std_errors: dict | None = None
    p_values: dict | None = None

    def __post_init__(self):
        self.lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        k = self.lam.size
        self.alpha = _asmat(self.alpha, k)
        self.beta = _asmat(self.beta, k)
        if np.any(self.lam < 0) or np.any(self.alpha < 0) or np.any(self.beta <= 0):
            raise ValueError("Hawkes parameters must be positive (alpha may be 0)")

    @classmethod
    def univariate(cls, lam, alpha, beta):
        return cls(np.array([lam]), np.array([[alpha]]), np.array([[beta]]))

    @property
    def K(self) -> int:
        return self.lam.size

    @property
    def branching(self) -> np.ndarray:
        """Matrix of kernel integrals ``alpha / beta``."""
        return self.alpha / self.beta

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.branching))))

    @property
    def is_stationary(self) -> bool:
        return self.spectral_radius < 1.0

    def expected_count(self, horizon: float) -> np.ndarray:
        """Stationary mean number of events per dimension over ``horizon`` minutes."""
        g = self.branching
        return np.linalg.solve(np.eye(self.K) - g, self.lam) * horizon

    def uni(self) -> tuple[float, float, float]:
        if self.K != 1:
            raise ValueError("model is not univariate")
        return float(self.lam[0]), float(self.alpha[0, 0]), float(self.beta[0, 0])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.lam, self.alpha.ravel(), self.beta.ravel()])

    @classmethod
    def from_vector(cls, theta, k: int):
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:k], theta[k:k + k * k].reshape(k, k), theta[k + k * k:].reshape(k, k))

    def to_dict(self) -> dict:
        out = {
            "K": self.K,
            "lambda": self.lam.tolist(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
        }
        for name, d in (("se", self.std_errors), ("pvalues", self.p_values)):
            if d is not None:
                out[name] = {key: np.asarray(v).tolist() for key, v in d.items()}
        return out

    @classmethod
    def from_dict(cls, d: dict):
        model = cls(d["lambda"], d["alpha"], d["beta"])
        for name, attr in (("se", "std_errors"), ("pvalues", "p_values")):
            if name in d:
                setattr(model, attr, {key: np.asarray(v, dtype=float) for key, v in d[name].items()})
        return model


def significance_code(p: float) -> str:
    if not np.isfinite(p):
        return "?"
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


@dataclass
class FitReport:
    model: HawkesModel
    loglik: float
    iterations: int
    converged: bool
    std_errors_available: bool = True
    codes: dict = field(default_factory=dict)

    def summary(self) -> str:
        lines = [f"loglik = {self.loglik:.4f}  converged = {self.converged}"]
        m = self.model
        for name, values in (("lambda", m.lam), ("alpha", m.alpha), ("beta", m.beta)):
            se = m.std_errors[name] if m.std_errors else np.full_like(values, np.nan)
            codes = self.codes.get(name, np.full(values.shape, "", dtype=object))
            for idx in np.ndindex(values.shape):
                lines.append(f"{name}{list(idx)} = {values[idx]:.4e} +- {se[idx]:.2e} {codes[idx]}")
        return "\n".join(lines)


# ----------------------------------------------------------------------------
# intensity


def intensity(model: HawkesModel, history, t: float) -> np.ndarray:
    """Conditional intensity at ``t`` given events strictly before ``t``."""
    if model.K == 1 and not isinstance(history, (list, tuple)):
        history = [history]
    out = model.lam.copy()
    for m, h in enumerate(history):
        h = np.asarray(h, dtype=float)
        h = h[h < t]
        if h.size:
            out += (model.alpha[:, m][:, None] * np.exp(-model.beta[:, m][:, None] * (t - h))).sum(axis=1)
    return out


def intensity_on_grid(lam: float, alpha: float, beta: float, times, horizon: int) -> np.ndarray:
    """Univariate intensity at integer minutes ``1..horizon`` from events strictly earlier.

    ``times`` are integer minutes; entry ``t-1`` of the result is ``I(t)``.
    """
    x = np.zeros(horizon + 1)
    t = np.asarray(times, dtype=np.int64)
    np.add.at(x, t[(t >= 0) & (t <= horizon)], 1.0)
    d = math.exp(-beta)
    # s[t] = d * (s[t-1] + x[t-1])
    s = signal.lfilter([0.0, d], [1.0, -d], x)
    return lam + alpha * s[1:]


# ----------------------------------------------------------------------------
# univariate likelihood


def _check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("event times must be strictly increasing")
    return t


@njit(cache=True)
def _uni_loglik(lam, alpha, beta, t, horizon, want_grad):
    n = t.size
    grad = np.zeros(3)
    if n == 0:
        grad[0] = -horizon
        return -lam * horizon, grad
    r = 0.0
    dr = 0.0
    sum_log = 0.0
    g_lam = 0.0
    g_alpha = 0.0
    g_beta = 0.0
    comp = 0.0
    dcomp = 0.0
    for i in range(n):
        if i > 0:
            gap = t[i] - t[i - 1]
            e = math.exp(-beta * gap)
            dr = -gap * e * (1.0 + r) + e * dr
            r = e * (1.0 + r)
        lam_i = lam + alpha * r
        sum_log += math.log(lam_i)
        if want_grad:
            g_lam += 1.0 / lam_i
            g_alpha += r / lam_i
            g_beta += alpha * dr / lam_i
        tau = horizon - t[i]
        e_tail = math.exp(-beta * tau)
        comp += 1.0 - e_tail
        dcomp += tau * e_tail
    ll = -lam * horizon - alpha / beta * comp + sum_log
    grad[0] = g_lam - horizon
    grad[1] = g_alpha - comp / beta
    grad[2] = g_beta + alpha / (beta * beta) * comp - alpha / beta * dcomp
    return ll, grad


def excitation_sums(times, beta: float) -> np.ndarray:
    """``R_i = sum_{j<i} exp(-beta (t_i - t_j))`` via ``R_i = e^{-beta (t_i - t_{i-1})} (1 + R_{i-1})``."""
    t = _check_times(times)
    return _cross_sums(t, t, float(beta))


def loglik_uni(lam, alpha, beta, times, horizon=None, paper_convention: bool = False) -> float:
    """Univariate log-likelihood evaluated in O(n) through the R recursion.

    ``horizon`` defaults to the last event time. With ``paper_convention`` the
    constant ``horizon`` is added to the standard form, which leaves the maximizer unchanged.
    """
    t = _check_times(times)
    if horizon is None:
        horizon = float(t[-1]) if t.size else 0.0
    ll, _ = _uni_loglik(float(lam), float(alpha), float(beta), t, float(horizon), False)
    return ll + horizon if paper_convention else ll


def loglik_uni_grad(lam, alpha, beta, times, horizon=None) -> tuple[float, np.ndarray]:
    """Log-likelihood (standard form) and its gradient in ``(lam, alpha, beta)``."""
    t = _check_times(times)
    if horizon is None:
        horizon = float(t[-1]) if t.size else 0.0
    return _uni_loglik(float(lam), float(alpha), float(beta), t, float(horizon), True)


def compensator_uni(lam, alpha, beta, times, at) -> np.ndarray:
    """Integrated intensity ``Lambda(s)`` at each point of ``at``."""
    t = np.asarray(times, dtype=float)
    at = np.asarray(at, dtype=float)
    out = lam * at
    for i, s in enumerate(at):
        h = t[t < s]
        out[i] += alpha / beta * np.sum(1.0 - np.exp(-beta * (s - h)))
    return out


# ----------------------------------------------------------------------------
# multivariate likelihood


@njit(cache=True)
def _cross_sums(target, source, beta):
    """``R[i] = sum_{s_j < t_i} exp(-beta (t_i - s_j))`` for sorted inputs."""
    out = np.zeros(target.size)
    acc = 0.0
    last = 0.0
    j = 0
    started = False
    for i in range(target.size):
        ti = target[i]
        while j < source.size and source[j] < ti:
            if started:
                acc *= math.exp(-beta * (source[j] - last))
            acc += 1.0
            last = source[j]
            started = True
            j += 1
        if started:
            out[i] = acc * math.exp(-beta * (ti - last))
    return out


def loglik_multi(model: HawkesModel, events, horizon: float, paper_convention: bool = False) -> float:
    """Point-process log-likelihood ``sum_k [-int I^k + sum_i log I^k(t_i^k)]``.

    The compensator is integrated in closed form for every exponential term.
    Events of other types that occur at exactly the same time do not excite.
    """
    k_dim = model.K
    ts = [_check_times(e) for e in events]
    if len(ts) != k_dim:
        raise ValueError("need one event array per dimension")
    if not model.is_stationary:
        log.debug("evaluating likelihood of a non-stationary model")
    total = 0.0
    for k in range(k_dim):
        comp = model.lam[k] * horizon
        lam_at = np.full(ts[k].size, model.lam[k])
        for m in range(k_dim):
            a, b = model.alpha[k, m], model.beta[k, m]
            if ts[m].size:
                comp += a / b * np.sum(1.0 - np.exp(-b * (horizon - ts[m])))
            if ts[k].size and a > 0:
                lam_at += a * _cross_sums(ts[k], ts[m], b)
        if np.any(lam_at <= 0):
            return -np.inf
        total += -comp + np.sum(np.log(lam_at))
    if paper_convention:
        total += k_dim * horizon
    return float(total)


# ----------------------------------------------------------------------------
# estimation


def _hessian_from_grad(grad_fn, theta, rel=1e-4):
    n = theta.size
    h = np.empty((n, n))
    for i in range(n):
        step = rel * max(abs(theta[i]), 1e-12)
        up = theta.copy()
        dn = theta.copy()
        up[i] += step
        dn[i] -= step
        h[:, i] = (grad_fn(up) - grad_fn(dn)) / (2 * step)
    return 0.5 * (h + h.T)


def _hessian_from_fun(fun, theta, rel=1e-4):
    n = theta.size
    h = np.empty((n, n))
    steps = rel * np.maximum(np.abs(theta), 1e-12)
    f0 = fun(theta)
    for i in range(n):
        for j in range(i, n):
            if i == j:
                up = theta.copy()
                dn = theta.copy()
                up[i] += steps[i]
                dn[i] -= steps[i]
                h[i, i] = (fun(up) - 2 * f0 + fun(dn)) / steps[i] ** 2
            else:
                pp = theta.copy(); pp[i] += steps[i]; pp[j] += steps[j]
                pm = theta.copy(); pm[i] += steps[i]; pm[j] -= steps[j]
                mp = theta.copy(); mp[i] -= steps[i]; mp[j] += steps[j]
                mm = theta.copy(); mm[i] -= steps[i]; mm[j] -= steps[j]
                h[i, j] = h[j, i] = (fun(pp) - fun(pm) - fun(mp) + fun(mm)) / (4 * steps[i] * steps[j])
    return h


def _inference(theta, hess):
    """Standard errors from the inverse observed information, normal p-values."""
    info = -hess
    try:
        np.linalg.cholesky(info)
        cov = np.linalg.inv(info)
        se = np.sqrt(np.diag(cov))
        ok = bool(np.all(np.isfinite(se)))
    except np.linalg.LinAlgError:
        se = np.full(theta.size, np.nan)
        ok = False
    with np.errstate(divide="ignore", invalid="ignore"):
        p = 2 * stats.norm.sf(np.abs(theta / se))
    return se, p, ok


def _attach_inference(model: HawkesModel, se, p):
    k = model.K
    split = lambda v: {"lambda": v[:k], "alpha": v[k:k + k * k].reshape(k, k), "beta": v[k + k * k:].reshape(k, k)}
    model.std_errors = split(se)
    model.p_values = split(p)
    return {name: np.vectorize(significance_code, otypes=[object])(v) for name, v in model.p_values.items()}


def _uni_starts(n, horizon, rng, extra=None):
    rate = max(n, 1) / horizon
    starts = []
    for ratio in (0.1, 0.4, 0.7):
        for beta in (0.05, 0.3, 1.5):
            starts.append((rate * (1 - ratio), ratio * beta, beta))
    for _ in range(3):
        ratio = rng.uniform(0.05, 0.8)
        beta = math.exp(rng.uniform(math.log(0.01), math.log(5.0)))
        starts.append((rate * (1 - ratio), ratio * beta, beta))
    if extra is not None:
        starts.insert(0, extra)
    return starts


def fit_uni(times, horizon: float, init: HawkesModel | None = None, seed: int = 0,
            paper_convention: bool = False, maxiter: int = 500) -> FitReport:
    """Multi-start gradient maximum likelihood for a univariate Hawkes process."""
    t = _check_times(times)
    if t.size < 5:
        raise ValueError("need at least 5 events to fit a Hawkes process")
    rng = np.random.default_rng(seed)

    def negll(u):
        th = np.exp(u)
        ll, g = _uni_loglik(th[0], th[1], th[2], t, horizon, True)
        if not np.isfinite(ll):
            return 1e300, np.zeros(3)
        return -ll, -g * th

    best = None
    extra = init.uni() if init is not None else None
    for start in _uni_starts(t.size, horizon, rng, extra):
        res = optimize.minimize(negll, np.log(start), jac=True, method="L-BFGS-B",
                                bounds=[_LOG_BOUNDS] * 3, options={"maxiter": maxiter})
        if best is None or res.fun < best.fun:
            best = res
    theta = np.exp(best.x)
    model = HawkesModel.univariate(*theta)
    hess = _hessian_from_grad(lambda th: _uni_loglik(th[0], th[1], th[2], t, horizon, True)[1], theta)
    se, p, ok = _inference(theta, hess)
    codes = _attach_inference(model, se, p)
    ll = -best.fun + (horizon if paper_convention else 0.0)
    return FitReport(model, ll, int(best.nit), bool(best.success), ok, codes)


def _anneal(fun, u0, rng, steps=200, cooling=0.95, t0=1.0, scale=0.5):
    u = u0.copy()
    fu = fun(u)
    best_u, best_f = u.copy(), fu
    temp = t0
    for _ in range(steps):
        cand = u + rng.normal(0.0, scale * math.sqrt(temp / t0), size=u.size)
        cand = np.clip(cand, *_LOG_BOUNDS)
        fc = fun(cand)
        if fc < fu or rng.random() < math.exp(-(fc - fu) / temp):
            u, fu = cand, fc
            if fu < best_f:
                best_u, best_f = u.copy(), fu
        temp *= cooling
    return best_u, best_f


def fit_multi(events, horizon: float, init: HawkesModel | None = None, anneal_restarts: int = 100,
              anneal_steps: int = 200, seed: int = 0, paper_convention: bool = False,
              maxiter: int = 2000) -> FitReport:
    """Annealing restarts followed by a conjugate-gradient refinement, in log-parameters."""
    ts = [_check_times(e) for e in events]
    k = len(ts)
    if any(x.size < 5 for x in ts):
        raise ValueError("need at least 5 events per dimension")
    if init is None:
        lam = np.empty(k)
        alpha = np.full((k, k), 1e-3)
        beta = np.full((k, k), 0.3)
        for i, x in enumerate(ts):
            uni = fit_uni(x, horizon, seed=seed).model
            lam[i], alpha[i, i], beta[i, i] = uni.uni()
        init = HawkesModel(lam, alpha, beta)

    def negll(u):
        model = HawkesModel.from_vector(np.exp(u), k)
        ll = loglik_multi(model, ts, horizon)
        return -ll if np.isfinite(ll) else 1e300

    u0 = np.log(np.maximum(init.to_vector(), 1e-10))
    best_u, best_f = u0, negll(u0)
    streams = np.random.SeedSequence(seed).spawn(anneal_restarts)
    for ss in streams:
        u, f = _anneal(negll, u0, np.random.default_rng(ss), steps=anneal_steps)
        if f < best_f:
            best_u, best_f = u, f
    res = optimize.minimize(negll, best_u, method="CG", options={"maxiter": maxiter})
    if res.fun <= best_f:
        best_u, best_f = res.x, res.fun
    theta = np.exp(best_u)
    model = HawkesModel.from_vector(theta, k)
    hess = _hessian_from_fun(lambda th: loglik_multi(HawkesModel.from_vector(th, k), ts, horizon), theta)
    se, p, ok = _inference(theta, hess)
    codes = _attach_inference(model, se, p)
    ll = -best_f + (k * horizon if paper_convention else 0.0)
    return FitReport(model, ll, int(res.nit), bool(res.success), ok, codes)


def fit(events, horizon: float, init: HawkesModel | None = None, **kwargs) -> FitReport:
    """Fit a univariate (one array) or K-variate (list of arrays) Hawkes model."""
    if isinstance(events, (list, tuple)) and len(events) > 1:
        return fit_multi(events, horizon, init=init, **kwargs)
    if isinstance(events, (list, tuple)):
        events = events[0]
    kwargs.pop("anneal_restarts", None)
    kwargs.pop("anneal_steps", None)
    return fit_uni(events, horizon, init=init, **kwargs)


# ----------------------------------------------------------------------------
# simulation


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def simulate_uni(lam, alpha, beta, horizon: float, seed=None) -> np.ndarray:
    """Ogata thinning for the univariate exponential kernel."""
    if alpha / beta >= 1:
        raise ValueError("non-stationary model: alpha/beta >= 1")
    rng = _rng(seed)
    out = []
    t = 0.0
    excite = 0.0  # sum of kernels right after the last accepted event, decayed to t
    while True:
        bound = lam + excite
        w = rng.exponential(1.0 / bound)
        t += w
        if t > horizon:
            break
        excite *= math.exp(-beta * w)
        ratio = (lam + excite) / bound
        assert ratio <= 1.0 + 1e-12
        if rng.random() <= ratio:
            out.append(t)
            excite += alpha
    return np.array(out)


def simulate(model: HawkesModel, horizon: float, seed=None) -> list[np.ndarray]:
    """Exact thinning simulation of a (multivariate) exponential Hawkes model.

    The dominating rate is the current total intensity, which can only decay
    until the next accepted event; it is refreshed at every candidate.
    """
    if not model.is_stationary:
        raise ValueError(f"non-stationary model (spectral radius {model.spectral_radius:.3f})")
    rng = _rng(seed)
    if model.K == 1:
        return [simulate_uni(*model.uni(), horizon, rng)]
    k = model.K
    excite = np.zeros((k, k))
    out = [[] for _ in range(k)]
    t = 0.0
    while True:
        rates = model.lam + excite.sum(axis=1)
        bound = rates.sum()
        w = rng.exponential(1.0 / bound)
        t += w
        if t > horizon:
            break
        excite *= np.exp(-model.beta * w)
        rates = model.lam + excite.sum(axis=1)
        ratio = rates.sum() / bound
        assert ratio <= 1.0 + 1e-12
        u = rng.random() * bound
        if u <= rates.sum():
            m = int(np.searchsorted(np.cumsum(rates), u))
            m = min(m, k - 1)
            out[m].append(t)
            excite[:, m] += model.alpha[:, m]
    return [np.array(x) for x in out]
