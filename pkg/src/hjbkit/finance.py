"""Constrained consumption-investment application.

The wealth problem with power utility factors as ``x^gamma/gamma`` times a
value that depends on the stochastic factor only; after the measure change
that absorbs the portfolio-dependent wealth noise into the factor drift,
the reduced problem is exactly an instance of the general framework:

* drift   ``i(y) + rho * pi * sigma(y)``
* discount``gamma*[r + b*pi - (1-gamma)/2 * sigma^2 * pi^2 - c] - w``
* reward  ``c^gamma``
* terminal 1

with the control pair ``(pi, c)`` constrained to ``[-R, R] x [0, m]``.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .model import ControlModel, check_assumption1

__all__ = [
    "MarketModel",
    "to_control_model",
    "closed_form_controls",
    "control_override",
    "merton_benchmark",
    "MertonBenchmark",
    "discount_admissible",
    "wealth_value",
    "load_market",
    "reduced_model_descriptor",
]


def _scalar_fn(value):
    """Coefficient of the factor: constant or callable of y (batch last axis N=1)."""
    if callable(value):

        def fn(y):
            y = np.asarray(y, float)
            out = np.asarray(value(y), float)
            # accept callables that return either (...,) or (..., 1)
            return out[..., 0] if out.shape == y.shape else out

        return fn
    v = float(value)

    def fn(y):
        y = np.asarray(y, float)
        return np.full(y.shape[:-1], v)

    return fn


@dataclass(frozen=True)
class MarketModel:
    """Market primitives driving the consumption-investment problem."""

    short_rate: object        # r(y) or constant
    excess_drift: object      # b(y) or constant
    volatility: object        # sigma(y) or constant, > 0
    correlation: float        # rho in [-1, 1]
    risk_aversion: float      # gamma in (0, 1)
    discount: float           # w > 0
    position_cap: float       # R > 0
    consumption_cap: float    # m > 0
    factor_drift: object      # i(y) or constant
    lip_L1: float = None
    lip_L2: float = None

    def __post_init__(self):
        if not (0.0 < self.risk_aversion < 1.0):
            raise ParameterError("risk_aversion must lie strictly in (0, 1)")
        if not -1.0 <= self.correlation <= 1.0:
            raise ParameterError("correlation must lie in [-1, 1]")
        if not self.discount > 0:
            raise ParameterError("discount must be positive")
        if not (self.position_cap > 0 and self.consumption_cap > 0):
            raise ParameterError("position and consumption caps must be positive")

    def r(self, y):
        return _scalar_fn(self.short_rate)(y)

    def b(self, y):
        return _scalar_fn(self.excess_drift)(y)

    def sigma(self, y):
        return _scalar_fn(self.volatility)(y)

    def i(self, y):
        return _scalar_fn(self.factor_drift)(y)

    @property
    def is_constant(self):
        return not any(callable(c) for c in
                       (self.short_rate, self.excess_drift, self.volatility))


def _reduced_coefficients(market):
    gamma, w, rho = market.risk_aversion, market.discount, market.correlation

    def drift(y, delta):
        y = np.asarray(y, float)
        delta = np.asarray(delta, float)
        pi = delta[..., 0]
        out = market.i(y) + rho * pi * market.sigma(y)
        return out[..., None]

    def discount_rate(y, delta):
        y = np.asarray(y, float)
        delta = np.asarray(delta, float)
        pi, c = delta[..., 0], delta[..., 1]
        r, b, s = market.r(y), market.b(y), market.sigma(y)
        return gamma * (r + b * pi - 0.5 * (1.0 - gamma) * s ** 2 * pi ** 2 - c) - w

    def running_reward(y, delta):
        y = np.asarray(y, float)
        c = np.asarray(delta, float)[..., 1]
        out = c ** gamma
        return np.broadcast_to(out, y.shape[:-1]).copy() \
            if np.shape(out) != y.shape[:-1] else out

    def terminal_reward(y):
        y = np.asarray(y, float)
        return np.ones(y.shape[:-1])

    return drift, discount_rate, running_reward, terminal_reward


def _estimate_lipschitz(market, box=(-5.0, 5.0), samples=512, seed=0):
    """Sampled Lipschitz data for the reduced model when none is supplied."""
    rng = np.random.default_rng(seed)
    ya = rng.uniform(box[0], box[1], size=(samples, 1))
    yb = rng.uniform(box[0], box[1], size=(samples, 1))
    dist = np.abs(ya - yb)[:, 0]
    keep = dist > 1e-12
    ya, yb, dist = ya[keep], yb[keep], dist[keep]
    l1 = 1e-6
    for fn in (market.r, market.b, market.sigma):
        l1 = max(l1, float(np.max(np.abs(fn(ya) - fn(yb)) / dist)))
    di = (market.i(ya) - market.i(yb)) * (ya[:, 0] - yb[:, 0])
    l2 = float(np.max(di / dist ** 2))
    if l2 >= 0:
        l2 = -1e-6  # flat/expanding drift: report a nominal contraction
    return 1.5 * max(l1, 1.0), l2


def to_control_model(market, control_resolution):
    """Discretize (pi, c) and build the reduced factor-level ControlModel."""
    n_pi, n_c = control_resolution
    if n_pi < 2 or n_c < 2:
        raise ParameterError("control resolutions must be >= 2")
    R, m = market.position_cap, market.consumption_cap
    pis = np.linspace(-R, R, n_pi)
    cs = np.linspace(0.0, m, n_c)
    controls = np.array([(p, c) for p in pis for c in cs])
    drift, h, f, g = _reduced_coefficients(market)
    L1 = market.lip_L1
    L2 = market.lip_L2
    if L1 is None or L2 is None:
        est1, est2 = _estimate_lipschitz(market)
        L1 = est1 if L1 is None else L1
        L2 = est2 if L2 is None else L2
    cm = ControlModel(
        dim=1,
        drift=drift,
        discount_rate=h,
        running_reward=f,
        terminal_reward=g,
        controls=controls,
        lip_L1=L1,
        lip_L2=L2,
    )
    screen = check_assumption1(cm, [(-5.0, 5.0)], samples=128, seed=0)
    if not screen.passed:
        warnings.warn(
            "market coefficients violate the claimed Lipschitz/contraction "
            f"constants (worst ratio {screen.worst_ratio:.3g})",
            stacklevel=2,
        )
    return cm


def closed_form_controls(y, u, u_y, market):
    """Clipped maximizers of the reduced Hamiltonian at one (y, u, u_y).

    The portfolio weight is the vertex of the concave quadratic in pi,
    clipped to [-R, R]; consumption is the stationary point of the strictly
    concave consumption term, clipped to [0, m].  Requires u > 0.
    """
    u_arr = np.asarray(u, float)
    if np.any(u_arr <= 0):
        raise ParameterError("closed-form controls require u > 0")
    scalar = np.isscalar(u) or np.ndim(u) == 0
    ycol = np.atleast_1d(np.asarray(y, float)).reshape(-1, 1)
    gamma = market.risk_aversion
    s = market.sigma(ycol)
    b = market.b(ycol)
    pi = (market.correlation * s * np.asarray(u_y, float) + gamma * b * u_arr) \
        / ((gamma - gamma ** 2) * s ** 2 * u_arr)
    pi = np.clip(pi, -market.position_cap, market.position_cap)
    c = np.clip(u_arr ** (1.0 / (gamma - 1.0)), 0.0, market.consumption_cap)
    if scalar:
        return float(np.ravel(pi)[0]), float(np.ravel(c)[0] if np.ndim(c) else c)
    return pi, np.broadcast_to(c, np.shape(pi)).copy()


def control_override(market):
    """Vectorized (y, u, p) -> (pi*, c*) map for the grid solvers."""

    def override(ys, u, grad):
        ycol = np.asarray(ys, float)[:, None]
        gamma = market.risk_aversion
        s = market.sigma(ycol)
        b = market.b(ycol)
        uu = np.maximum(np.asarray(u, float), 1e-300)
        pi = (market.correlation * s * np.asarray(grad, float) + gamma * b * uu) \
            / ((gamma - gamma ** 2) * s ** 2 * uu)
        pi = np.clip(pi, -market.position_cap, market.position_cap)
        # u ~ 0 early in the long-time march: the power overflows but the
        # clip pins it at the cap, so the warning is spurious
        with np.errstate(over="ignore"):
            c = np.where(uu > 0,
                         np.clip(uu ** (1.0 / (gamma - 1.0)), 0.0,
                                 market.consumption_cap),
                         market.consumption_cap)
        return np.stack([pi, c], axis=-1)

    return override


@dataclass(frozen=True)
class MertonBenchmark:
    u: float
    pi_star: float
    c_star: float
    A: float
    pi_clipped: bool
    c_clipped: bool

    def as_dict(self):
        return {
            "u": float(self.u),
            "pi_star": float(self.pi_star),
            "c_star": float(self.c_star),
            "A": float(self.A),
            "pi_clipped": bool(self.pi_clipped),
            "c_clipped": bool(self.c_clipped),
        }


def merton_benchmark(market):
    """Constant solution of the stationary reduced equation.

    For y-independent market coefficients the stationary equation collapses
    to ``A*u + (1-gamma)*u^(gamma/(gamma-1)) = 0`` with
    ``A = gamma*r - w + gamma*b^2 / (2*(1-gamma)*sigma^2)``, giving
    ``u = ((1-gamma)/(-A))^(1-gamma)``.  Valid when A < 0 and the interior
    maximizers do not clip.
    """
    if not market.is_constant:
        raise ParameterError("benchmark requires constant market coefficients")
    gamma, w = market.risk_aversion, market.discount
    r = float(market.short_rate)
    b = float(market.excess_drift)
    sigma = float(market.volatility)
    A = gamma * r - w + gamma * b ** 2 / (2.0 * (1.0 - gamma) * sigma ** 2)
    if A >= 0:
        raise ParameterError(
            "discount too small for finite value (growth rate "
            f"A={A:g} is nonnegative)"
        )
    u = ((1.0 - gamma) / (-A)) ** (1.0 - gamma)
    pi_unclipped = b / ((1.0 - gamma) * sigma ** 2)
    c_unclipped = u ** (1.0 / (gamma - 1.0))
    pi = float(np.clip(pi_unclipped, -market.position_cap, market.position_cap))
    c = float(np.clip(c_unclipped, 0.0, market.consumption_cap))
    return MertonBenchmark(
        u=float(u),
        pi_star=pi,
        c_star=c,
        A=float(A),
        pi_clipped=bool(pi != pi_unclipped),
        c_clipped=bool(c != c_unclipped),
    )


@dataclass(frozen=True)
class DiscountReport:
    admissible: bool
    linear_rate: float
    prefactor_exponent: float     # coefficient of max(y0, 0)
    psi_sup: float
    martingale_correction: float
    total_rate: float
    precondition_witnesses: list

    def as_dict(self):
        return {
            "admissible": bool(self.admissible),
            "linear_rate": float(self.linear_rate),
            "prefactor_exponent": float(self.prefactor_exponent),
            "psi_sup": float(self.psi_sup),
            "martingale_correction": float(self.martingale_correction),
            "total_rate": float(self.total_rate),
            "precondition_witnesses": self.precondition_witnesses,
        }


def _psi_max(market, y, xi):
    """Concave quadratic in pi maximized in closed form with the cap clip."""
    gamma, w = market.risk_aversion, market.discount
    ycol = np.asarray(y, float)[:, None]
    s = market.sigma(ycol)
    b = market.b(ycol)
    Q_coeff = xi  # the (gamma Q rho / alpha)(1 - e^{alpha(s-t)}) factor endpoint
    lin = (Q_coeff + gamma * b) * s
    quad = 0.5 * (gamma - gamma ** 2) * s ** 2
    vertex = np.where(quad > 0, lin / (2.0 * quad), 0.0)
    pi = np.clip(vertex, -market.position_cap, market.position_cap)
    return lin * pi - quad * pi ** 2 - w


def discount_admissible(market, alpha, beta, P, Q, box=(-5.0, 5.0),
                        samples=256, seed=0):
    """Screen the discount factor for infinite-horizon admissibility.

    Decomposes the pathwise discount exponent into a linear-in-time rate,
    a start-point prefactor, the capped-portfolio quadratic term and the
    martingale correction from the stochastic integral; the total
    exponential rate must be negative for the discounted value to stay
    integrable.  Preconditions on the factor drift and short rate are
    checked by sampling and witnesses are listed on violation.
    """
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    gamma, w = market.risk_aversion, market.discount
    rng = np.random.default_rng(seed)
    ys = np.sort(np.concatenate([
        rng.uniform(box[0], box[1], samples), np.asarray(box, float)]))
    ycol = ys[:, None]
    witnesses = []
    iv = market.i(ycol)
    bad = iv > -alpha * ys + beta + 1e-12
    for j in np.nonzero(bad)[0][:5]:
        witnesses.append({"condition": "factor_drift", "y": float(ys[j]),
                          "value": float(iv[j]),
                          "bound": float(-alpha * ys[j] + beta)})
    rv = gamma * market.r(ycol) - w
    bad = rv > -P + Q * ys + 1e-12
    for j in np.nonzero(bad)[0][:5]:
        witnesses.append({"condition": "short_rate", "y": float(ys[j]),
                          "value": float(rv[j]),
                          "bound": float(-P + Q * ys[j])})

    linear_rate = gamma * Q * beta / alpha - gamma * P
    prefactor = gamma * Q / alpha
    # the time-kernel factor (1 - e^{alpha(s-t)}) ranges over [0, 1)
    xi_hi = gamma * Q * market.correlation / alpha
    psi_sup = max(
        float(np.max(_psi_max(market, ys, 0.0))),
        float(np.max(_psi_max(market, ys, xi_hi))),
    )
    martingale = 0.5 * (gamma * Q / alpha) ** 2
    total = linear_rate + psi_sup + martingale
    return DiscountReport(
        admissible=bool(total < 0 and not witnesses),
        linear_rate=float(linear_rate),
        prefactor_exponent=float(prefactor),
        psi_sup=float(psi_sup),
        martingale_correction=float(martingale),
        total_rate=float(total),
        precondition_witnesses=witnesses,
    )


def wealth_value(x, market, u):
    """Full wealth-level value x^gamma/gamma * u."""
    if not x > 0:
        raise ParameterError("wealth must be positive")
    gamma = market.risk_aversion
    return x ** gamma / gamma * float(u)


def load_market(source):
    """Build a MarketModel from a JSON market file (path or parsed dict)."""
    import json

    from . import coefficients

    if isinstance(source, (str, bytes)) or hasattr(source, "read"):
        with open(source) as fh:
            doc = json.load(fh)
    else:
        doc = dict(source)

    def coeff(key):
        value = doc[key]
        if isinstance(value, dict):
            return coefficients.build_terminal(value, 1)
        return float(value)

    return MarketModel(
        short_rate=coeff("short_rate"),
        excess_drift=coeff("excess_drift"),
        volatility=coeff("volatility"),
        correlation=float(doc["correlation"]),
        risk_aversion=float(doc["risk_aversion"]),
        discount=float(doc["discount"]),
        position_cap=float(doc["position_cap"]),
        consumption_cap=float(doc["consumption_cap"]),
        factor_drift=coeff("factor_drift"),
        lip_L1=doc.get("L1"),
        lip_L2=doc.get("L2"),
    )


def reduced_model_descriptor(market, control_resolution):
    """JSON-serializable reduced model, for inspection from the CLI.

    Only constant-coefficient markets can be emitted in closed descriptor
    form; state-dependent coefficients would need tabulation.
    """
    if not market.is_constant or callable(market.factor_drift):
        raise ParameterError(
            "descriptor export supports constant-coefficient markets only"
        )
    cm = to_control_model(market, control_resolution)
    gamma, w, rho = market.risk_aversion, market.discount, market.correlation
    r = float(market.short_rate)
    b = float(market.excess_drift)
    sigma = float(market.volatility)
    return {
        "dim": 1,
        "controls": cm.controls.tolist(),
        "drift": {
            "kind": "components",
            "components": [{
                "kind": "quadratic_delta",
                "const": float(market.factor_drift),
                "delta_coeff": [rho * sigma, 0.0],
            }],
        },
        "discount_rate": {
            "kind": "quadratic_delta",
            "const": gamma * r - w,
            "delta_coeff": [gamma * b, -gamma],
            "delta_quad": [-0.5 * gamma * (1.0 - gamma) * sigma ** 2, 0.0],
        },
        "running_reward": {"kind": "power_delta", "index": 1,
                           "exponent": gamma},
        "terminal_reward": {"kind": "constant", "value": 1.0},
        "L1": cm.lip_L1,
        "L2": cm.lip_L2,
    }
