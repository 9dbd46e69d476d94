"""Control-problem definitions, assumption screens, truncation, envelopes.

A :class:`ControlModel` bundles the controlled diffusion ``dY = i(Y, d) dt
+ dW`` with a state/control dependent discount rate ``h``, running reward
``f`` and terminal reward ``g``, together with the finite control list and
the two Lipschitz constants the estimates rely on.  All coefficient maps
must be numpy-vectorized over a leading batch axis (see ``coefficients``).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import coefficients
from .errors import CoefficientError, ParameterError

__all__ = [
    "ControlModel",
    "AssumptionReport",
    "KappaTable",
    "check_assumption1",
    "truncate",
    "estimate_kappa",
    "constant_policies",
    "load_model",
]

#: relative tolerance on sampled Lipschitz ratios
RATIO_TOL = 1e-9

#: estimator values beyond this are treated as divergence
OVERFLOW_GUARD = 1e12


@dataclass(frozen=True, eq=False)
class ControlModel:
    """Coefficients, control list and structural constants of one problem."""

    dim: int
    drift: object            # i(y, delta) -> (..., N)
    discount_rate: object    # h(y, delta) -> (...)
    running_reward: object   # f(y, delta) -> (...)
    terminal_reward: object  # g(y) -> (...)
    controls: np.ndarray     # (n_controls, k)
    lip_L1: float
    lip_L2: float
    domain_box: object = None

    def __post_init__(self):
        controls = np.atleast_2d(np.asarray(self.controls, float))
        if controls.size == 0:
            raise ParameterError("control list must be nonempty")
        if len(np.unique(controls, axis=0)) != len(controls):
            raise ParameterError("control list contains duplicates")
        object.__setattr__(self, "controls", controls)
        if self.dim < 1:
            raise ParameterError("dim must be a positive integer")
        if not self.lip_L1 > 0:
            raise ParameterError("lip_L1 must be positive")
        if self.lip_L2 == 0:
            raise ParameterError("lip_L2 must be nonzero")

    @property
    def n_controls(self):
        return len(self.controls)

    def eval_checked(self, name, y, delta=None):
        """Evaluate one coefficient and raise if it returns non-finite values."""
        fn = getattr(self, name)
        out = np.asarray(fn(y) if delta is None else fn(y, delta), float)
        if not np.all(np.isfinite(out)):
            bad = np.argwhere(~np.isfinite(out))
            idx = tuple(bad[0]) if bad.size else ()
            y_arr = np.asarray(y, float)
            point = y_arr[idx[: y_arr.ndim - 1]] if y_arr.ndim > 1 else y_arr
            raise CoefficientError(name, np.asarray(point).tolist(),
                                   None if delta is None else np.asarray(delta).tolist())
        return out


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the sampled Lipschitz / one-sided drift screen."""

    passed: bool
    worst_ratio: float
    witness: dict
    ratios: dict = field(default_factory=dict)
    tolerance: float = RATIO_TOL

    def as_dict(self):
        w = dict(self.witness)
        return {
            "passed": bool(self.passed),
            "worst_ratio": float(self.worst_ratio),
            "witness": w,
            "ratios": {k: float(v) for k, v in self.ratios.items()},
            "tolerance": self.tolerance,
        }


def _as_box(box, dim):
    box = np.asarray(box, float)
    if box.ndim == 1:
        box = box[None, :]
    if box.shape != (dim, 2) or not np.all(box[:, 0] < box[:, 1]):
        raise ParameterError("box must give (lo, hi) with lo < hi per dimension")
    return box


def _corner_pairs(box):
    dim = len(box)
    if dim > 8:
        return np.empty((0, dim)), np.empty((0, dim))
    corners = np.array(np.meshgrid(*box, indexing="ij")).reshape(dim, -1).T
    ii, jj = np.triu_indices(len(corners), k=1)
    return corners[ii], corners[jj]


def check_assumption1(model, box, samples, seed):
    """Screen the Lipschitz bounds of f, g, h and the one-sided drift bound.

    Random pairs drawn uniformly in ``box`` (plus all pairs of box corners)
    are checked against ``lip_L1`` and ``lip_L2``.  Ratios are normalized so
    that 1 means the claimed constant is attained exactly and values above
    ``1 + tolerance`` mean a violation.  Deterministic for a fixed seed.
    """
    if samples < 2:
        raise ParameterError("samples must be >= 2")
    box = _as_box(box, model.dim)
    rng = np.random.default_rng(seed)
    ya = rng.uniform(box[:, 0], box[:, 1], size=(samples, model.dim))
    yb = rng.uniform(box[:, 0], box[:, 1], size=(samples, model.dim))
    ca, cb = _corner_pairs(box)
    ya = np.vstack([ya, ca])
    yb = np.vstack([yb, cb])
    diff = ya - yb
    dist = np.linalg.norm(diff, axis=-1)
    keep = dist > 0
    ya, yb, diff, dist = ya[keep], yb[keep], diff[keep], dist[keep]

    ratios = {}
    witnesses = {}
    L1, L2 = model.lip_L1, model.lip_L2

    def record(name, ratio_arr, delta=None):
        j = int(np.argmax(ratio_arr))
        r = float(ratio_arr[j])
        if name not in ratios or r > ratios[name]:
            ratios[name] = r
            witnesses[name] = {
                "coefficient": name,
                "y": ya[j].tolist(),
                "y_bar": yb[j].tolist(),
                "delta": None if delta is None else np.asarray(delta).tolist(),
                "ratio": r,
            }

    ga = model.eval_checked("terminal_reward", ya)
    gb = model.eval_checked("terminal_reward", yb)
    record("terminal_reward", np.abs(ga - gb) / (L1 * dist))

    for delta in model.controls:
        for name in ("running_reward", "discount_rate"):
            va = model.eval_checked(name, ya, delta)
            vb = model.eval_checked(name, yb, delta)
            record(name, np.abs(va - vb) / (L1 * dist), delta)
        ia = model.eval_checked("drift", ya, delta)
        ib = model.eval_checked("drift", yb, delta)
        s = np.sum(diff * (ia - ib), axis=-1) / dist ** 2
        # normalize the one-sided bound s <= L2 so that equality reads 1
        drift_ratio = s / L2 if L2 > 0 else 2.0 - s / L2
        record("drift", drift_ratio, delta)

    worst_name = max(ratios, key=ratios.get)
    worst = ratios[worst_name]
    return AssumptionReport(
        passed=bool(worst <= 1.0 + RATIO_TOL),
        worst_ratio=float(worst),
        witness=witnesses[worst_name],
        ratios=ratios,
    )


def truncate(model, k):
    """Replace h, f, g by their bounded taper at radius ``k``.

    Coefficients are unchanged for ``|y| <= k``, fade linearly on
    ``k <= |y| <= 2k`` and are flattened beyond ``2k``: the rewards to zero,
    the discount rate to its (kept) negative part.  The drift and the
    control list are untouched; the common Lipschitz constant becomes
    ``2 * L1 * (1 + 1/k)``.
    """
    if not k > 0:
        raise ParameterError("truncation radius k must be positive")
    h, f, g = model.discount_rate, model.running_reward, model.terminal_reward

    def weight(y):
        r = np.linalg.norm(np.asarray(y, float), axis=-1)
        return np.clip(2.0 - r / k, 0.0, 1.0)

    def h_k(y, delta):
        v = np.asarray(h(y, delta), float)
        return np.maximum(v, 0.0) * weight(y) - np.maximum(-v, 0.0)

    def f_k(y, delta):
        return np.asarray(f(y, delta), float) * weight(y)

    def g_k(y):
        return np.asarray(g(y), float) * weight(y)

    return ControlModel(
        dim=model.dim,
        drift=model.drift,
        discount_rate=h_k,
        running_reward=f_k,
        terminal_reward=g_k,
        controls=model.controls,
        lip_L1=2.0 * model.lip_L1 * (1.0 + 1.0 / k),
        lip_L2=model.lip_L2,
        domain_box=model.domain_box,
    )


@dataclass(frozen=True)
class KappaTable:
    """Empirical envelopes of the discounted reward / terminal moments.

    ``kappa[j]`` bounds (over the probed policy family and start points in
    the ball of radius ``radius_n``) the mean of ``exp(int h) * max(|f|, 1)``
    at time ``t[j]``; ``p_terminal`` is the analogue with the terminal
    reward.  Because only a finite policy family is probed, the table is a
    lower envelope of the analytically required supremum over all admissible
    controls.
    """

    t: np.ndarray
    kappa: np.ndarray
    p_terminal: np.ndarray
    policy_ids: np.ndarray
    radius_n: int
    policies_probed: str
    integral_kappa: float
    integral_weighted: float
    envelope_K: float
    envelope_M: float
    decay_rate: float
    lip_L2: float
    non_integrable: bool = False
    divergence_info: str = ""

    def __post_init__(self):
        t = np.asarray(self.t, float)
        kappa = np.asarray(self.kappa, float)
        if np.any(np.diff(t) <= 0):
            raise ParameterError("time grid must be strictly increasing")
        if not (np.all(np.isfinite(kappa)) and np.all(kappa >= 0)):
            raise ParameterError("kappa values must be finite and nonnegative")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "p_terminal", np.asarray(self.p_terminal, float))
        object.__setattr__(self, "policy_ids", np.asarray(self.policy_ids, int))

    @property
    def horizon(self):
        return float(self.t[-1])

    def kappa_at(self, times):
        """Envelope value interpolated on the table grid (clamped ends)."""
        return np.interp(np.asarray(times, float), self.t, self.kappa)

    def p_at(self, time):
        return float(np.interp(time, self.t, self.p_terminal))

    def integral(self, a, b, weight_rate=0.0):
        """Trapezoid integral of ``exp(weight_rate*t) * kappa`` over [a, b].

        Beyond the table grid the fitted exponential tail is used; returns
        inf when the extrapolated rate is nonnegative.
        """
        a, b = float(a), float(b)
        total = 0.0
        hi = min(b, self.horizon)
        if hi > a:
            ts = np.linspace(a, hi, 129)
            total += np.trapezoid(np.exp(weight_rate * ts) * self.kappa_at(ts), ts)
        if b > self.horizon:
            rate = self.decay_rate + weight_rate
            if rate >= 0:
                return np.inf
            t0 = max(a, self.horizon)
            k0 = float(self.kappa[-1]) * np.exp(self.decay_rate * (t0 - self.horizon))
            total += np.exp(weight_rate * t0) * k0 / (-rate) * (
                1.0 - np.exp(rate * (b - t0)) if np.isfinite(b) else 1.0
            )
        return float(total)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("t,kappa,p,policy_id\n")
            for t, k, p, pid in zip(self.t, self.kappa, self.p_terminal, self.policy_ids):
                fh.write(f"{float(t)!r},{float(k)!r},{float(p)!r},{int(pid)}\n")

    def as_dict(self):
        return {
            "radius_n": int(self.radius_n),
            "policies_probed": self.policies_probed,
            "integral_kappa": float(self.integral_kappa),
            "integral_weighted": float(self.integral_weighted),
            "envelope_K": float(self.envelope_K),
            "envelope_M": float(self.envelope_M),
            "decay_rate": float(self.decay_rate),
            "non_integrable": bool(self.non_integrable),
            "divergence_info": self.divergence_info,
        }


def constant_policies(model):
    """One constant feedback policy per control point."""
    policies = []
    for delta in model.controls:
        d = np.array(delta, float)
        policies.append(lambda y, t, _d=d: _d)
    return policies


def _ball_mesh(dim, n, points, seed):
    if n == 0:
        return np.zeros((1, dim))
    if dim == 1:
        return np.linspace(-n, n, points)[:, None]
    mesh = [np.zeros(dim)]
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = n
        mesh += [e, -e]
    rng = np.random.default_rng(seed)
    while len(mesh) < points:
        z = rng.standard_normal(dim)
        mesh.append(n * rng.uniform() ** (1.0 / dim) * z / np.linalg.norm(z))
    return np.array(mesh[:points])


def estimate_kappa(model, radius_n, horizon, policy_family, mc,
                   t_points=16, y_points=7):
    """Estimate the time-decay envelopes of the discounted moments.

    For every time on an internal grid and every start point on a mesh of
    the ball of radius ``radius_n``, the discounted running / terminal
    moments are estimated under each policy in ``policy_family``; the table
    holds the pointwise maxima.  An exponential envelope ``K * exp(M |y|)``
    is fitted over the start points and the two tail integrals (plain and
    ``exp(L2 t)``-weighted) are reported with exponential tail
    extrapolation.
    """
    from . import simulate as sim

    if not horizon > 0:
        raise ParameterError("horizon must be positive")
    if not policy_family:
        raise ParameterError("policy family must be nonempty")
    t_grid = np.linspace(horizon / t_points, horizon, t_points)
    mesh = _ball_mesh(model.dim, radius_n, y_points, mc.seed)

    est_f = np.zeros((len(policy_family), len(mesh), len(t_grid)))
    est_g = np.zeros_like(est_f)
    non_integrable = False
    divergence_info = ""
    for pi, policy in enumerate(policy_family):
        for yi, y0 in enumerate(mesh):
            batch = sim.simulate_paths(model, policy, y0, horizon, mc,
                                       checkpoints=t_grid)
            disc = np.exp(batch.checkpoint_log_discounts)
            ok = ~batch.excluded
            for ti in range(len(t_grid)):
                ys = batch.checkpoint_states[:, ti]
                ds = batch.checkpoint_deltas[:, ti]
                fv = np.abs(np.asarray(model.running_reward(ys, ds), float))
                gv = np.abs(np.asarray(model.terminal_reward(ys), float))
                ef = float(np.mean((disc[:, ti] * np.maximum(fv, 1.0))[ok]))
                eg = float(np.mean((disc[:, ti] * np.maximum(gv, 1.0))[ok]))
                est_f[pi, yi, ti] = ef
                est_g[pi, yi, ti] = eg
                if ef > OVERFLOW_GUARD or not np.isfinite(ef):
                    non_integrable = True
                    divergence_info = (
                        f"estimator diverged at t={t_grid[ti]:g} under policy {pi}"
                    )
    est_f = np.nan_to_num(est_f, nan=OVERFLOW_GUARD, posinf=OVERFLOW_GUARD)
    est_g = np.nan_to_num(est_g, nan=OVERFLOW_GUARD, posinf=OVERFLOW_GUARD)

    kappa = est_f.max(axis=(0, 1))
    p_term = est_g.max(axis=(0, 1))
    policy_ids = est_f.max(axis=1).argmax(axis=0)

    # exponential-in-|y| envelope fit across start points
    m_y = est_f.max(axis=(0, 2))
    radii = np.linalg.norm(mesh, axis=-1)
    if len(np.unique(radii)) >= 2:
        slope, intercept = np.polyfit(radii, np.log(np.maximum(m_y, 1e-300)), 1)
        env_M, env_K = max(float(slope), 0.0), float(np.exp(intercept))
    else:
        env_M, env_K = 0.0, float(m_y.max())

    # tail decay rate from the last half of the grid
    tail = slice(len(t_grid) // 2, None)
    rate = float(np.polyfit(t_grid[tail],
                            np.log(np.maximum(kappa[tail], 1e-300)), 1)[0])
    body = float(np.trapezoid(kappa, t_grid))
    body_w = float(np.trapezoid(np.exp(model.lip_L2 * t_grid) * kappa, t_grid))
    if non_integrable or rate >= 0:
        integral_kappa = np.inf
        non_integrable = True
        divergence_info = divergence_info or (
            f"no decay detected (fitted rate {rate:+.3g})"
        )
    else:
        integral_kappa = body + kappa[-1] / (-rate)
    rate_w = rate + model.lip_L2
    if non_integrable or rate_w >= 0:
        integral_weighted = np.inf
    else:
        integral_weighted = body_w + np.exp(model.lip_L2 * horizon) * kappa[-1] / (-rate_w)

    return KappaTable(
        t=t_grid,
        kappa=kappa,
        p_terminal=p_term,
        policy_ids=policy_ids,
        radius_n=int(radius_n),
        policies_probed=(
            f"lower envelope of the true supremum: {len(policy_family)} "
            "feedback policies probed"
        ),
        integral_kappa=float(integral_kappa),
        integral_weighted=float(integral_weighted),
        envelope_K=env_K,
        envelope_M=env_M,
        decay_rate=rate,
        lip_L2=model.lip_L2,
        non_integrable=non_integrable,
        divergence_info=divergence_info,
    )


def load_model(source):
    """Build a ControlModel from a JSON model file (path or parsed dict)."""
    if isinstance(source, (str, bytes)) or hasattr(source, "read"):
        with open(source) as fh:
            doc = json.load(fh)
    else:
        doc = dict(source)
    dim = int(doc["dim"])
    controls = np.atleast_2d(np.asarray(doc["controls"], float))
    return ControlModel(
        dim=dim,
        drift=coefficients.build_drift(doc["drift"], dim),
        discount_rate=coefficients.build_scalar(doc["discount_rate"], dim),
        running_reward=coefficients.build_scalar(doc["running_reward"], dim),
        terminal_reward=coefficients.build_terminal(doc["terminal_reward"], dim),
        controls=controls,
        lip_L1=float(doc["L1"]),
        lip_L2=float(doc["L2"]),
        domain_box=doc.get("domain_box"),
    )
