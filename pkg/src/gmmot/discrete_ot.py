"""Discrete couplings: exact linear-program OT, Sinkhorn, and Gromov-Wasserstein.

The Gromov-Wasserstein objective used throughout is

    E(w) = sum_{i,k,j,l} (Cx[i,k] - Cy[j,l])^2 w[i,j] w[k,l]

which expands into three terms so that the linearization

    L(w) = (Cx*Cx) r 1' + 1 c' (Cy*Cy)' - 2 Cx w Cy'      (r, c = marginals of w)

gives E(w) = <L(w), w> and gradient 2 L(w).  The plain solver runs a
conditional-gradient loop with exact line search on that quadratic; the
entropic variant replaces the inner linear program by Sinkhorn iterations.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.special import logsumexp

from .exceptions import DimensionMismatch, NumericalUnderflow
from .validation import as_float_array, check_marginal_pair, check_symmetric

MARGINAL_TOL_EXACT = 1e-9
MARGINAL_TOL_ENTROPIC = 1e-6
# exp() underflows to subnormal around 745; stay clear of it.
LOG_DOMAIN_THRESHOLD = 680.0


@dataclass
class SolverConfig:
    """Knobs shared by the iterative solvers.

    ``max_outer_iters`` caps every outer loop (Sinkhorn sweeps, conditional
    gradient steps, alternating rounds), ``anneal_*`` drive the regularization
    schedule eps0 * alpha^i over ``anneal_iters`` stages (0 disables
    annealing), and ``step_size_eta`` / ``inner_pgd_iters`` drive the
    projected gradient descent on the embedding.
    """

    max_outer_iters: int = 1000
    objective_rel_tol: float = 1e-9
    anneal_eps0: float = 1.0
    anneal_alpha: float = 0.95
    anneal_iters: int = 10
    step_size_eta: float = 0.01
    inner_pgd_iters: int = 100
    n_restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.max_outer_iters < 1 or self.inner_pgd_iters < 1 or self.n_restarts < 1:
            raise ValueError("iteration counts must be >= 1")
        if self.anneal_iters < 0:
            raise ValueError("anneal_iters must be >= 0")
        if not 0.0 < self.anneal_alpha < 1.0:
            raise ValueError("anneal_alpha must lie in (0, 1)")
        if self.anneal_eps0 <= 0 or self.objective_rel_tol <= 0 or self.step_size_eta <= 0:
            raise ValueError("anneal_eps0, objective_rel_tol, step_size_eta must be > 0")


@dataclass
class Coupling:
    """A transport plan with its objective value and solver metadata."""

    plan: np.ndarray
    value: float
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.plan.shape


def _check_cost(c, k, l, name="cost"):
    c = as_float_array(c, name)
    if c.shape != (k, l):
        raise DimensionMismatch(f"{name} must have shape {(k, l)}, got {c.shape}")
    return c


def _check_marginals(plan, a, b, tol, solver):
    err_r = np.abs(plan.sum(axis=1) - a).max()
    err_c = np.abs(plan.sum(axis=0) - b).max()
    err = max(err_r, err_c)
    if err > tol:
        raise RuntimeError(
            f"{solver} produced a plan violating its marginals by {err:.3e} (> {tol})"
        )
    return err


def solve_exact_ot(a, b, cost):
    """Exact optimal transport between discrete weights by linear programming.

    Parameters
    ----------
    a : ndarray, shape (K,)
    b : ndarray, shape (L,)
        Nonnegative weights with equal total mass.
    cost : ndarray, shape (K, L)

    Returns
    -------
    Coupling
        An optimal vertex of the transportation polytope; marginals hold to
        1e-9 and the reported value is ``sum(plan * cost)``.
    """
    a, b = check_marginal_pair(a, b)
    k, l = a.shape[0], b.shape[0]
    cost = _check_cost(cost, k, l)

    idx = np.arange(k * l)
    rows = np.concatenate([np.repeat(np.arange(k), l), k + idx % l])
    cols = np.concatenate([idx, idx])
    a_eq = sp.csr_matrix((np.ones(2 * k * l), (rows, cols)), shape=(k + l, k * l))
    res = linprog(
        cost.ravel(),
        A_eq=a_eq,
        b_eq=np.concatenate([a, b]),
        bounds=(0, None),
        method="highs",
    )
    if res.status != 0 or res.x is None:
        raise RuntimeError(f"exact OT solver failed: {res.message}")
    # the LP reconstruction can drift past the marginal contract; round back
    # onto the transportation polytope before checking
    plan = _round_to_marginals(np.clip(res.x.reshape(k, l), 0.0, None), a, b)
    err = _check_marginals(plan, a, b, MARGINAL_TOL_EXACT, "exact OT")
    value = float(np.sum(plan * cost))
    return Coupling(plan, value, {"solver": "exact", "marginal_error": err})


def sinkhorn(a, b, cost, eps, config=None):
    """Entropy-regularized OT by Sinkhorn scaling.

    Iterates until both marginal max-errors fall below 1e-9 or
    ``config.max_outer_iters`` sweeps have run.  Switches to log-domain
    updates when ``exp(-cost/eps)`` would underflow.  The returned plan gets
    one final row-then-column rescaling so its marginals are exact up to
    roundoff; the rescaling is recorded in ``meta``.
    """
    config = config or SolverConfig()
    a, b = check_marginal_pair(a, b)
    k, l = a.shape[0], b.shape[0]
    cost = _check_cost(cost, k, l)
    if eps <= 0:
        raise ValueError("eps must be > 0")

    # The plan is invariant to shifting the cost; shift for headroom.
    shifted = cost - cost.min()
    scaled = shifted / eps
    if not np.all(np.isfinite(scaled)):
        raise NumericalUnderflow(f"eps={eps:g} is too small for this cost scale")
    log_domain = scaled.max() > LOG_DOMAIN_THRESHOLD

    log_a = np.log(a)
    log_b = np.log(b)
    n_iter = 0
    if log_domain:
        f = np.zeros(k)
        g = np.zeros(l)
        for n_iter in range(1, config.max_outer_iters + 1):
            f = log_a - logsumexp(g[None, :] - scaled, axis=1)
            g = log_b - logsumexp(f[:, None] - scaled, axis=0)
            plan = np.exp(f[:, None] + g[None, :] - scaled)
            if _marginal_err(plan, a, b) <= MARGINAL_TOL_EXACT:
                break
    else:
        kernel = np.exp(-scaled)
        u = np.ones(k)
        v = np.ones(l)
        for n_iter in range(1, config.max_outer_iters + 1):
            kv = kernel @ v
            if np.any(kv <= 0) or not np.all(np.isfinite(kv)):
                raise NumericalUnderflow(
                    f"Sinkhorn scaling underflowed at eps={eps:g}; decrease the "
                    "cost scale or increase eps"
                )
            u = a / kv
            ktu = kernel.T @ u
            if np.any(ktu <= 0) or not np.all(np.isfinite(ktu)):
                raise NumericalUnderflow(
                    f"Sinkhorn scaling underflowed at eps={eps:g}; decrease the "
                    "cost scale or increase eps"
                )
            v = b / ktu
            plan = u[:, None] * kernel * v[None, :]
            if _marginal_err(plan, a, b) <= MARGINAL_TOL_EXACT:
                break

    raw_err = _marginal_err(plan, a, b)
    plan = _round_to_marginals(plan, a, b)
    err = _check_marginals(plan, a, b, MARGINAL_TOL_ENTROPIC, "sinkhorn")
    value = float(np.sum(plan * cost))
    return Coupling(
        plan,
        value,
        {
            "solver": "sinkhorn",
            "eps": eps,
            "iterations": n_iter,
            "log_domain": log_domain,
            "marginal_error": err,
            "pre_rounding_marginal_error": raw_err,
            "rounding": "capped row/column scaling with rank-one correction",
        },
    )


def _marginal_err(plan, a, b):
    return max(
        np.abs(plan.sum(axis=1) - a).max(), np.abs(plan.sum(axis=0) - b).max()
    )


def _round_to_marginals(plan, a, b):
    """Project a nonnegative matrix onto the transportation polytope.

    Rows are scaled down to at most their targets, then columns, and the
    remaining mass deficit is restored by a nonnegative rank-one update, so
    the result has exact marginals up to roundoff.
    """
    r = plan.sum(axis=1)
    plan = plan * np.minimum(a / np.where(r > 0, r, 1.0), 1.0)[:, None]
    c = plan.sum(axis=0)
    plan = plan * np.minimum(b / np.where(c > 0, c, 1.0), 1.0)[None, :]
    err_a = a - plan.sum(axis=1)
    err_b = b - plan.sum(axis=0)
    total = err_a.sum()
    if total > 0:
        plan = plan + np.outer(err_a, err_b) / total
    return plan


def check_self_cost(c, name="cost"):
    """Validate a symmetric zero-diagonal within-space cost matrix."""
    c = check_symmetric(c, name, tol=1e-10)
    scale = 1.0 + np.abs(c).max() if c.size else 1.0
    if np.abs(np.diag(c)).max(initial=0.0) > 1e-10 * scale:
        raise ValueError(f"{name} must have a zero diagonal")
    np.fill_diagonal(c, 0.0)
    return c


def _gw_bilinear(u, v, cx2, cy2, cx, cy):
    ru, cu = u.sum(axis=1), u.sum(axis=0)
    rv, cv = v.sum(axis=1), v.sum(axis=0)
    return (
        ru @ cx2 @ rv + cu @ cy2 @ cv - 2.0 * np.sum(u * (cx @ v @ cy.T))
    )


def _gw_linearization(plan, cx2, cy2, cx, cy):
    r, c = plan.sum(axis=1), plan.sum(axis=0)
    return (cx2 @ r)[:, None] + (cy2 @ c)[None, :] - 2.0 * cx @ plan @ cy.T


def gw_objective(omega, cx, cy):
    """Evaluate the Gromov-Wasserstein quadratic at a plan.

    ``omega`` may be a :class:`Coupling` or a raw (K, L) array.
    """
    plan = omega.plan if isinstance(omega, Coupling) else as_float_array(omega, "omega")
    cx = as_float_array(cx, "cx")
    cy = as_float_array(cy, "cy")
    if plan.ndim != 2 or cx.shape != (plan.shape[0],) * 2 or cy.shape != (plan.shape[1],) * 2:
        raise DimensionMismatch(
            f"incompatible shapes: plan {plan.shape}, cx {cx.shape}, cy {cy.shape}"
        )
    return float(_gw_bilinear(plan, plan, cx * cx, cy * cy, cx, cy))


def _check_gw_inputs(a, b, cx, cy, init):
    a, b = check_marginal_pair(a, b)
    cx = check_self_cost(cx, "cx")
    cy = check_self_cost(cy, "cy")
    if cx.shape[0] != a.shape[0] or cy.shape[0] != b.shape[0]:
        raise DimensionMismatch("cost matrices do not match the weight lengths")
    plan = init.plan if isinstance(init, Coupling) else as_float_array(init, "init")
    if plan.shape != (a.shape[0], b.shape[0]):
        raise DimensionMismatch(f"init must have shape {(a.shape[0], b.shape[0])}")
    if _marginal_err(plan, a, b) > MARGINAL_TOL_ENTROPIC:
        raise ValueError("init is not a feasible coupling of (a, b)")
    return a, b, cx, cy, plan


def solve_gw(a, b, cx, cy, init, config=None):
    """Local Gromov-Wasserstein solve by conditional gradient from ``init``.

    Each step solves the linearized problem exactly and takes the step length
    minimizing the quadratic on the segment, so the objective sequence is
    non-increasing.  Stops when the relative decrease falls below
    ``config.objective_rel_tol``.
    """
    config = config or SolverConfig()
    a, b, cx, cy, plan = _check_gw_inputs(a, b, cx, cy, init)
    cx2, cy2 = cx * cx, cy * cy

    # Repair approximate (e.g. entropic) init marginals so every conditional
    # gradient iterate inherits exact feasibility.
    plan = _round_to_marginals(plan, a, b)

    value = _gw_bilinear(plan, plan, cx2, cy2, cx, cy)
    history = [value]
    for _ in range(config.max_outer_iters):
        grad = _gw_linearization(plan, cx2, cy2, cx, cy)
        target = solve_exact_ot(a, b, grad - grad.min()).plan
        delta = target - plan
        slope = 2.0 * _gw_bilinear(plan, delta, cx2, cy2, cx, cy)
        curv = _gw_bilinear(delta, delta, cx2, cy2, cx, cy)
        if curv > 0:
            tau = min(max(-slope / (2.0 * curv), 0.0), 1.0)
        else:
            tau = 1.0 if slope + curv < 0 else 0.0
        if tau == 0.0:
            break
        plan = plan + tau * delta
        new_value = _gw_bilinear(plan, plan, cx2, cy2, cx, cy)
        if new_value > value + 1e-12 * (1.0 + abs(value)):
            raise RuntimeError("conditional gradient step increased the objective")
        history.append(new_value)
        if value - new_value <= config.objective_rel_tol * max(abs(value), 1e-16):
            value = new_value
            break
        value = new_value

    err = _check_marginals(plan, a, b, MARGINAL_TOL_EXACT, "gw")
    return Coupling(
        plan,
        float(value),
        {
            "solver": "gw",
            "iterations": len(history) - 1,
            "objectives": history,
            "marginal_error": err,
        },
    )


def solve_entropic_gw(a, b, cx, cy, eps, init, config=None):
    """Entropic Gromov-Wasserstein: repeated Sinkhorn on the linearized cost."""
    config = config or SolverConfig()
    a, b, cx, cy, plan = _check_gw_inputs(a, b, cx, cy, init)
    cx2, cy2 = cx * cx, cy * cy

    value = _gw_bilinear(plan, plan, cx2, cy2, cx, cy)
    n_iter = 0
    for n_iter in range(1, config.max_outer_iters + 1):
        grad = _gw_linearization(plan, cx2, cy2, cx, cy)
        plan = sinkhorn(a, b, grad, eps, config).plan
        new_value = _gw_bilinear(plan, plan, cx2, cy2, cx, cy)
        if abs(value - new_value) <= config.objective_rel_tol * max(abs(value), 1e-16):
            value = new_value
            break
        value = new_value

    err = _check_marginals(plan, a, b, MARGINAL_TOL_ENTROPIC, "entropic gw")
    return Coupling(
        plan,
        float(value),
        {"solver": "entropic_gw", "eps": eps, "iterations": n_iter, "marginal_error": err},
    )
