"""Minimal lp perturbations reaching the decision boundary.

Linear models have closed forms: the distance from ``x`` to ``{w.z + b = 0}`` in
lp is ``|f(x)| / ||w||_{p'}``.  Differentiable nonlinear models are handled by
repeatedly solving that closed form on the local linearization.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import LinearModel, MulticlassLinearModel, as_vector, class_scores
from .noise import conjugate, lp_norm, parse_p


@dataclass
class AdversarialResult:
    r_star: np.ndarray
    norm: float
    p: float
    target_class: int
    iterations: int = 1
    converged: bool = True
    overshoot: float = 0.0


def hyperplane_step(w, fx: float, p) -> np.ndarray:
    """Smallest lp vector ``r`` with ``fx + w.r = 0``."""
    p = parse_p(p)
    w = np.asarray(w, dtype=float)
    if fx == 0:
        return np.zeros_like(w)
    q = conjugate(p)
    s = -np.sign(fx)
    if np.isinf(p):
        return s * abs(fx) / np.abs(w).sum() * np.sign(w)
    if p == 1:
        i = int(np.argmax(np.abs(w)))  # first maximal index on ties
        r = np.zeros_like(w)
        r[i] = s * np.sign(w[i]) * abs(fx) / abs(w[i])
        return r
    a = np.abs(w)
    m = a.max()
    # |w_i|^(q-1) / ||w||_q^q, scaled by max|w| to keep powers in range
    u = (a / m) ** (q - 1.0)
    denom = m * ((a / m) ** q).sum()
    return s * np.sign(w) * u * abs(fx) / denom


def linear_min_perturbation(model: LinearModel, x, p) -> AdversarialResult:
    p = parse_p(p)
    x = as_vector(x, model.d)
    fx = float(model.scores(x))
    if fx == 0:
        raise ValueError("x lies on the decision boundary")
    r = hyperplane_step(model.w, fx, p)
    norm = abs(fx) / float(lp_norm(model.w, conjugate(p)))
    return AdversarialResult(r, norm, p, target_class=0 if fx > 0 else 1)


def multiclass_linear_min_perturbation(model: MulticlassLinearModel, x, p) -> AdversarialResult:
    p = parse_p(p)
    x = as_vector(x, model.d)
    s = model.scores(x)
    k = int(np.argmax(s))
    if np.sum(s == s[k]) > 1:
        raise ValueError("tie at the argmax class")
    q = conjugate(p)
    best = (np.inf, None)
    for l in range(model.n_classes):
        if l == k:
            continue
        dist = (s[k] - s[l]) / float(lp_norm(model.W[k] - model.W[l], q))
        if dist < best[0]:
            best = (dist, l)
    dist, j = best
    # boundary between k and j: (w_j - w_k).z + (b_j - b_k) = 0, currently negative
    r = hyperplane_step(model.W[j] - model.W[k], s[j] - s[k], p)
    return AdversarialResult(r, float(dist), p, target_class=j)


def min_perturbation(model, x, p, **kwargs) -> AdversarialResult:
    """Closed form for linear models, iterative search otherwise."""
    if isinstance(model, LinearModel):
        return linear_min_perturbation(model, x, p)
    if isinstance(model, MulticlassLinearModel):
        return multiclass_linear_min_perturbation(model, x, p)
    return iterative_min_perturbation(model, x, p, **kwargs)


def _top(model, z) -> int:
    return int(np.argmax(class_scores(model, z)[0]))


def _flip_scale(model, x, r, k: int, hi: float, steps: int = 60) -> float:
    """Smallest ``t`` in ``(0, hi]`` (to bisection precision) with a label other
    than ``k`` at ``x + t r``; the label at ``x + hi r`` must differ from ``k``."""
    lo = 0.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if _top(model, x + mid * r) != k:
            hi = mid
        else:
            lo = mid
    return hi


def iterative_min_perturbation(model, x, p, max_iter: int = 50, overshoot: float = 0.02,
                               tol: float = 1e-12, refine: int = 10) -> AdversarialResult:
    """Linearize-and-project search (DeepFool generalized to lp).

    Each iteration linearizes every pairwise function ``f_l - f_k`` around the
    current iterate, picks the class with the smallest lp distance to its
    linearized boundary, and moves by ``(1 + overshoot)`` times that step.
    Non-convergence is reported through ``converged=False``.

    After the label flips, up to ``refine`` rounds shorten the result: locate
    the boundary crossing, linearize there, project ``x`` onto that tangent
    hyperplane and keep the new crossing if it is closer.  The first step from
    deep inside a class can overshoot a lot when the score saturates; the
    refinement removes most of that.  Linear models are left unchanged.
    """
    p = parse_p(p)
    x = as_vector(x, model.d)
    q = conjugate(p)
    s0 = class_scores(model, x)[0]
    k = int(np.argmax(s0))
    r_tot = np.zeros_like(x)
    xi = x.copy()
    target = k
    it = 0
    while it < max_iter:
        s = class_scores(model, xi)[0]
        cur = int(np.argmax(s))
        if cur != k:
            target = cur
            break
        best = (np.inf, None, None)
        for l in range(len(s)):
            if l == k:
                continue
            g = model.gradient(xi, (l, k))
            gn = float(lp_norm(g, q))
            if gn <= tol:
                continue
            dist = (s[k] - s[l]) / gn
            if dist < best[0]:
                best = (dist, l, g)
        if best[1] is None:
            break
        _, l, g = best
        step = hyperplane_step(g, s[l] - s[k], p)
        r_tot = r_tot + (1.0 + overshoot) * step
        xi = x + r_tot
        it += 1
        target = l
    converged = _top(model, x + r_tot) != k
    if converged:
        target = _top(model, x + r_tot)
        if refine > 0:
            r_tot, target = _refine(model, x, p, k, r_tot, overshoot, refine)
    return AdversarialResult(r_tot, float(lp_norm(r_tot, p)), p, target_class=target,
                             iterations=it, converged=converged, overshoot=overshoot)


def _refine(model, x, p, k: int, r_tot, overshoot: float, rounds: int):
    rb = _flip_scale(model, x, r_tot, k, 1.0) * r_tot
    best = float(lp_norm(rb, p))
    for _ in range(rounds):
        xb = x + rb
        j = _top(model, xb)
        s = class_scores(model, xb)[0]
        g = model.gradient(xb, (j, k))
        c = (s[j] - s[k]) - float(g @ rb)  # tangent-plane value at x
        if c >= 0 or not np.any(g):
            break
        rc = hyperplane_step(g, c, p)
        scale = 1.0 + overshoot
        for _ in range(6):
            if _top(model, x + scale * rc) != k:
                break
            scale *= 2.0
        else:
            break
        cand = _flip_scale(model, x, rc, k, scale) * rc
        n = float(lp_norm(cand, p))
        if n >= best * (1 - 1e-9):
            break
        rb, best = cand, n
    r = (1.0 + overshoot) * rb
    if _top(model, x + r) == k or lp_norm(r, p) >= lp_norm(r_tot, p):
        return r_tot, _top(model, x + r_tot)
    return r, _top(model, x + r)
