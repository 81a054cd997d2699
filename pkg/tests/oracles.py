"""Independent numerical oracles used by several test modules."""
import numpy as np
from scipy.optimize import linprog, minimize


def hyperplane_distance_oracle(w, b, x, p, restarts=50, seed=0):
    """min ||z - x||_p subject to w.z + b = 0, solved numerically.

    p = 1 and p = inf are linear programs; finite p > 1 eliminates one
    coordinate of r = z - x and minimizes the smooth convex ||r||_p^p.
    """
    w, x = np.asarray(w, float), np.asarray(x, float)
    d = w.size
    f = float(w @ x + b)
    if p == 1:
        # r = u - v, u, v >= 0, minimize sum(u + v) s.t. w.(u - v) = -f
        res = linprog(np.ones(2 * d), A_eq=np.concatenate([w, -w])[None], b_eq=[-f],
                      bounds=[(0, None)] * (2 * d), method="highs")
        return res.fun
    if np.isinf(p):
        # minimize t s.t. -t <= r_i <= t, w.r = -f
        c = np.zeros(d + 1)
        c[-1] = 1.0
        A_ub = np.block([[np.eye(d), -np.ones((d, 1))], [-np.eye(d), -np.ones((d, 1))]])
        res = linprog(c, A_ub=A_ub, b_ub=np.zeros(2 * d),
                      A_eq=np.concatenate([w, [0.0]])[None], b_eq=[-f],
                      bounds=[(None, None)] * d + [(0, None)], method="highs")
        return res.fun
    j = int(np.argmax(np.abs(w)))
    others = [i for i in range(d) if i != j]
    scale = abs(f) / np.linalg.norm(w)

    def full(y):
        r = np.empty(d)
        r[others] = y
        r[j] = (-f - w[others] @ y) / w[j]
        return r

    def obj(y):
        r = full(y) / scale
        a = np.abs(r)
        g_full = p * a ** (p - 1) * np.sign(r) / scale
        g = g_full[others] - g_full[j] * w[others] / w[j]
        return np.sum(a ** p), g

    rng = np.random.default_rng(seed)
    best = np.inf
    for k in range(restarts):
        y0 = rng.standard_normal(d - 1) * scale if k else np.zeros(d - 1)
        res = minimize(obj, y0, jac=True, method="BFGS", options={"gtol": 1e-12, "maxiter": 5000})
        best = min(best, res.fun)
        if k >= 4 and d <= 2:
            break
    return scale * best ** (1.0 / p)
