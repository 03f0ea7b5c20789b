"""Vectorized multi-scenario stepper for the bulk property suites.

Runs S synchronous single-core scenarios side by side as (S, n) arrays,
using the same arithmetic as the per-step engine (response = C / v through
the multimedia job model, identical operation order), so results are
bit-identical to fairband.run_scenario on any single scenario. Inactive
padding slots carry zero weight and zero bandwidth and contribute nothing.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class BatchResult:
    bandwidths: np.ndarray        # (S, n) final
    services: np.ndarray          # (S, n) final
    min_bandwidth: np.ndarray     # (S,) over active slots, all steps (post-start)
    max_sum: np.ndarray           # (S,) max bandwidth sum over all steps
    max_box_violation: float      # how far any bandwidth left [0, upper]
    sum_identity_error: float     # worst error of the sum identity, projection-free steps
    contained_from: np.ndarray    # (S,) step from which all bandwidths stayed <= zeta
    ever_left: np.ndarray         # (S,) True if some bandwidth re-crossed zeta after containment


def run_batch(alpha, deadline, lam, s0, v0, s_floor, eps, steps,
              active=None, upper=1.0, zeta=None):
    """Advance all scenarios `steps` times.

    alpha, deadline, lam, s0, v0, s_floor: (S, n) arrays (multimedia model,
    execution time alpha * s, fixed deadline). eps: (S, 1) or scalar step
    sizes. active: boolean (S, n) mask of real apps.
    """
    alpha = np.asarray(alpha, float)
    S, n = alpha.shape
    D = np.asarray(deadline, float)
    lam = np.asarray(lam, float)
    s = np.asarray(s0, float).copy()
    v = np.asarray(v0, float).copy()
    floor = np.asarray(s_floor, float)
    eps = np.broadcast_to(np.asarray(eps, float), (S, 1)) if np.ndim(eps) else \
        np.full((S, 1), float(eps))
    if active is None:
        active = np.ones((S, n), bool)

    min_v = np.full(S, np.inf)
    max_sum = np.full(S, -np.inf)
    box_viol = 0.0
    ident_err = 0.0
    contained = np.full(S, -1)
    left = np.zeros(S, bool)
    big = np.where(active, 0.0, np.inf)  # padding never counts toward minima

    for k in range(steps):
        if k == 0:
            f = np.zeros((S, n))
        else:
            C = alpha * s
            with np.errstate(divide="ignore"):
                R = C / v
            f = np.where(active, np.where(v > 0.0, D / R - 1.0, -1.0), 0.0)
        neg = np.minimum(f, 0.0)
        w = lam * neg
        total = w.sum(axis=1, keepdims=True)
        F = -(1.0 - v) * w + v * (total - w)
        raw = v + eps * F
        vnew = np.clip(raw, 0.0, upper)
        projected = np.any((raw < 0.0) | (raw > upper), axis=1)
        sums_next = vnew.sum(axis=1)
        sums_now = v.sum(axis=1)
        free = ~projected
        if free.any():
            lhs = sums_next[free] - 1.0
            rhs = (sums_now[free] - 1.0) * (1.0 + eps[free, 0]
                                            * (lam * neg)[free].sum(axis=1))
            ident_err = max(ident_err, float(np.max(np.abs(lhs - rhs))))
        v = vnew
        s = np.maximum(floor, s + eps * f)

        vv = v + big
        min_v = np.minimum(min_v, vv.min(axis=1))
        max_sum = np.maximum(max_sum, v.sum(axis=1))
        box_viol = max(box_viol,
                       float(np.max(np.maximum(v - upper, -v), initial=0.0)))
        if zeta is not None:
            inside = np.all(np.where(active, v, 0.0) <= zeta, axis=1)
            newly = inside & (contained < 0)
            contained[newly] = k
            left |= (~inside) & (contained >= 0)

    return BatchResult(v, s, min_v, max_sum, box_viol, ident_err,
                       contained, left)
