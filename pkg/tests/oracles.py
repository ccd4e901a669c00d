"""Independent reference implementations used to check the library.

Everything here is written as plain loops over pairs/samples, on purpose:
these are the brute-force oracles the vectorized library code is tested
against, so they must not share its implementation strategy.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict

import numpy as np


def finite_difference_gradient(f, x, step=1e-5):
    """Central finite differences of a scalar function at x (elementwise)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        xp = x.copy()
        xp[i] += step
        xm = x.copy()
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2.0 * step)
    return g


def c_index_oracle(risk, t, e):
    concordant = 0.0
    comparable = 0
    n = len(t)
    for i in range(n):
        for j in range(n):
            if t[i] < t[j] and e[i] == 1:
                comparable += 1
                if risk[i] > risk[j]:
                    concordant += 1.0
                elif risk[i] == risk[j]:
                    concordant += 0.5
    if comparable == 0:
        raise ValueError("no comparable pairs")
    return concordant / comparable


def km_oracle(t, e):
    """Product-limit estimate as (event_times, survival) lists."""
    times = sorted({ti for ti, ei in zip(t, e) if ei == 1})
    surv = []
    s = 1.0
    for u in times:
        n_at_risk = sum(1 for ti in t if ti >= u)
        d = sum(1 for ti, ei in zip(t, e) if ti == u and ei == 1)
        s *= 1.0 - d / n_at_risk
        surv.append(s)
    return times, surv


def logrank_oracle(t, e, groups):
    labels = sorted(set(groups))
    observed = defaultdict(float)
    expected = defaultdict(float)
    for u in sorted({ti for ti, ei in zip(t, e) if ei == 1}):
        n = sum(1 for ti in t if ti >= u)
        d = sum(1 for ti, ei in zip(t, e) if ti == u and ei == 1)
        for lab in labels:
            n_g = sum(1 for ti, gi in zip(t, groups) if ti >= u and gi == lab)
            d_g = sum(
                1
                for ti, ei, gi in zip(t, e, groups)
                if ti == u and ei == 1 and gi == lab
            )
            observed[lab] += d_g
            expected[lab] += n_g * d / n
    stat = 0.0
    for lab in labels:
        if expected[lab] > 0:
            stat += (observed[lab] - expected[lab]) ** 2 / expected[lab]
    return stat, len(labels) - 1


def purity_oracle(pred, truth):
    clusters = defaultdict(list)
    for p, tr in zip(pred, truth):
        clusters[p].append(tr)
    correct = sum(max(Counter(members).values()) for members in clusters.values())
    return correct / len(pred)


def ari_oracle(pred, truth):
    """Adjusted Rand index by explicit pair counting."""
    n = len(pred)
    a = b = c = d = 0
    for i in range(n):
        for j in range(i + 1, n):
            same_p = pred[i] == pred[j]
            same_t = truth[i] == truth[j]
            if same_p and same_t:
                a += 1
            elif same_p:
                b += 1
            elif same_t:
                c += 1
            else:
                d += 1
    denom = (a + b) * (b + d) + (a + c) * (c + d)
    if denom == 0:
        return 1.0
    return 2.0 * (a * d - b * c) / denom


def nmi_oracle(pred, truth):
    n = len(pred)
    joint = Counter(zip(pred, truth))
    pu = Counter(pred)
    pv = Counter(truth)
    mi = 0.0
    for (u, v), cnt in joint.items():
        p = cnt / n
        mi += p * math.log(p / ((pu[u] / n) * (pv[v] / n)))
    hu = -sum((c / n) * math.log(c / n) for c in pu.values())
    hv = -sum((c / n) * math.log(c / n) for c in pv.values())
    if hu + hv == 0:
        return 0.0
    return mi / (0.5 * (hu + hv))


def silhouette_oracle(x, labels):
    n = len(labels)
    scores = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            scores.append(0.0)
            continue
        a = sum(math.dist(x[i], x[j]) for j in own) / len(own)
        b = math.inf
        for lab in set(labels):
            if lab == labels[i]:
                continue
            members = [j for j in range(n) if labels[j] == lab]
            b = min(b, sum(math.dist(x[i], x[j]) for j in members) / len(members))
        m = max(a, b)
        scores.append(0.0 if m == 0 else (b - a) / m)
    return sum(scores) / n


def accuracy_matched_oracle(pred, truth):
    """Best one-to-one cluster/class accuracy by exhaustive permutation."""
    clusters = sorted(set(pred))
    classes = sorted(set(truth))
    size = max(len(clusters), len(classes))
    counts = defaultdict(int)
    for p, tr in zip(pred, truth):
        counts[(p, tr)] += 1
    best = 0
    for perm in itertools.permutations(range(size)):
        total = 0
        for ci, cls_i in enumerate(perm):
            if ci < len(clusters) and cls_i < len(classes):
                total += counts[(clusters[ci], classes[cls_i])]
        best = max(best, total)
    return best / len(pred)


def ntxent_oracle(zv, zw, tau, include_positive=False):
    n = zv.shape[0]
    total = 0.0
    for i in range(n):
        num = math.exp(float(np.dot(zv[i], zw[i])) / tau)
        denom = 0.0
        for j in range(n):
            if j == i and not include_positive:
                continue
            denom += math.exp(float(np.dot(zv[i], zw[j])) / tau)
        total += -math.log(num / denom)
    return total / n


def survival_loss_oracle(z, t, e, cfg):
    n = len(t)
    pull = push = 0.0
    n_pull = n_push = 0
    for i in range(n):
        for j in range(i + 1, n):
            d = math.dist(z[i], z[j])
            dt = abs(t[i] - t[j])
            w = abs(math.tanh(t[i] - t[j])) if cfg.tanh_weighting else 1.0
            wp = (1.0 - w) if cfg.tanh_weighting else 1.0
            if e[i] == 1 and e[j] == 1 and dt < cfg.delta_time:
                pull += wp * d * d
                n_pull += 1
            if dt >= cfg.delta_time:
                push += w * max(0.0, cfg.delta_dist - d) ** 2
                n_push += 1
    return cfg.lambda_pull * pull / max(n_pull, 1) + cfg.lambda_push * push / max(
        n_push, 1
    )


def chi2_sf_quadrature(x, df):
    """Upper tail of the chi-square density by adaptive quadrature."""
    from scipy.integrate import quad

    def pdf(u):
        a = df / 2.0
        return u ** (a - 1.0) * math.exp(-u / 2.0) / (2.0**a * math.gamma(a))

    value, _ = quad(pdf, x, np.inf, limit=200)
    return value
