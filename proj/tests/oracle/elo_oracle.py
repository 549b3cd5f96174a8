"""Golden ratings for a small contest history.

Performance p_i solves
  sum_{j ranked at or below i} (tanh((p - mu_j) / (2 d_j)) - 1) / d_j
+ sum_{j ranked at or above i} (tanh((p - mu_j) / (2 d_j)) + 1) / d_j = 0
with d_j = sqrt(3)/pi * sqrt(sigma_j^2 + beta^2) over the pre-contest field.
Then w = sigma^2 / (sigma^2 + beta^2), mu' = (1 - w) mu + w p and
sigma'^2 = sigma^2 beta^2 / (sigma^2 + beta^2)."""
import json
import math
import sys

from scipy.optimize import brentq

BETA, SIGMA0, MU0 = 200.0, 350.0, 1500.0


def apply_contest(state, ranking):
    field = {p: state.get(p, (MU0, SIGMA0)) for p, _ in ranking}
    if len(field) < 2:
        return dict(state)
    rank = dict(ranking)
    d = {p: math.sqrt(3) / math.pi * math.sqrt(s * s + BETA * BETA) for p, (_, s) in field.items()}

    def f(p, i):
        total = 0.0
        for j, (mu, _) in field.items():
            x = math.tanh((p - mu) / (2 * d[j]))
            if rank[j] >= rank[i]:
                total += (x - 1) / d[j]
            if rank[j] <= rank[i]:
                total += (x + 1) / d[j]
        return total

    new = dict(state)
    for i, (mu, s) in field.items():
        perf = brentq(lambda p: f(p, i), -1e5, 1e5, xtol=1e-12, rtol=1e-15, maxiter=500)
        w = s * s / (s * s + BETA * BETA)
        new[i] = ((1 - w) * mu + w * perf, math.sqrt(s * s * BETA * BETA / (s * s + BETA * BETA)))
    return new


CONTESTS = [
    ("c1", [("alice", 1), ("bob", 2)]),
    ("c2", [("carol", 1), ("alice", 2), ("bob", 3), ("dave", 4)]),
    ("c3", [("dave", 1), ("erin", 2), ("erin2", 2), ("bob", 4), ("alice", 5)]),
    ("c4", [("frank", 1)]),
    ("c5", [("alice", 1), ("carol", 2), ("dave", 3), ("erin", 3), ("frank", 3), ("gus", 6), ("bob", 7)]),
    ("c6", [("gus", 1), ("bob", 2), ("carol", 3)]),
]


def main(out):
    state = {}
    snapshots = []
    for cid, ranking in CONTESTS:
        state = apply_contest(state, ranking)
        snapshots.append({"id": cid, "ratings": {p: list(state[p]) if p in state else None for p, _ in ranking}})
    gold = {
        "contests": [{"id": c, "ranking": [[p, r] for p, r in rk]} for c, rk in CONTESTS],
        "snapshots": snapshots,
        "final": {p: list(v) for p, v in state.items()},
    }
    with open(out, "w") as f:
        json.dump(gold, f, indent=1, sort_keys=True)


if __name__ == "__main__":
    main(sys.argv[1])
