"""Writes scorer_oracle.json: random posteriors with entropy, margin and
least-confidence values evaluated at 50 digits.

    python3 gen_scorer_oracle.py > scorer_oracle.json
"""

import json
import random

import mpmath

mpmath.mp.dps = 50
rng = random.Random(20240917)


def posterior(c):
    kind = rng.random()
    if kind < 0.1:
        # peaked, with an exact zero
        xs = [rng.random() ** 8 for _ in range(c)]
        xs[rng.randrange(c)] = 0.0
        xs[rng.randrange(c)] += 1.0
    elif kind < 0.2:
        # tied leaders
        xs = [rng.random() for _ in range(c)]
        top = max(xs)
        xs[(xs.index(top) + 1) % c] = top
    else:
        xs = [rng.expovariate(1.0) ** rng.choice([1, 3]) for _ in range(c)]
    s = sum(xs)
    return [x / s for x in xs]


def scores(p):
    mp = [mpmath.mpf(x) for x in p]
    ent = -mpmath.fsum(x * mpmath.log(x) for x in mp if x > 0)
    top = sorted(mp, reverse=True)
    return {
        "entropy": float(ent),
        "margin": float(-(top[0] - top[1])),
        "least_confidence": float(1 - top[0]),
    }


cases = []
for c in (2, 3, 5):
    for _ in range(1000):
        p = posterior(c)
        cases.append({"p": p, **scores(p)})

print(json.dumps({"cases": cases}, indent=None, separators=(",", ":")))
