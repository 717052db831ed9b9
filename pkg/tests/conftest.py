import math
import os
from itertools import product

import numpy as np
import pytest

from webcurv.expr import WebDefinition, evaluate, parse

WEBS_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "webs")

W4 = ["x", "y", "x + y", "x*y + x"]
W5 = W4 + ["x^2 + y^2"]
W6 = W5 + ["exp(x)*(1 + y)"]

# 20 elementary expressions and a point inside each one's domain
CORPUS = [
    ("x", (0.3, -0.2)),
    ("x*y", (2.0, 3.0)),
    ("x^3 - 2*x*y^2 + y", (0.4, 0.7)),
    ("exp(x*y)", (0.5, 0.25)),
    ("exp(x*y) - log(1 + x)", (0.6, 0.3)),
    ("log(1 + x*y)", (0.2, 0.9)),
    ("sin(x + 2*y)", (0.1, 0.2)),
    ("cos(x*y) + sin(x)", (1.1, -0.4)),
    ("sqrt(1 + x^2 + y^2)", (0.3, 0.5)),
    ("1/(1 + x + y)", (0.2, 0.1)),
    ("(x - y)/(2 + x*y)", (0.7, -0.3)),
    ("exp(-x)*cos(y)", (0.5, 1.2)),
    ("x^2*y - y^3/3", (-0.6, 0.8)),
    ("log(x^2 + y^2)", (0.9, 0.4)),
    ("sin(x)*sin(y)", (0.8, 0.6)),
    ("sqrt(x)*exp(y)", (1.3, -0.2)),
    ("(1 + x)^(-2)", (0.25, 0.0)),
    ("exp(sin(x*y))", (0.7, 0.9)),
    ("-exp(-x)/3 + exp(y)", (0.4, 0.3)),
    ("x*y + x + cos(x - y)^2", (0.15, 0.55)),
]


def web(*texts):
    return WebDefinition.from_strings(*texts)


def fd_partial(text, point, a, b, h=2e-2):
    """Central-difference estimate of d^(a+b) f / dx^a dy^b, Richardson-extrapolated."""
    e = parse(text)
    x0, y0 = point

    def stencil(n, step):
        return [((n / 2 - k) * step, (-1) ** k * math.comb(n, k) / step ** n)
                for k in range(n + 1)]

    def central(step):
        total = 0.0
        for (dx, wx), (dy, wy) in product(stencil(a, step), stencil(b, step)):
            total += wx * wy * evaluate(e, x0 + dx, y0 + dy)
        return total

    return (4 * central(h / 2) - central(h)) / 3


def rel_err(got, want):
    return abs(got - want) / max(1.0, abs(want))


def random_normalized_web(rng, d):
    """Polynomial web ``f_1..f_{d-1}, y`` with f_ix away from 0 at the origin region."""
    texts = []
    for i in range(d - 1):
        c = rng.uniform(-1, 1, 6).tolist()
        lead = float(rng.uniform(0.5, 1.5) * rng.choice([-1, 1]))
        texts.append(f"{lead!r}*x + {c[0]!r}*y + {c[1]!r}*x^2 + {c[2]!r}*x*y + "
                     f"{c[3]!r}*y^2 + {c[4]!r}*x^2*y + {c[5]!r}*x*y^3")
    texts.append("y")
    return web(*texts)


def well_separated(slopes, gap=0.05):
    s = sorted(slopes)
    return all(b - a > gap for a, b in zip(s, s[1:]))


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
