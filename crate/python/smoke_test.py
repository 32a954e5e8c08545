#!/usr/bin/env python3
"""Import the kolmo_py extension straight from the cargo target dir and poke
every exported entry point once.  Build it first:

    cargo build -p kolmo-py          # or --release
    python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        ROOT / "target" / "release" / "libkolmo_py.so",
        ROOT / "target" / "debug" / "libkolmo_py.so",
        ROOT / "target" / "release" / "libkolmo_py.dylib",
        ROOT / "target" / "debug" / "libkolmo_py.dylib",
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit("no libkolmo_py found under target/; run `cargo build -p kolmo-py`")
    src = max(built, key=lambda p: p.stat().st_mtime)
    stage = Path(tempfile.mkdtemp(prefix="kolmo_py_"))
    shutil.copy2(src, stage / "kolmo_py.so")
    sys.path.insert(0, str(stage))
    import kolmo_py

    return kolmo_py


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * (1.0 + abs(b))


def main():
    k = load_module()
    assert k.version(), "version() came back empty"

    # Basis: analyze inverts synthesize, and mode 1 has unit L2 norm.
    b = k.Basis(8)
    assert b.n == 8 and b.m == 64
    nodes = b.nodes()
    assert len(nodes) == 64 and 0.0 < nodes[0] < nodes[-1] < 1.0
    coeffs = [0.5, -0.25, 0.0, 0.125, 0.0, 0.0, 0.0, -0.0625]
    grid = b.synthesize(coeffs)
    assert len(grid) == 64
    back = b.analyze(grid, 8)
    assert all(close(x, y) for x, y in zip(back, coeffs)), f"roundtrip {back}"
    assert close(b.norm_p([1.0] + [0.0] * 7, 2.0), 1.0)

    try:
        k.Basis(0)
    except ValueError:
        pass
    else:
        raise AssertionError("Basis(0) should be rejected")

    # Model: zero state has zero drift, and the drift inequality holds with
    # a visible margin on standard probes.
    m = k.Model("burgers")
    assert m.name == "burgers" and m.n == 16
    f0 = m.drift([0.0] * 16)
    assert max(abs(v) for v in f0) == 0.0, f"drift at 0 was {f0}"
    for p in (2.0, 4.0):
        margin = m.drift_margin(p=p, count=500, seed=7)
        assert margin > 0.0, f"margin {margin} at p={p}"

    # simulate: checkpoints line up and the path stays finite.
    times, states = k.simulate(preset="ginzburg-landau", n=8, t=0.2, seed=11)
    assert len(times) == len(states)
    assert close(times[-1], 0.2, 1e-9)
    assert all(len(s) == 8 for s in states)
    assert all(math.isfinite(v) for s in states for v in s)
    assert max(abs(v) for v in states[0]) == 0.0
    assert max(abs(v) for v in states[-1]) > 0.0, "noise never kicked in"
    # same seed, same path
    times2, states2 = k.simulate(preset="ginzburg-landau", n=8, t=0.2, seed=11)
    assert times2 == times and states2 == states, "simulate is not deterministic"

    # describe: the table carries the constants, kappa = kappa0 / 2.
    table = {}
    for line in k.describe("burgers").splitlines():
        name, _, value = line.partition("=")
        table[name.strip()] = value.strip()
    assert table["model"] == "burgers"
    k0 = float(table["kappa0"])
    assert close(k0, math.pi**2 / 4, 1e-12), k0
    assert close(float(table["kappa"]), k0 / 2, 1e-12)

    # oracle_resolvent: 0 <= u <= max f / lambda for f = cos + 1 >= 0.
    lam = 5.0
    xs, u = k.oracle_resolvent(alpha1=1.0, lam=lam, preset="ginzburg-landau")
    assert len(xs) == len(u) and len(u) > 100
    assert min(u) >= 0.0, f"resolvent lost positivity: {min(u)}"
    assert max(u) <= 2.0 / lam + 1e-9, f"resolvent beats the markov bound: {max(u)}"

    print("smoke test passed:", k.version())


if __name__ == "__main__":
    main()
