"""Smoke test for the gnlab Python bindings."""

import json
import math

import gnlab


def main():
    s = gnlab.Space.builtin("cycle:8")
    assert len(s) == 8 and s.diameter == 4
    c, _, _, per_radius = s.doubling_constant(2)
    assert abs(c - 5 / 3) < 1e-12, per_radius

    k2 = gnlab.Space.parse("v a 1\nv b 1\ne a b 1\n")
    sg = gnlab.Semigroup(k2)
    p = sg.heat_kernel(0.5)
    assert abs(p[0][0] - (1 + math.exp(-1)) / 2) < 1e-12
    assert abs(sg.spectral_gap() - 2) < 1e-12

    ends, levels = gnlab.rearrange([3.0, -1.0, 0.0, 3.0], [1.0, 2.0, 1.0, 0.5])
    assert ends == [1.5, 3.5] and levels == [3.0, 1.0]

    theta, alpha = gnlab.exponents(1.0, 2.0)
    assert (theta, alpha) == (0.5, -1.0)

    value, lower = gnlab.kprime(k2, [0.0, 1.0], 1.0, 0.5)
    assert lower <= value + 1e-12 and abs(value - 0.5) < 1e-6

    torus = gnlab.Semigroup(gnlab.Space.builtin("torus:6x6"))
    fs = gnlab.corpus(torus, seed=3, n=5)
    assert len(fs) == 5
    for _, f in fs:
        b, _ = gnlab.besov_norm(torus, f, -1.0)
        assert math.isfinite(b) and b > 0

    reports = [json.loads(r) for r in gnlab.run_check("torus:6x6", "gn", corpus_size=6)]
    assert reports and all(r["version"].startswith("gnlab ") for r in reports)
    assert all(r["constant"] is None or math.isfinite(r["constant"]) for r in reports)

    try:
        gnlab.run_check("torus:6x6", "nope")
    except ValueError as e:
        assert "unknown suite" in str(e)
    else:
        raise AssertionError("unknown suite accepted")
    print("smoke test passed:", len(reports), "gn reports")


if __name__ == "__main__":
    main()
