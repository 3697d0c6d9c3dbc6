"""Smoke test for the Python bindings.

Uses an installed ``cuspwalk_py`` if there is one, otherwise the library from
``cargo build -p cuspwalk-py --release --features extension-module``.
"""

import cmath
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def load():
    try:
        import cuspwalk_py
        return cuspwalk_py
    except ImportError:
        pass
    lib = ROOT / "target" / "release" / "libcuspwalk_py.so"
    if not lib.exists():
        sys.exit(f"build the extension first: {lib} is missing")
    tmp = Path(tempfile.mkdtemp())
    shutil.copy(lib, tmp / "cuspwalk_py.so")
    sys.path.insert(0, str(tmp))
    import cuspwalk_py
    return cuspwalk_py


def main():
    cw = load()
    p = cw.CuspProfile()
    assert repr(p) == "CuspProfile(ell=1.0, t0=1.0)"
    assert abs(p.mu(0.5) - 0.396484375) < 1e-12
    assert abs(p.overlap_threshold(0.1) - math.log(1 / (2 * math.sinh(0.1)))) < 1e-12

    wide = cw.CuspProfile(ell=20.0)
    v = wide.ball_volume(0.1, 1.1)
    disc = 2 * math.pi * (math.cosh(0.1) - 1)
    assert abs(v / disc - 1) < 1e-8, v

    gap, mode = p.spectral_gap(0.2, k_max=4)
    assert 0 < gap <= 1 - 0.2 / math.sinh(0.2), gap
    print(f"gap(0.2) = {gap:.6f} from mode {mode}")

    draws = p.sample_ball(0.3, 0.3, 0.5, 2000, seed=1)
    assert len(draws) == 2000
    assert all(abs(t - 0.3) <= 0.3 and 0 <= y < 1 for t, y in draws)
    assert draws == p.sample_ball(0.3, 0.3, 0.5, 2000, seed=1)

    g = cw.tempered_gap("exp", 0.2)
    assert 0.1 < g / 0.04 < 0.3, g

    s = cw.symbol_sigma(0.3, 0.0, 0.0)
    assert cmath.isclose(s, 2 * math.sinh(0.3), rel_tol=1e-13)

    rows = cw.check("", ["tempered-gap", "escape"])
    for exp, name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'} {exp}: {name} ({detail})")
    assert all(ok for _, _, ok, _ in rows)

    for bad in (lambda: cw.CuspProfile(ell=-1.0), lambda: cw.tempered_gap("cauchy", 0.1),
                lambda: cw.check("[scan]\nk_max = 'x'\n")):
        try:
            bad()
        except ValueError:
            continue
        raise AssertionError("expected ValueError")
    print("python bindings ok")


if __name__ == "__main__":
    main()
