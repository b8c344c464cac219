"""Smoke test for the outcoupler_py extension.

Imports the module if it is installed (e.g. via `maturin develop` in
crates/py); otherwise builds it with cargo and loads it from a temp dir.
"""

import json
import math
import os
import shutil
import subprocess
import sys
import sysconfig
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def load():
    try:
        import outcoupler_py

        return outcoupler_py
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "--release", "-p", "outcoupler-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    target = Path(os.environ.get("CARGO_TARGET_DIR", ROOT / "target")) / "release"
    lib = next(p for p in (target / "liboutcoupler_py.so", target / "liboutcoupler_py.dylib") if p.exists())
    dest = Path(tempfile.mkdtemp()) / ("outcoupler_py" + sysconfig.get_config_var("EXT_SUFFIX"))
    shutil.copy(lib, dest)
    sys.path.insert(0, str(dest.parent))
    import outcoupler_py

    return outcoupler_py


def main():
    m = load()
    hbar = 1.054571817e-34

    zc = m.sag()
    assert abs(zc + 9.81 / (2 * math.pi * 120) ** 2) < 1e-12, zc
    crit = m.critical_rabi() / (2 * math.pi)
    assert 370 < crit < 385, crit
    assert abs(m.oscillation_frequency(2 * math.pi * 100, "rf_three_state") - 100 * 2**1.5) < 1e-9

    omega = 2 * math.pi * 500
    z = [i * 1e-7 - 40e-6 for i in range(801)]
    d = m.dressed_potentials(z, omega)
    for delta, vp, vm in zip(d["delta"], d["v_plus"], d["v_minus"]):
        on_res = math.sqrt(((vp - vm) / hbar) ** 2 - delta**2)
        assert abs(on_res / (2 * omega) - 1) < 1e-6

    x = [120 + 250 * i for i in range(20)]
    y = [0.5 * (1 - math.exp(-(v - 100) / 600)) for v in x]
    f = m.fit_shutdown(x, y)
    assert f["converged"] and abs(f["r"] / 600 - 1) < 1e-8, f

    names = [p[0] for p in m.presets()]
    assert "fig3_zeeman14ms" in names and "calibration" in names

    with tempfile.TemporaryDirectory() as out:
        report = m.run_preset("fig1_dressed", out)
        assert report["success"] and "dressed.csv" in report["outputs"], report
        bad = Path(out) / "bad.json"
        bad.write_text(json.dumps({"species": {}}))
        try:
            m.run_preset("custom", str(Path(out) / "x"), config=str(bad))
        except (ValueError, RuntimeError) as e:
            assert "json" in str(e) or "invalid" in str(e), e
        else:
            raise AssertionError("bad config accepted")

    print(f"outcoupler_py {m.__version__}: smoke test passed (sag {zc * 1e6:.2f} um, threshold {crit:.1f} Hz)")


if __name__ == "__main__":
    main()
