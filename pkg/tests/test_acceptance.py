"""Acceptance criteria, one shipped configuration per criterion.

Each criterion prints a ``PASS``/``FAIL`` line, followed by its individual checks,
and asserts every check it owns.
"""

import filecmp
import os
import subprocess
import sys
from pathlib import Path

import pytest

from hypslab.runner import load_config, run_experiment

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

CRITERIA = {
    1: ("harmonic", "c01_harmonic.cfg"),
    2: ("sl", "c02_stationarity.cfg"),
    3: ("sl", "c03_energy.cfg"),
    4: ("sl", "c04_stability.cfg"),
    5: ("linop", "c05_selfadjoint.cfg"),
    6: ("linop", "c06_bottom.cfg"),
    7: ("spectral", "c07_spherical.cfg"),
    8: ("spectral", "c08_decay.cfg"),
    9: ("morawetz", "c09_morawetz.cfg"),
    10: ("morawetz", "c10_energy.cfg"),
    11: ("heat", "c11_gauge.cfg"),
    12: ("heat", "c12_smoothing.cfg"),
    13: ("harmonic", "c13_determinism.cfg"),
}

_RESULTS: dict = {}


def _result(n):
    if n not in _RESULTS:
        sub, cfg = CRITERIA[n]
        _RESULTS[n] = run_experiment(load_config(CONFIGS / cfg), sub)
    return _RESULTS[n]


def _report(n, checks, extra=()):
    ok = bool(checks) and all(c.passed for c in checks) and all(p for p, _ in extra)
    print(f"{'PASS' if ok else 'FAIL'} criterion {n}")
    for c in checks:
        print(f"    {'pass' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    for passed, detail in extra:
        print(f"    {'pass' if passed else 'FAIL'} {detail}")
    return ok


def _thread_invariance(tmp_path):
    sub, cfg = CRITERIA[13]
    outs = []
    for n in (1, 4):
        out = tmp_path / f"threads{n}"
        env = dict(os.environ, HYPSLAB_THREADS=str(n))
        proc = subprocess.run([sys.executable, "-m", "hypslab.cli", sub, "--config",
                               str(CONFIGS / cfg), "--out", str(out)],
                              env=env, capture_output=True, text=True)
        outs.append((out, proc.returncode, proc.stdout))
    (a, ra, sa), (b, rb, sb) = outs
    names = sorted(os.listdir(a)) if a.exists() else []
    same = bool(names) and names == sorted(os.listdir(b)) and sa == sb
    if same:
        _, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
        same = not mismatch and not errors
    return [(ra == rb == 0, f"CLI exit codes {ra}, {rb}"),
            (same, f"outputs byte-identical for HYPSLAB_THREADS=1 and 4 ({len(names)} files)")]


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, tmp_path, capsys):
    res = _result(n)
    checks = res.by_criterion(n)
    extra = _thread_invariance(tmp_path) if n == 13 else ()
    with capsys.disabled():
        print()
        ok = _report(n, checks, extra)
    assert ok, f"criterion {n} not met"
