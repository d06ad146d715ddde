"""Acceptance battery: one test per criterion at full scale, each printing a
pass/fail line (run with -s to see them), plus the byte-level reproducibility
check of the reduced-size battery.
"""

import subprocess
import sys

from locality_lab import suite

SEED = 7


def _run(fn, index):
    res = fn(SEED, quick=False)
    status = "PASS" if res.passed else "FAIL"
    print(f"[criterion {index:2d}] {status} - {res.name} ({res.elapsed_s:.1f}s): {res.summary}")
    assert res.passed, f"criterion {index} failed: {res.summary}"


def test_criterion_01_graph_locality():
    _run(suite.criterion_1_graph_locality, 1)


def test_criterion_02_stein_sanity():
    _run(suite.criterion_2_stein_sanity, 2)


def test_criterion_03_delta_graphical():
    _run(suite.criterion_3_delta_graphical, 3)


def test_criterion_04_delta_diag_dominant():
    _run(suite.criterion_4_delta_diag_dominant, 4)


def test_criterion_05_marginal_inequality():
    _run(suite.criterion_5_marginal_inequality, 5)


def test_criterion_06_multiblock_inequality():
    _run(suite.criterion_6_multiblock, 6)


def test_criterion_07_lemma_verifiers():
    _run(suite.criterion_7_lemma_verifiers, 7)


def test_criterion_08_llis_certificate():
    _run(suite.criterion_8_llis, 8)


def test_criterion_09_score_matching_recovery():
    _run(suite.criterion_9_score_matching, 9)


def test_criterion_10_dimension_ladder():
    _run(suite.criterion_10_dimension_ladder, 10)


def test_criterion_11_reproducibility(tmp_path):
    """suite --quick twice with one seed produces byte-identical result CSVs."""
    dirs = [tmp_path / "run1", tmp_path / "run2"]
    for d in dirs:
        proc = subprocess.run(
            [sys.executable, "-m", "locality_lab.cli", "suite", "--quick",
             "--seed", str(SEED), "--out", str(d)],
            capture_output=True,
            text=True,
            timeout=1200,
        )
        assert proc.returncode == 0, proc.stdout + proc.stderr
    csvs1 = sorted(p.name for p in dirs[0].glob("*.csv"))
    csvs2 = sorted(p.name for p in dirs[1].glob("*.csv"))
    assert csvs1 == csvs2 and len(csvs1) >= 11
    mismatches = [
        name
        for name in csvs1
        if (dirs[0] / name).read_bytes() != (dirs[1] / name).read_bytes()
    ]
    print(f"[criterion 11] {'PASS' if not mismatches else 'FAIL'} - "
          f"reproducibility: {len(csvs1)} CSVs byte-compared, mismatches: {mismatches}")
    assert not mismatches
