"""Exit criteria for the 7x7x20 87Rb lattice. Each test prints one PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from conftest import random_sample
from superrad.config import config_from_dict
from superrad.dynamics import (
    diagonalize,
    excited_population,
    fit_early_decay,
    integrate_ode_oracle,
    propagate,
)
from superrad.experiment import robustness_sweep
from superrad.field import (
    angular_density,
    build_angular_grid,
    cone_fraction,
    mode_overlap,
    mode_projection,
    quadrature_orthogonality_error,
)
from superrad.geometry import SampleGeometry, build_lattice
from superrad.kernel import build_kernel, collective_rate

DIMS = (7, 7, 20)
SPACING = 0.37
QUOTED_RATIO, RATIO_TOL = 5.7, 0.3


@pytest.fixture
def report(capsys):
    def _report(tag, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {tag}: {detail}")
        return ok

    return _report


def test_c1_collective_rate(report):
    t0 = time.perf_counter()
    s = build_lattice(DIMS, SPACING, wavelength=0.795)
    ratio_d1 = collective_rate(build_kernel(s)) / s.gamma1
    elapsed = time.perf_counter() - t0
    detail = f"gamma_col/gamma1 = {ratio_d1:.4f} at 0.795 um ({elapsed:.2f} s)"
    ok = abs(ratio_d1 - QUOTED_RATIO) <= RATIO_TOL
    if not ok:
        # the criterion's stated fallback: rerun on the D2 line and report both
        s2 = build_lattice(DIMS, SPACING, wavelength=0.780)
        ratio_d2 = collective_rate(build_kernel(s2)) / s2.gamma1
        ok = abs(ratio_d2 - QUOTED_RATIO) <= RATIO_TOL
        detail += f"; outside 5.7 +/- 0.3, rerun at 0.780 um gives {ratio_d2:.4f}"
    ok = ok and elapsed < 1.0
    assert report("C1 collective rate", ok, detail)


def test_c2_early_exponential_decay(report):
    t0 = time.perf_counter()
    s = build_lattice(DIMS, SPACING)
    kernel = build_kernel(s)
    eigen = diagonalize(kernel)
    times = config_from_dict({}).times()
    pops = [excited_population(propagate(eigen, t, s.gamma1)) for t in times]
    fitted = fit_early_decay(times, pops)
    elapsed = time.perf_counter() - t0
    target = 2 * collective_rate(kernel)
    rel = abs(fitted / target - 1)
    ok = rel <= 0.02 and elapsed < 30
    assert report(
        "C2 early decay",
        ok,
        f"fit {fitted:.3f}/us vs 2 gamma_col {target:.3f}/us, rel. diff {rel:.4f} ({elapsed:.1f} s)",
    )


def test_c3_departure_from_exponential(report, paper_kernel, paper_eigen, paper_sample):
    p = excited_population(propagate(paper_eigen, 0.1, paper_sample.gamma1))
    ref = math.exp(-2 * collective_rate(paper_kernel) * 0.1)
    ok = 0.005 <= p <= 0.10 and ref < 1e-4
    assert report("C3 late survival", ok, f"P(0.1 us) = {p:.5f}, exp(-2 gamma_col t) = {ref:.3e}")


def test_c4_emission_cone(report):
    t0 = time.perf_counter()
    s = build_lattice(DIMS, SPACING)
    eigen = diagonalize(build_kernel(s))
    axis = s.k0_direction
    fractions = {}
    for n in (64, 128):
        grid = build_angular_grid(n, n, axis=axis, split_angle=0.3)
        profile = angular_density(mode_projection(s, eigen, grid), math.inf)
        fractions[n] = cone_fraction(profile, axis, 0.3)
        if n == 64:
            two_sided = cone_fraction(profile, axis, 0.3, two_sided=True)
    elapsed = time.perf_counter() - t0
    delta = abs(fractions[128] - fractions[64])
    ok = fractions[64] >= 0.95 and delta < 1e-3 and elapsed < 300
    assert report(
        "C4 emission cone",
        ok,
        f"fraction within 0.3 rad of +k0 = {fractions[64]:.5f} (needs >= 0.95), "
        f"doubled-grid change {delta:.1e}, forward+backward {two_sided:.5f} ({elapsed:.1f} s)",
    )


def test_c5_robustness(report, tmp_path):
    t0 = time.perf_counter()
    cfg = config_from_dict(
        {"sweep": {"removal_counts": [10, 30], "seeds": 20}, "output_dir": str(tmp_path)}
    )
    result = robustness_sweep(cfg)
    elapsed = time.perf_counter() - t0
    per = {r["removed_count"]: r for r in result["summary"]["per_count"]}
    worst = min(r["min_fidelity"] for r in per.values())
    ok = all(r["trials"] == 20 for r in per.values()) and worst >= 0.99 and elapsed < 1800
    detail = ", ".join(f"k={k}: min {r['min_fidelity']:.5f} mean {r['mean_fidelity']:.5f}" for k, r in per.items())
    assert report("C5 robustness", ok, f"{detail} ({elapsed:.0f} s)")


def test_c6_oracle_equivalence(report):
    sizes = [2, 5, 20, 50, 2, 5, 20, 50, 20, 50]
    worst = 0.0
    for i, n in enumerate(sizes):
        s = random_sample(n, seed=1000 + i, box=0.5 + 0.3 * i)
        k = build_kernel(s)
        e = diagonalize(k)
        dt = 0.004 / (s.gamma1 * np.linalg.eigvalsh(k.matrix).max())
        for g1t in (0.1, 1.0, 5.0):
            t = g1t / s.gamma1
            diff = np.max(np.abs(propagate(e, t, s.gamma1).beta - integrate_ode_oracle(k, t, dt).beta))
            worst = max(worst, diff)
    ok = worst <= 1e-8
    assert report("C6 oracle equivalence", ok, f"max |d beta| = {worst:.2e} over 10 geometries x 3 times")


def _invariant_failures(sample, grid_n=64):
    fails = []
    n = sample.n_atoms
    k = build_kernel(sample)
    f = k.matrix
    if np.max(np.abs(f - f.conj().T)) > 1e-12:
        fails.append("hermitian")
    if np.linalg.eigvalsh(f).min() < -1e-10 * n:
        fails.append("psd")
    if abs(np.trace(f).real - n) > 1e-9 * n:
        fails.append("trace")
    e = diagonalize(k)
    v = e.eigenvectors
    if np.max(np.abs(v.conj().T @ v - np.eye(n))) > 1e-10:
        fails.append("unitarity")
    if abs(np.sum(np.abs(e.mode_coefficients) ** 2) - 1) > 1e-12:
        fails.append("coefficients")
    times = np.concatenate([[0.0], np.geomspace(1e-4, 0.3, 60)])
    pops = np.array([excited_population(propagate(e, t, sample.gamma1)) for t in times])
    if np.any(np.diff(pops) > 1e-12):
        fails.append("monotone")
    grid = build_angular_grid(grid_n, grid_n, axis=sample.k0_direction, split_angle=0.3)
    m = mode_projection(sample, e, grid)
    if np.max(np.abs(np.sum(np.abs(m.projections) ** 2, axis=0) - n)) > 1e-8 * n:
        fails.append("projection-norm")
    if quadrature_orthogonality_error(m, min(20, n)) > 1e-3:
        fails.append("quadrature-orthogonality")
    for i, t in enumerate(times[1::12]):
        p = angular_density(m, t)
        if abs(p.total + excited_population(propagate(e, t, sample.gamma1)) - 1) > 1e-6:
            fails.append(f"closure@{t:.2e}")
    if abs(angular_density(m, math.inf).total - 1) > 1e-6:
        fails.append("closure@inf")
    if abs(mode_overlap(m, m) - 1) > 1e-10:
        fails.append("self-overlap")
    return fails


def test_c7_invariant_suite(report, paper_sample):
    samples = {"paper": paper_sample}
    for i, n in enumerate((3, 6, 10, 16, 25)):
        samples[f"random{n}"] = random_sample(n, seed=2000 + i, box=1.0 + 0.4 * i)
    failures = {name: _invariant_failures(s) for name, s in samples.items()}
    bad = {k: v for k, v in failures.items() if v}
    assert report("C7 invariant suite", not bad, f"{len(samples)} samples, failures: {bad or 'none'}")


def test_c8_small_n_anchors(report):
    g1 = 18.5
    single = build_lattice((1, 1, 1), SPACING)
    e1 = diagonalize(build_kernel(single))
    ts = np.geomspace(1e-4, 0.3, 50)
    trace_err = max(abs(excited_population(propagate(e1, t, g1)) - math.exp(-2 * g1 * t)) for t in ts)
    prof = angular_density(mode_projection(single, e1, build_angular_grid(32, 32)), math.inf)
    iso_err = float(np.max(np.abs(prof.density - 1 / (4 * math.pi))))

    k0 = 2 * math.pi / 0.795
    with pytest.warns(RuntimeWarning):
        pair = build_kernel(SampleGeometry(np.zeros((2, 3)), k0, (0, 0, 1), g1))
    dicke = collective_rate(pair)

    d = 0.37
    sep = diagonalize(build_kernel(SampleGeometry([[0, 0, 0], [0, 0, d]], k0, (0, 0, 1), g1)))
    sn = abs(math.sin(k0 * d) / (k0 * d))
    eig_err = float(np.max(np.abs(sep.eigenvalues - [1 + sn, 1 - sn])))

    ok = trace_err <= 1e-10 and iso_err <= 1e-10 and dicke == 2 * g1 and eig_err <= 1e-10
    assert report(
        "C8 small-N anchors",
        ok,
        f"single-atom trace err {trace_err:.1e}, isotropy err {iso_err:.1e}, "
        f"coincident pair {dicke / g1:.15g} gamma1, pair eigenvalue err {eig_err:.1e}",
    )
