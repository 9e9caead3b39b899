"""Experiment orchestration: rates, population traces, emission profiles and robustness sweeps.

Each ``run_*`` function takes a validated :class:`ExperimentConfig`, writes its
files under ``config.output_dir`` and returns the summary it wrote. Outputs
depend only on the config, so reruns reproduce them byte for byte.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, check_sweep_counts, config_to_dict
from .dynamics import (
    diagonalize,
    excited_population,
    fit_early_decay,
    per_atom_populations,
    propagate,
    survival_probability,
)
from .export import (
    write_csv,
    write_json,
    write_population_csv,
    write_profile_csv,
    write_snapshot_csv,
)
from .field import (
    angular_density,
    build_angular_grid,
    cone_fraction,
    mode_overlap,
    mode_projection,
    quadrature_orthogonality_error,
)
from .geometry import PerturbationSpec, SampleGeometry, perturb
from .kernel import build_kernel, collective_rate, symmetric_state_residual

log = logging.getLogger(__name__)


def _outdir(config: ExperimentConfig) -> Path:
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _time_label(t: float) -> str:
    return "inf" if math.isinf(t) else f"{t:.6g}us"


def rates_summary(sample: SampleGeometry) -> dict:
    kernel = build_kernel(sample)
    gcol = collective_rate(kernel)
    return {
        "n_atoms": sample.n_atoms,
        "wavelength_um": sample.wavelength,
        "gamma1_per_us": sample.gamma1,
        "gamma_col_per_us": gcol,
        "gamma_col_over_gamma1": gcol / sample.gamma1,
        "max_pair_distance_um": sample.max_pair_distance(),
        "symmetric_state_residual": symmetric_state_residual(kernel),
    }


def run_rates(config: ExperimentConfig) -> dict:
    summary = rates_summary(config.sample())
    write_json(_outdir(config) / "rates.json", summary)
    return summary


def run_evolve(config: ExperimentConfig, sample=None, eigen=None) -> dict:
    """Population trace with exponential reference, plus per-atom snapshots at every schedule time."""
    out = _outdir(config)
    sample = sample if sample is not None else config.sample()
    kernel = build_kernel(sample)
    eigen = eigen if eigen is not None else diagonalize(kernel)
    gamma1 = sample.gamma1
    gcol = collective_rate(kernel)

    times = config.times()
    pops = np.empty(times.size)
    snapdir = out / "snapshots"
    index = []
    for i, t in enumerate(times):
        state = propagate(eigen, float(t), gamma1)
        pops[i] = excited_population(state)
        name = f"snapshot_{i:04d}.csv"
        write_snapshot_csv(snapdir / name, sample.positions, per_atom_populations(state))
        index.append((i, float(t), name))
    write_csv(snapdir / "index.csv", ["snapshot_index", "time_us", "file"], index)
    reference = np.exp(-2 * gcol * times)
    write_population_csv(out / "population.csv", times, pops, reference)

    summary = {
        "gamma_col_per_us": gcol,
        "gamma_col_over_gamma1": gcol / gamma1,
        "clamped_eigenvalues": eigen.clamped_count,
        "population_final": float(pops[-1]),
    }
    try:
        fitted = fit_early_decay(times, pops)
        summary["fitted_early_rate_per_us"] = fitted
        summary["fitted_over_2gamma_col"] = fitted / (2 * gcol)
    except ValueError as exc:
        log.warning("early-decay fit skipped: %s", exc)
        summary["fitted_early_rate_per_us"] = None
    return summary


def emission_summary(config: ExperimentConfig, sample, eigen, out: Path) -> dict:
    half = config.cone_half_angle_rad
    axis = sample.k0_direction
    grid = build_angular_grid(axis=axis, **config.grid_kwargs())
    modefn = mode_projection(sample, eigen, grid)
    key = f"cone_fraction_{half:g}rad"
    summary = {"grid": list(config.grid), "grid_split_at_cone": config.grid_split_at_cone}
    profiles = {}
    for t in list(config.profile_times_us) + [math.inf]:
        profile = angular_density(modefn, float(t))
        write_profile_csv(out / f"angular_{_time_label(t)}.csv", profile)
        survival = float(survival_probability(eigen, t, sample.gamma1)) if math.isfinite(t) else None
        entry = {"time_us": "inf" if math.isinf(t) else float(t), "total_emitted": profile.total}
        if profile.total > 0:
            entry[key] = cone_fraction(profile, axis, half)
            entry[f"{key}_two_sided"] = cone_fraction(profile, axis, half, two_sided=True)
        if survival is not None:
            entry["closure_error"] = profile.total + survival - 1.0
        profiles[_time_label(t)] = entry
    summary["profiles"] = profiles
    summary[key] = profiles["inf"][key]
    summary[f"{key}_two_sided"] = profiles["inf"][f"{key}_two_sided"]
    summary["quadrature_orthogonality_error_top20"] = quadrature_orthogonality_error(modefn, 20)

    fine = build_angular_grid(axis=axis, **config.grid_kwargs(scale=2))
    fine_fraction = cone_fraction(
        angular_density(mode_projection(sample, eigen, fine), math.inf), axis, half
    )
    summary["grid_convergence"] = {
        "doubled_grid": [2 * config.grid[0], 2 * config.grid[1]],
        f"{key}_doubled": fine_fraction,
        f"{key}_delta": fine_fraction - summary[key],
    }
    return summary


def run_angular(config: ExperimentConfig, sample=None, eigen=None) -> dict:
    out = _outdir(config)
    sample = sample if sample is not None else config.sample()
    eigen = eigen if eigen is not None else diagonalize(build_kernel(sample))
    summary = emission_summary(config, sample, eigen, out)
    write_json(out / "angular.json", summary)
    return summary


def run_experiment(config: ExperimentConfig) -> dict:
    """Full pipeline: population trace, snapshots, angular profiles and ``summary.json``."""
    out = _outdir(config)
    sample = config.sample()
    eigen = diagonalize(build_kernel(sample))
    summary = {"config": config_to_dict(config)}
    summary.update(rates_summary(sample))
    evolve = run_evolve(config, sample, eigen)
    summary["fitted_early_rate_per_us"] = evolve["fitted_early_rate_per_us"]
    summary["fitted_over_2gamma_col"] = evolve.get("fitted_over_2gamma_col")
    summary["clamped_eigenvalues"] = eigen.clamped_count
    summary.update(emission_summary(config, sample, eigen, out))
    write_json(out / "summary.json", summary)
    return summary


def overlap_between(sample_a: SampleGeometry, sample_b: SampleGeometry, grid) -> float:
    ma = mode_projection(sample_a, diagonalize(build_kernel(sample_a)), grid)
    mb = mode_projection(sample_b, diagonalize(build_kernel(sample_b)), grid)
    return mode_overlap(ma, mb)


def robustness_sweep(config: ExperimentConfig) -> dict:
    """Overlap of the full-sample photon mode with the mode of randomly depleted samples.

    Writes ``sweep_trials.json`` (one record per removal count and seed) and
    ``sweep_summary.json`` (min/mean/max fidelity per removal count).
    """
    out = _outdir(config)
    full = config.sample(with_perturbation=False)
    check_sweep_counts(config, full.n_atoms)
    grid = build_angular_grid(axis=full.k0_direction, **config.grid_kwargs())
    ref = mode_projection(full, diagonalize(build_kernel(full)), grid)
    sigma = config.perturbation.jitter_sigma

    def trial(job):
        k, seed = job
        modified = perturb(full, PerturbationSpec(removal_count=k, jitter_sigma=sigma, seed=seed))
        mb = mode_projection(modified, diagonalize(build_kernel(modified)), grid)
        fid = mode_overlap(ref, mb)
        log.info("removed=%d seed=%d fidelity=%.6f", k, seed, fid)
        return {"seed": seed, "removed_count": k, "fidelity": fid}

    jobs = [(k, s) for k in config.sweep_removal_counts for s in config.seeds()]
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(trial, jobs))
    else:
        records = [trial(j) for j in jobs]

    aggregate = []
    for k in config.sweep_removal_counts:
        f = np.array([r["fidelity"] for r in records if r["removed_count"] == k])
        aggregate.append(
            {
                "removed_count": k,
                "trials": int(f.size),
                "min_fidelity": float(f.min()),
                "mean_fidelity": float(f.mean()),
                "max_fidelity": float(f.max()),
            }
        )
    write_json(out / "sweep_trials.json", records)
    summary = {
        "n_atoms": full.n_atoms,
        "grid": list(config.grid),
        "jitter_sigma_um": sigma,
        "seeds": config.seeds(),
        "per_count": aggregate,
    }
    write_json(out / "sweep_summary.json", summary)
    return {"records": records, "summary": summary}
