"""Campaign runners: one function per CLI subcommand.

Every campaign writes CSV/JSON artifacts (plus snapshot files for
simulations) into the configured output directory and finishes with a
manifest listing each artifact and its SHA-256.  Outputs are pure functions
of (config, seed): fixed chunk sizes, counter-based per-trial generators,
canonical JSON, and repr-exact float formatting keep them byte-stable.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import dynamics
from .config import ExperimentConfig
from .errors import ConfigError
from .lattice import FrequencyWindow, build_table, circle_lattice_points, circle_tail_sum
from .seeding import derive_rng
from .sequences import (
    CoefSequence,
    apply_nonlinearity_direct,
    apply_nonlinearity_spectral,
    estimate_ratios_many,
    failure_scan,
    norm_hs,
    weighted_quartic_form,
)
from .snapshots import write_snapshot
from .torus import bilinear_measure, strichartz_l4_measure

#: fixed witness for the broken intermediate-weight symmetry: the unit
#: square with one corner rotated a quarter turn in phase
HALF_WEIGHT_WITNESS = {(0, 0): 1.0, (1, 0): 1.0j, (1, 1): 1.0, (0, 1): 1.0}


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _unit_h1_sequence(window: FrequencyWindow, rng: np.random.Generator) -> CoefSequence:
    """Random unit-h1 sequence with a random radial decay exponent.

    Sweeping the decay from flat to steep makes the family range from fully
    diffuse to effectively few-mode data, so its extremes probe both ends of
    the size estimates rather than a single concentration scale.
    """
    from .lattice import _window_norms_sq

    vals = rng.standard_normal(window.n_modes) + 1j * rng.standard_normal(window.n_modes)
    slope = rng.uniform(0.0, 3.0)
    vals *= (1.0 + _window_norms_sq(window.K)) ** (-0.5 * slope)
    seq = CoefSequence(window, vals)
    seq.values /= norm_hs(seq, 1.0)
    return seq


def initial_state(cfg: ExperimentConfig) -> dynamics.FieldState:
    """The bundled low-mode Gaussian profile, scaled by init_amplitude."""
    grid = dynamics.BoxGrid(cfg.box_l, cfg.grid_n)
    window = FrequencyWindow(cfg.window_k)
    rel = {
        (0, 0): 1.0,
        (1, 0): 0.62,
        (0, 1): 0.58j,
        (1, 1): 0.33 * np.exp(0.2j * np.pi),
    }
    amplitudes = {m: cfg.init_amplitude * a for m, a in rel.items() if window.contains(m)}
    return dynamics.gaussian_state(
        grid, window, amplitudes, width=cfg.init_width,
        velocity=tuple(cfg.init_velocity),
    )


def _sim_config(cfg: ExperimentConfig, table) -> dynamics.SimConfig:
    return dynamics.SimConfig(
        dt=cfg.dt,
        t_end=cfg.t_end,
        table=table,
        diagnostics_stride=cfg.diagnostics_stride,
        boundary_mass_threshold=cfg.boundary_mass_threshold,
        nonlinear_substeps=cfg.nonlinear_substeps,
        snapshot_stride=cfg.snapshot_stride,
    )


def _records_csv(path: Path, records) -> None:
    header = [
        "t", "mass0", "mass1", "momx", "momy", "energy",
        "l4_l2_accum", "l4_h1_accum", "boundary_frac", "M0", "M2", "cauchy",
    ]
    rows = [
        (
            r.t, r.mass0, r.mass1, r.momx, r.momy, r.energy,
            r.l4_l2_accum, r.l4_h1_accum, r.boundary_frac,
            r.morawetz_m0, r.morawetz_m2, r.cauchy,
        )
        for r in records
    ]
    _write_csv(path, header, rows)


# ---------------------------------------------------------------------------
# circle sampling for the tail-sum campaign
# ---------------------------------------------------------------------------


def draw_circles(cfg: ExperimentConfig) -> list[tuple[tuple[int, int], int]]:
    """Half-integer-center circles for the tail-sum survey.

    Even draws are diameter circles through the origin region (center2 = q,
    radius^2 = |q|^2/4) with odd q, scaled by products of split primes so
    some members carry many lattice points spread across all distance
    scales; odd draws are generic circles through one random lattice point.
    All radii sit well above the surveyed cutoff range so the per-circle
    tail profile, not the sample geometry, drives the statistics.
    """
    rng = derive_rng(cfg.seed, "circles")
    out: list[tuple[tuple[int, int], int]] = []
    # split-prime products: diameters divisible by these carry many points,
    # and every point norm is a multiple of the factor, which staggers where
    # each family starts contributing along the cutoff axis
    dense_factors = (65, 325, 1105, 4225, 13, 65)
    r_floor = 2.0 * cfg.circle_a_hi
    for i in range(cfg.circles):
        if i % 2 == 0:
            f = dense_factors[(i // 2) % len(dense_factors)]
            r = r_floor * 10 ** rng.uniform(0.0, 1.0)
            ang = rng.uniform(0.0, 2.0 * np.pi)
            q0x = int(round(2.0 * r * math.cos(ang) / f)) | 1
            q0y = int(round(2.0 * r * math.sin(ang) / f)) | 1
            qx, qy = f * q0x, f * q0y
            out.append(((qx, qy), qx * qx + qy * qy))
        else:
            c2x = 2 * int(rng.integers(-10, 11)) + 1
            c2y = 2 * int(rng.integers(-10, 11)) + 1
            r = 4.0 * r_floor * 10 ** rng.uniform(0.0, 0.7)
            ang = rng.uniform(0.0, 2.0 * np.pi)
            px = int(round(r * math.cos(ang)))
            py = int(round(r * math.sin(ang)))
            r4 = (2 * px - c2x) ** 2 + (2 * py - c2y) ** 2
            out.append(((c2x, c2y), r4))
    return out


def circle_campaign(cfg: ExperimentConfig) -> dict:
    beta = cfg.circle_beta
    a_grid = np.logspace(
        math.log10(cfg.circle_a_lo), math.log10(cfg.circle_a_hi), cfg.circle_a_points
    )
    circles = draw_circles(cfg)
    rows = []
    per_a_max = np.zeros(a_grid.size)
    overall = 0.0
    for cid, (center2, r4) in enumerate(circles):
        pts = circle_lattice_points(center2, r4)
        norms = sorted(p.norm_sq() for p in pts)
        weights = [(1.0 + n2) ** (-beta) for n2 in norms]
        # suffix sums give every cutoff at once
        suffix = np.concatenate([np.cumsum(weights[::-1])[::-1], [0.0]])
        sq = [float(n2) for n2 in norms]
        for ai, A in enumerate(a_grid):
            k = np.searchsorted(sq, A * A, side="left")
            s = float(suffix[k])
            ratio = s / A ** (1.0 - 2.0 * beta)
            rows.append((cid, center2[0], center2[1], r4, float(A), s, ratio))
            per_a_max[ai] = max(per_a_max[ai], ratio)
            overall = max(overall, ratio)
    pos = per_a_max > 0
    slope = float(np.polyfit(np.log(a_grid[pos]), np.log(per_a_max[pos]), 1)[0])
    return {
        "rows": rows,
        "a_grid": [float(a) for a in a_grid],
        "per_a_max": [float(v) for v in per_a_max],
        "max_bound_ratio": float(overall),
        "log_slope_of_max": slope,
        "beta": beta,
        "n_circles": len(circles),
    }


# ---------------------------------------------------------------------------
# campaign bodies
# ---------------------------------------------------------------------------


def run_resonances(cfg: ExperimentConfig, out: Path) -> list[Path]:
    window = FrequencyWindow(cfg.window_k)
    table = build_table(window, memory_cap_bytes=cfg.memory_cap_bytes)
    rows = []
    for j in window.modes():
        i = window.index_of(j)
        nt = int(table.offsets[i + 1] - table.offsets[i])
        tt = table.trivial_count_for(j)
        rows.append((j.x, j.y, tt + nt, tt, nt))
    counts_csv = out / "resonance_counts.csv"
    _write_csv(counts_csv, ["jx", "jy", "total", "trivial", "nontrivial"], rows)
    summary = {
        "window_k": cfg.window_k,
        "modes": window.n_modes,
        "total": table.counts.total,
        "trivial": table.counts.trivial,
        "nontrivial": table.counts.nontrivial,
        "trivial_per_mode_formula": 2 * window.n_modes - 1,
    }
    artifacts = [counts_csv]
    if cfg.circles > 0:
        circ = circle_campaign(cfg)
        circ_csv = out / "circle_tail_ratios.csv"
        _write_csv(
            circ_csv,
            ["circle", "center2x", "center2y", "radius_sq4", "A", "sum", "bound_ratio"],
            circ.pop("rows"),
        )
        summary["circle_tail"] = circ
        artifacts.append(circ_csv)
    summary_json = out / "resonances_summary.json"
    _write_json(summary_json, summary)
    artifacts.append(summary_json)
    return artifacts


def run_nonlin(cfg: ExperimentConfig, out: Path) -> list[Path]:
    rows = []
    worst: dict[int, float] = {}
    for K in cfg.nonlin_k_list:
        window = FrequencyWindow(K)
        table = build_table(window, memory_cap_bytes=cfg.memory_cap_bytes)
        for trial in range(cfg.sequences):
            rng = derive_rng(cfg.seed, "nonlin", K, trial)
            vals = rng.standard_normal(window.n_modes) + 1j * rng.standard_normal(window.n_modes)
            a = CoefSequence(window, vals / np.linalg.norm(vals))
            fd = apply_nonlinearity_direct(a, table)
            fs = apply_nonlinearity_spectral(a, g2m_cap=cfg.g2m_cap)
            num = norm_hs(CoefSequence(window, fs.values - fd.values), 0.0)
            den = norm_hs(fd, 0.0)
            rel = num / den if den > 0 else 0.0
            rows.append((K, trial, rel))
            worst[K] = max(worst.get(K, 0.0), rel)
    csv = out / "nonlin_agreement.csv"
    _write_csv(csv, ["K", "trial", "rel_l2_error"], rows)
    js = out / "nonlin_summary.json"
    _write_json(js, {"max_rel_l2_error": {str(k): v for k, v in worst.items()},
                     "sequences": cfg.sequences})
    return [csv, js]


def run_identities(cfg: ExperimentConfig, out: Path) -> list[Path]:
    window = FrequencyWindow(cfg.window_k)
    table = build_table(window, memory_cap_bytes=cfg.memory_cap_bytes)
    worst = {0.0: 0.0, 1.0: 0.0}
    for trial in range(cfg.sequences):
        a = _unit_h1_sequence(window, derive_rng(cfg.seed, "identities", trial))
        for alpha in (0.0, 1.0):
            v = weighted_quartic_form(a, alpha, table)
            worst[alpha] = max(worst[alpha], abs(v.imag))  # h1 norm is 1
    wwin = FrequencyWindow(max(1, cfg.window_k))
    wtab = table if wwin == window else build_table(wwin)
    witness = CoefSequence.from_dict(wwin, HALF_WEIGHT_WITNESS)
    wval = weighted_quartic_form(witness, 0.5, wtab)
    wres = abs(wval.imag) / norm_hs(witness, 1.0) ** 4
    # projected identities on the default dynamics window
    fwin = FrequencyWindow(3)
    ftab = build_table(fwin)
    grid = dynamics.BoxGrid(cfg.box_l, 64)
    obs2 = 0.0
    obs3 = 0.0
    half_weight_obs = 0.0
    n_field = max(10, cfg.sequences // 10)
    for trial in range(n_field):
        rng = derive_rng(cfg.seed, "identities-field", trial)
        state = _random_band_state(grid, fwin, rng)
        xi0, l2 = _random_projection_params(grid, rng)
        res = dynamics.observation_residuals(state, xi0, l2, ftab)
        if not res.applicable:
            continue
        obs2 = max(obs2, res.obs2_max)
        obs3 = max(obs3, res.obs3_max)
        broken = dynamics.observation_residuals(state, xi0, l2, ftab, weight_power=0.5)
        if broken.applicable:
            half_weight_obs = max(half_weight_obs, broken.obs2_max)
    js = out / "identities_summary.json"
    _write_json(
        js,
        {
            "window_k": cfg.window_k,
            "sequences": cfg.sequences,
            "max_im_alpha0": worst[0.0],
            "max_im_alpha1": worst[1.0],
            "half_weight_witness_im": wval.imag,
            "half_weight_witness_residual": wres,
            "obs2_max": obs2,
            "obs3_max": obs3,
            "half_weight_obs2_max": half_weight_obs,
            "field_draws": n_field,
        },
    )
    return [js]


def _random_band_state(grid, window, rng) -> "dynamics.FieldState":
    """Random smooth state: Gaussian Fourier data under a radial envelope."""
    N = grid.N
    k = grid.freqs()
    env = np.exp(-(k[None, :] ** 2 + k[:, None] ** 2) / (2.0 * (np.pi * N / (4 * grid.L)) ** 2))
    hat = (
        rng.standard_normal((window.n_modes, N, N))
        + 1j * rng.standard_normal((window.n_modes, N, N))
    ) * env[None]
    fields = np.fft.ifft2(hat, axes=(1, 2))
    fields /= np.sqrt(np.sum(fields.real**2 + fields.imag**2) * grid.h**2)
    return dynamics.FieldState(grid, window, fields)


def _random_projection_params(grid, rng) -> tuple[tuple[float, float], int]:
    base = 2.0 * np.pi / grid.L
    xi0 = (base * int(rng.integers(-3, 4)), base * int(rng.integers(-3, 4)))
    l2 = int(rng.integers(2, 6))
    return xi0, l2


def run_estimates(cfg: ExperimentConfig, out: Path) -> list[Path]:
    rows = []
    summary: dict = {"per_window": {}}
    for K in cfg.k_list:
        window = FrequencyWindow(K)
        table = build_table(window, memory_cap_bytes=cfg.memory_cap_bytes)
        seqs = np.empty((window.n_modes, cfg.sequences), dtype=np.complex128)
        for trial in range(cfg.sequences):
            seqs[:, trial] = _unit_h1_sequence(
                window, derive_rng(cfg.seed, "estimates", K, trial)
            ).values
        for beta in cfg.beta_grid:
            reports = estimate_ratios_many(seqs, beta, table)
            stats = {
                "r_l2_max": max(r.r_l2 for r in reports),
                "r_h1_max": max(r.r_h1 for r in reports),
                "r_l2_mean": float(np.mean([r.r_l2 for r in reports])),
                "r_h1_mean": float(np.mean([r.r_h1 for r in reports])),
                "r_fail_max": max(r.r_fail for r in reports),
            }
            summary["per_window"].setdefault(str(K), {})[repr(beta)] = stats
            for trial, r in enumerate(reports):
                rows.append((K, beta, r.r_l2, r.r_h1, r.r_fail, trial))
        del table
    csv = out / "estimate_ratios.csv"
    _write_csv(csv, ["K", "beta", "r_l2", "r_h1", "r_fail", "seed"], rows)
    scan = failure_scan(cfg.k_list, g2m_cap=cfg.g2m_cap)
    summary["failure_scan"] = {
        "points": [[k, r] for k, r in scan.points],
        "power_fit": {
            "exponent": scan.power_fit.slope,
            "log_prefactor": scan.power_fit.intercept,
            "rms_residual": scan.power_fit.rms_residual,
        },
        "log_fit": {
            "slope": scan.log_fit.slope,
            "intercept": scan.log_fit.intercept,
            "rms_residual": scan.log_fit.rms_residual,
        },
    }
    js = out / "estimates_summary.json"
    _write_json(js, summary)
    return [csv, js]


def run_strichartz(cfg: ExperimentConfig, out: Path) -> list[Path]:
    rows = []
    res = strichartz_l4_measure(cfg.n_list, cfg.trials, cfg.seed, g2m_cap=cfg.g2m_cap)
    for p in res.points:
        for trial, r in enumerate(p.ratios):
            rows.append((p.N, 0, trial, float(r)))
    bil_stats = {}
    for n1 in cfg.bilinear_n1_list:
        b = bilinear_measure(n1, cfg.bilinear_n2, cfg.trials, cfg.seed, g2m_cap=cfg.g2m_cap)
        for trial, r in enumerate(b.ratios):
            rows.append((n1, cfg.bilinear_n2, trial, float(r)))
        bil_stats[str(n1)] = {"max": b.ratio_max, "mean": b.ratio_mean}
    csv = out / "strichartz_ratios.csv"
    _write_csv(csv, ["N1", "N2", "trial", "ratio"], rows)
    js = out / "strichartz_summary.json"
    _write_json(
        js,
        {
            "l4_exponent_fit_max": res.exponent_max.slope,
            "l4_exponent_fit_mean": res.exponent_mean.slope,
            "l4_points": {
                str(p.N): {"max": p.ratio_max, "mean": p.ratio_mean} for p in res.points
            },
            "bilinear": bil_stats,
            "bilinear_n2": cfg.bilinear_n2,
            "trials": cfg.trials,
        },
    )
    return [csv, js]


def _drift(series: list[float]) -> float:
    ref = abs(series[0])
    if ref == 0:
        return max(abs(v) for v in series)
    return max(abs(v - series[0]) for v in series) / ref


def run_simulate(cfg: ExperimentConfig, out: Path) -> list[Path]:
    window = FrequencyWindow(cfg.window_k)
    table = build_table(window, memory_cap_bytes=cfg.memory_cap_bytes)
    state = initial_state(cfg)
    traj = dynamics.evolve(state, _sim_config(cfg, table))
    csv = out / "diagnostics.csv"
    _records_csv(csv, traj.records)
    artifacts = [csv]
    chash = cfg.config_hash()
    for i, (t, f) in enumerate(zip(traj.snapshot_times, traj.snapshots)):
        snap = out / f"snapshot_{i:04d}.rsns"
        write_snapshot(
            dynamics.FieldState(traj.grid, traj.window, f, t), snap, config_hash=chash
        )
        artifacts.extend([snap, Path(str(snap) + ".json")])
    recs = traj.records
    summary = {
        "steps": int(round((cfg.t_end) / cfg.dt)),
        "boundary_warn_time": traj.boundary_warn_time,
        "mass0_drift": _drift([r.mass0 for r in recs]),
        "mass1_drift": _drift([r.mass1 for r in recs]),
        "energy_drift": _drift([r.energy for r in recs]),
        "momx_drift": max(abs(r.momx - recs[0].momx) for r in recs) / recs[0].mass0,
        "momy_drift": max(abs(r.momy - recs[0].momy) for r in recs) / recs[0].mass0,
        "final_l4_l2_accum": recs[-1].l4_l2_accum,
    }
    if len(traj.snapshots) >= 3:
        sd = dynamics.scattering_diagnostic(traj)
        summary["l4_tail_fraction"] = sd.l4_tail_fraction
        summary["cauchy"] = [[t, v] for t, v in sd.cauchy]
    js = out / "simulate_summary.json"
    _write_json(js, summary)
    artifacts.append(js)
    return artifacts


def run_morawetz(cfg: ExperimentConfig, out: Path) -> list[Path]:
    if cfg.snapshot_stride == 0:
        steps = int(round(cfg.t_end / cfg.dt))
        cfg = dataclasses.replace(cfg, snapshot_stride=max(1, steps // 12))
    window = FrequencyWindow(cfg.window_k)
    table = build_table(window, memory_cap_bytes=cfg.memory_cap_bytes)
    state = initial_state(cfg)
    traj = dynamics.evolve(state, _sim_config(cfg, table))
    csv = out / "diagnostics.csv"
    _records_csv(csv, traj.records)
    result = {}
    for a in (0, 2):
        lhs = dynamics.morawetz_lhs(traj, a)
        sup_m = max(abs(r.morawetz_m0 if a == 0 else r.morawetz_m2) for r in traj.records)
        result[f"a{a}"] = {
            "lhs": lhs,
            "sup_abs_m": sup_m,
            "ratio": lhs / sup_m if sup_m > 0 else float("inf"),
        }
    js = out / "morawetz_summary.json"
    _write_json(js, {"boundary_warn_time": traj.boundary_warn_time, **result})
    return [csv, js]


_RUNNERS = {
    "resonances": run_resonances,
    "nonlin": run_nonlin,
    "identities": run_identities,
    "estimates": run_estimates,
    "strichartz": run_strichartz,
    "simulate": run_simulate,
    "morawetz": run_morawetz,
}


def run(cfg: ExperimentConfig) -> Path:
    """Execute a campaign and write its manifest; returns the manifest path."""
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory {out}: {e}")
    artifacts = _RUNNERS[cfg.subcommand](cfg, out)
    manifest = {
        "tool": "rsns",
        "subcommand": cfg.subcommand,
        "config": cfg.resolved(),
        "config_hash": cfg.config_hash(),
        "artifacts": {
            str(p.relative_to(out)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(artifacts)
        },
    }
    mpath = out / "manifest.json"
    _write_json(mpath, manifest)
    return mpath
