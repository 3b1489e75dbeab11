"""End-to-end acceptance gate.

Each test exercises one headline capability of the package at its stated
tolerance and prints a single [PASS]/[FAIL] summary line (run pytest with
-s to see the lines inline).  The heavy simulations also carry wall-clock
budgets so the file doubles as a routine regression gate.
"""

import dataclasses
import math
import time

import numpy as np

from qepol.analysis import (
    PolarSweep,
    analyze_polarization_sweep,
    analyze_shg_sweep,
    angle_statistics,
    correlate_g2,
    extract_polarization_dynamics,
    fit_lifetime,
    fit_relaxation,
    measure_g2,
    power_law_exponent,
    synthetic_dipole_cohort,
)
from qepol.config import run_experiment
from qepol.formats import read_timetags, write_timetags
from qepol.geometry import CrystalAxes, axial_std, axis_distance
from qepol.photophysics import EmitterModel
from qepol.recipes import (
    ANTIBUNCHING_TARGETS,
    REFERENCE_EMITTER,
    antibunching_config,
    dynamics_config,
    lifetime_config,
)
from qepol.simulate import (
    PULSE_BLOCK,
    InstrumentConfig,
    TimeTagStream,
    dark_rate_for_g2,
    simulate_polarization_sweep,
    simulate_shg_sweep,
    simulate_timetags,
)
from qepol.tdm import (
    analyze_transition,
    field_perturbation,
    perturbation_response,
    strain_perturbation,
    transition_dipole,
)
from qepol.wfgrid import gaussian_state, hydrogen_state, rotate_state

_SUITE_T0 = time.perf_counter()
_SUITE_BUDGET_S = 600.0


def _report(label, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}", flush=True)
    assert ok, f"{label}: {detail}"


def _reference_model():
    return EmitterModel(**REFERENCE_EMITTER)


# ---------------------------------------------------------------------------
# 1. excited-state lifetime


def test_lifetime_recovered_from_ten_million_pulses():
    t0 = time.perf_counter()
    stream = run_experiment(lifetime_config(n_pulses=10_000_000, seed=11))
    fit = fit_lifetime(stream)
    dt = time.perf_counter() - t0
    ok = abs(fit.tau_ns - 3.96) <= 0.07 and dt < 60.0
    _report(
        "lifetime",
        ok,
        f"tau = {fit.tau_ns:.4f} ns (want 3.96 +/- 0.07 ns) "
        f"from {stream.timestamps_ps.size} tags in {dt:.1f} s (budget 60 s)",
    )


# ---------------------------------------------------------------------------
# 2. antibunching depth vs photon budget


def test_antibunching_depths_track_the_photon_budget():
    t0 = time.perf_counter()
    model = _reference_model()
    inst = InstrumentConfig(
        rep_rate_mhz=10.0, irf_fwhm_ps=70.0, dark_rate_cps=0.0,
        dead_time_ns=0.0, splitter_ratio=0.5, detection_efficiency=0.35,
    )
    parts = []

    stream = simulate_timetags(model, inst, model.exc_axis_deg,
                               n_pulses=2_000_000, seed=41)
    _, est = measure_g2(stream)
    parts.append((est.value <= 0.05 and est.value <= 3.0 * est.error,
                  f"ideal {est.value:.4f} +/- {est.error:.4f}"))

    # darks dilute the single-photon signal; the depth must follow 1 - rho^2
    for rho in (0.9, 0.95, 0.99):
        target = 1.0 - rho * rho
        dark = dark_rate_for_g2(target, model, inst)
        noisy = dataclasses.replace(inst, dark_rate_cps=dark)
        stream = simulate_timetags(model, noisy, model.exc_axis_deg,
                                   n_pulses=2_000_000, seed=int(1000 * rho))
        _, est = measure_g2(stream)
        parts.append((abs(est.value - target) <= 3.0 * est.error,
                      f"rho={rho} -> {est.value:.4f} (want {target:.4f})"))

    for variant, tol in (("x1", 0.003), ("x2", 0.002)):
        stream = run_experiment(antibunching_config(variant, seed=31))
        _, est = measure_g2(stream)
        target = ANTIBUNCHING_TARGETS[variant]
        parts.append((abs(est.value - target) <= tol,
                      f"{variant} {est.value:.4f} (want {target} +/- {tol})"))

    dt = time.perf_counter() - t0
    ok = all(p[0] for p in parts) and dt < 180.0
    _report("antibunching", ok,
            "; ".join(p[1] for p in parts) + f"; {dt:.1f} s (budget 180 s)")


# ---------------------------------------------------------------------------
# 3. polarization sweeps


def test_polarization_sweeps_recover_both_dipoles():
    model = _reference_model()
    quiet = InstrumentConfig(rep_rate_mhz=20.0, dark_rate_cps=0.0)
    angles = np.arange(0.0, 180.0, 10.0)
    parts = []

    for mode, vis_t, axis_t in (("emission", 0.9801, 62.42),
                                ("excitation", 0.9667, 43.52)):
        sweep = simulate_polarization_sweep(model, quiet, mode, angles, 0.05,
                                            poisson_noise=False)
        sa = analyze_polarization_sweep(sweep)
        parts.append((
            abs(sa.visibility - vis_t) <= 1e-4
            and axis_distance(float(sa.axis_deg), axis_t) <= 1e-3,
            f"noiseless {mode} V={sa.visibility:.5f} (want {vis_t}), "
            f"axis={float(sa.axis_deg):.4f} (want {axis_t})",
        ))

    noisy = InstrumentConfig(rep_rate_mhz=20.0, dark_rate_cps=100.0)
    for mode, step in (("emission", 10.0), ("excitation", 15.0)):
        grid = np.arange(0.0, 180.0, step)
        axes = []
        for rep in range(100):
            sweep = simulate_polarization_sweep(model, noisy, mode, grid, 0.05,
                                                seed=3000 + rep)
            axes.append(float(analyze_polarization_sweep(sweep).axis_deg))
        spread = axial_std(axes)
        parts.append((spread < 1.0,
                      f"{mode} @{step:.0f} deg steps: axis spread {spread:.3f} deg "
                      f"over 100 runs (want < 1)"))

    ok = all(p[0] for p in parts)
    _report("polarization sweeps", ok, "; ".join(p[1] for p in parts))


# ---------------------------------------------------------------------------
# 4. post-pulse polarization relaxation


def test_polarization_relaxation_recovered_from_a_delay_angle_map():
    t0 = time.perf_counter()
    dmap = run_experiment(dynamics_config(seed=5))
    dyn = extract_polarization_dynamics(dmap)
    rfit = fit_relaxation(dyn)
    parts = [
        (abs(rfit.visibility_ss - 0.9) <= 0.02,
         f"Vss = {rfit.visibility_ss:.4f} (want 0.90 +/- 0.02)"),
        (abs(rfit.relax_ns - 1.5) <= 0.3,
         f"tau_relax = {rfit.relax_ns:.3f} ns (want 1.5 +/- 0.3 ns)"),
        (abs(rfit.axis_delta_deg - 5.0) <= 1.0,
         f"axis drift = {rfit.axis_delta_deg:.2f} deg (want 5 +/- 1 deg)"),
    ]

    # collapsing the time axis must reproduce the plain integrated sweep
    merged = extract_polarization_dynamics(dmap, min_counts_per_bin=10 ** 9,
                                           t_cut_ps=0.0)
    y = dmap.counts.sum(axis=0)
    sa = analyze_polarization_sweep(
        PolarSweep(dmap.angles_deg, y, np.sqrt(np.maximum(y, 1.0))))
    parts.append((
        merged.n_bins == 1
        and merged.visibility[0] == sa.visibility
        and merged.axis_deg[0] == float(sa.axis_deg),
        "merged limit identical to the integrated sweep",
    ))

    dt = time.perf_counter() - t0
    ok = all(p[0] for p in parts) and dt < 120.0
    _report("polarization relaxation", ok,
            "; ".join(p[1] for p in parts) + f"; {dt:.1f} s (budget 120 s)")


# ---------------------------------------------------------------------------
# 5. frequency-doubled crystal orientation


def test_frequency_doubling_locates_the_crystal_axes():
    th = np.arange(0.0, 360.0, 5.0)
    sa = analyze_shg_sweep(simulate_shg_sweep(43.52, th, 20000.0, seed=21))
    fold_err = (float(sa.axis_deg) - 43.52 + 30.0) % 60.0 - 30.0

    powers = np.array([0.25, 0.5, 1.0, 2.0])
    amps = [
        analyze_shg_sweep(
            simulate_shg_sweep(43.52, th, 20000.0, pump_power=float(p),
                               seed=100 + i)).amplitude
        for i, p in enumerate(powers)
    ]
    slope, _ = power_law_exponent(powers, amps)

    ok = abs(fold_err) <= 0.5 and abs(slope - 2.0) <= 0.05
    _report(
        "frequency doubling",
        ok,
        f"axis = {float(sa.axis_deg):.3f} deg, {fold_err:+.3f} from 43.52 mod 60 "
        f"(want +/- 0.5); pump exponent {slope:.3f} (want 2.00 +/- 0.05)",
    )


# ---------------------------------------------------------------------------
# 6. emitter cohort statistics


def _best_contiguous_split_inertia(values):
    # optimal 1-d two-means is always a threshold split of the sorted values,
    # so scanning every cut point is an exhaustive search
    v = np.sort(np.asarray(values, dtype=float))
    best = math.inf
    for cut in range(1, v.size):
        a, b = v[:cut], v[cut:]
        best = min(best, float(np.sum((a - a.mean()) ** 2)
                               + np.sum((b - b.mean()) ** 2)))
    return best


def test_cohort_statistics_and_mirror_clusters():
    crystal = CrystalAxes(43.52, 60.0)
    records = synthetic_dipole_cohort(23, crystal, seed=7)
    stats = angle_statistics(records, crystal)

    fw = 2.0 * math.sqrt(2.0 * math.log(2.0))
    sig_mis = math.sqrt((8.0 / fw) ** 2 + (4.0 / fw) ** 2)
    lim = 3.0 * sig_mis / math.sqrt(23.0)
    parts = [(abs(stats.misalignment_mean_deg - 18.9) <= lim,
              f"misalignment {stats.misalignment_mean_deg:.2f} deg "
              f"(want 18.9 +/- {lim:.2f})")]

    sig_em = 4.0 / fw
    for k, want in ((0, -12.9), (1, +12.9)):
        n_k = int(np.sum(stats.clusters.labels == k))
        lim_k = 3.0 * sig_em / math.sqrt(max(n_k, 1))
        got = stats.cluster_means_deg[k]
        parts.append((abs(got - want) <= lim_k,
                      f"cluster {got:+.2f} deg (want {want:+.1f} +/- {lim_k:.2f}, n={n_k})"))

    best = _best_contiguous_split_inertia(stats.em_offsets_deg)
    parts.append((math.isclose(stats.clusters.inertia, best, rel_tol=1e-12),
                  "two-means split matches the exhaustive partition"))

    ok = all(p[0] for p in parts)
    _report("cohort statistics", ok, "; ".join(p[1] for p in parts))


# ---------------------------------------------------------------------------
# 7. transition dipoles from gridded wavefunctions


def test_transition_dipoles_from_gridded_wavefunctions():
    parts = []

    s = gaussian_state(64, 0.2, "s")
    px = gaussian_state(64, 0.2, "px", energy_ha=1.0)
    want = 1.0 / math.sqrt(2.0)
    rel = abs(abs(transition_dipole(px, s)[0]) - want) / want
    parts.append((rel <= 1e-3, f"gaussian |mu_x| rel err {rel:.1e} (want <= 1e-3)"))

    h1 = hydrogen_state(64, 0.55, "1s")
    h2 = hydrogen_state(64, 0.55, "2pz")
    want = 128.0 * math.sqrt(2.0) / 243.0
    rel = abs(abs(transition_dipole(h2, h1)[2]) - want) / want
    parts.append((rel <= 1e-2, f"hydrogen |mu_z| rel err {rel:.1e} (want <= 1e-2)"))

    gs = gaussian_state(48, 0.25, "s")
    gp = gaussian_state(48, 0.25, "px", energy_ha=1.0)
    base = analyze_transition(gp, gs)
    rot = analyze_transition(rotate_state(gp, 37.0), rotate_state(gs, 37.0))
    resid = axis_distance(float(rot.axis_deg), float(base.axis_deg) + 37.0)
    parts.append((resid <= 0.1,
                  f"37 deg rotation residual {resid:.3f} deg (want <= 0.1)"))

    ss = gaussian_state(40, 0.3, "s")
    sp = gaussian_state(40, 0.3, "px", energy_ha=1.0)
    f = perturbation_response(sp, ss, [field_perturbation(0.7)])
    drop = 1.0 - f["visibility"][0] / f["base_visibility"]
    shift = abs(f["axis_shift_deg"][0])
    parts.append((drop > 0.20 and shift > 5.0,
                  f"field 0.7: visibility drop {100 * drop:.1f}% (want > 20%), "
                  f"axis shift {shift:.1f} deg (want > 5)"))

    vac = perturbation_response(sp, ss, [strain_perturbation(0.01, "vacancy_like")])
    carb = perturbation_response(sp, ss, [strain_perturbation(0.01, "carbon_like")])
    sv, sc = abs(vac["axis_shift_deg"][0]), abs(carb["axis_shift_deg"][0])
    parts.append((sv > 4.0 and sc < 0.5,
                  f"strain 0.01: vacancy {sv:.2f} deg (want > 4), "
                  f"carbon {sc:.2f} deg (want < 0.5)"))

    ok = all(p[0] for p in parts)
    _report("transition dipoles", ok, "; ".join(p[1] for p in parts))


# ---------------------------------------------------------------------------
# 8. correlator exactness, storage round trips, determinism


def test_correlator_and_storage_are_exact_and_deterministic(tmp_path):
    parts = []
    rng = np.random.default_rng(9)

    n = 8000
    ch = rng.integers(0, 2, n).astype(np.uint16)
    ts = np.sort(rng.integers(0, 4_000_000, n)).astype(np.int64)
    order = np.lexsort((ch, ts))
    stream = TimeTagStream(ch[order], ts[order], 50_000, 4_000_000)
    corr = correlate_g2(stream, max_delay_ns=20.0, bin_ps=250)
    t0, t1 = ts[ch == 0], ts[ch == 1]
    deltas = np.subtract.outer(t1, t0.astype(np.int64)).ravel()
    nbins = corr.counts.size
    offset = (nbins // 2) * 250 + 125
    inside = (deltas >= -offset) & (deltas < nbins * 250 - offset)
    expected = np.bincount((deltas[inside] + offset) // 250, minlength=nbins)
    parts.append((np.array_equal(corr.counts, expected),
                  f"pair correlator exact over {n} tags"))

    path = tmp_path / "tags.ttag"
    write_timetags(stream, path)
    back = read_timetags(path)
    first = path.read_bytes()
    write_timetags(back, path)
    parts.append((
        np.array_equal(back.channels, stream.channels)
        and np.array_equal(back.timestamps_ps, stream.timestamps_ps)
        and back.sync_period_ps == stream.sync_period_ps
        and path.read_bytes() == first,
        "tag storage round trips bit-exactly",
    ))

    model = _reference_model()
    inst = InstrumentConfig(rep_rate_mhz=20.0, dark_rate_cps=300.0,
                            dead_time_ns=77.0)
    n_pulses = PULSE_BLOCK + 300_000  # force the block-parallel path
    runs = [
        simulate_timetags(model, inst, model.exc_axis_deg,
                          n_pulses=n_pulses, seed=77, n_jobs=j)
        for j in (1, 1, 4)
    ]
    same = all(
        np.array_equal(r.channels, runs[0].channels)
        and np.array_equal(r.timestamps_ps, runs[0].timestamps_ps)
        for r in runs[1:]
    )
    parts.append((same, f"seeded runs identical across worker counts "
                        f"({runs[0].timestamps_ps.size} tags)"))

    ok = all(p[0] for p in parts)
    _report("infrastructure", ok, "; ".join(p[1] for p in parts))


# ---------------------------------------------------------------------------
# overall budget


def test_acceptance_suite_runtime_budget():
    dt = time.perf_counter() - _SUITE_T0
    _report("runtime budget", dt < _SUITE_BUDGET_S,
            f"acceptance suite took {dt:.1f} s (budget {_SUITE_BUDGET_S:.0f} s)")
