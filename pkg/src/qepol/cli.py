"""Command-line interface.

Subcommands mirror the measurement workflow: `simulate` produces data
files from a config document, the analysis commands consume those files
and write JSON reports (and optional CSV curves), and `reproduce` runs
the canned end-to-end measurements.

Exit codes: 0 success, 1 runtime failure (bad file, failed fit), 2 usage
error.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__, analysis, formats, recipes, reports
from .config import load_config, run_experiment, save_config
from .errors import QepolError
from .geometry import CrystalAxes, nearest_crystal_axis


def _add_simulate(sub):
    p = sub.add_parser("simulate", help="run a configured acquisition")
    p.add_argument("--config", required=True, help="run configuration (JSON)")
    p.add_argument("--out", required=True, help="output data file")
    p.add_argument("--seed", type=int, default=None,
                   help="override the seed in the config")
    p.set_defaults(func=_cmd_simulate)


def _cmd_simulate(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    result = run_experiment(cfg)
    kind = cfg.experiment["kind"]
    if kind == "timetags":
        formats.write_timetags(result, args.out)
    elif kind in ("sweep", "shg"):
        formats.write_sweep_csv(result, args.out)
    elif kind == "decay_map":
        formats.write_decay_map_csv(result, args.out)
    elif kind == "pl_map":
        if len(result) == 1:
            formats.write_pl_map_csv(result[0], args.out)
        else:
            stem, ext = os.path.splitext(args.out)
            for i, frame in enumerate(result):
                formats.write_pl_map_csv(frame, f"{stem}.frame{i}{ext}")
    save_config(cfg, args.out + ".config.json")
    print(f"wrote {args.out} ({kind}, seed {cfg.experiment['seed']})")
    return 0


def _add_g2(sub):
    p = sub.add_parser("g2", help="correlate a time-tag file and estimate g2(0)")
    p.add_argument("ttag", help="time-tag file")
    p.add_argument("--bin-ps", type=int, default=100)
    p.add_argument("--n-periods", type=int, default=10,
                   help="side peaks on each side of zero delay")
    p.add_argument("--window-fraction", type=float, default=1.0)
    p.add_argument("--json", dest="json_out", help="write the report here")
    p.add_argument("--csv", dest="csv_out", help="write the histogram here")
    p.set_defaults(func=_cmd_g2)


def _cmd_g2(args):
    stream = formats.read_timetags(args.ttag)
    corr, est = analysis.measure_g2(stream, n_periods=args.n_periods,
                                    bin_ps=args.bin_ps,
                                    window_fraction=args.window_fraction)
    comb = recipes.fitting_comb(corr, stream.sync_period_ps)
    results = {
        "g2_zero": est.value, "g2_err": est.error,
        "n_center": est.n_center, "n_side_total": est.n_side_total,
        "n_side_peaks": est.n_side_peaks,
        "period_ns": stream.sync_period_ps / 1000.0,
        "comb_fit": comb,
    }
    params = {"bin_ps": args.bin_ps, "n_periods": args.n_periods,
              "window_fraction": args.window_fraction}
    if args.csv_out:
        _write_curve_csv(args.csv_out, ["delay_ns", "counts"],
                         np.column_stack([corr.delays_ns, corr.counts]))
    _finish(args, "g2", results, params, [args.ttag])
    print(f"g2(0) = {est.value:.4f} +/- {est.error:.4f} "
          f"(comb fit {comb['center_ratio']:.4f})")
    return 0


def _add_lifetime(sub):
    p = sub.add_parser("lifetime", help="fit the folded decay of a time-tag file")
    p.add_argument("ttag", help="time-tag file")
    p.add_argument("--bin-ps", type=int, default=50)
    p.add_argument("--channel", type=int, default=None)
    p.add_argument("--origin-ps", type=int, default=-2000,
                   help="shift of the fold origin (keeps the rising edge off the wrap)")
    p.add_argument("--json", dest="json_out")
    p.add_argument("--csv", dest="csv_out", help="write the histogram here")
    p.set_defaults(func=_cmd_lifetime)


def _cmd_lifetime(args):
    stream = formats.read_timetags(args.ttag)
    lf = analysis.fit_lifetime(stream, bin_ps=args.bin_ps, channel=args.channel,
                               origin_ps=args.origin_ps)
    results = {
        "tau_ns": lf.tau_ns, "tau_err_ns": lf.tau_err_ns, "t0_ns": lf.t0_ns,
        "irf_sigma_ns": lf.irf_sigma_ns, "background_per_bin": lf.background,
        "n_counts": int(np.sum(lf.counts)),
    }
    params = {"bin_ps": args.bin_ps, "channel": args.channel,
              "origin_ps": args.origin_ps}
    if args.csv_out:
        _write_curve_csv(args.csv_out, ["t_ns", "counts"],
                         np.column_stack([lf.centers_ns, lf.counts]))
    _finish(args, "lifetime", results, params, [args.ttag])
    print(f"tau = {lf.tau_ns:.3f} +/- {lf.tau_err_ns:.3f} ns")
    return 0


def _add_polarization(sub):
    p = sub.add_parser("polarization", help="fit visibility/axis of a sweep CSV")
    p.add_argument("csv", help="sweep file (angle_deg,intensity,error)")
    p.add_argument("--background", type=float, default=0.0,
                   help="known constant background per point")
    p.add_argument("--json", dest="json_out")
    p.set_defaults(func=_cmd_polarization)


def _cmd_polarization(args):
    sweep = formats.read_sweep_csv(args.csv)
    sa = analysis.analyze_polarization_sweep(sweep, background=args.background)
    results = {
        "visibility": sa.visibility, "visibility_err": sa.visibility_err,
        "axis_deg": float(sa.axis_deg), "axis_err_deg": sa.axis_err_deg,
        "amplitude": sa.amplitude, "amplitude_err": sa.amplitude_err,
        "axis_undefined": sa.axis_undefined,
        "reduced_chi2": sa.fit.reduced_chi2,
    }
    _finish(args, "polarization", results, {"background": args.background}, [args.csv])
    print(f"visibility = {sa.visibility:.4f} +/- {sa.visibility_err:.4f}, "
          f"axis = {float(sa.axis_deg):.2f} +/- {sa.axis_err_deg:.2f} deg")
    return 0


def _add_dynamics(sub):
    p = sub.add_parser("dynamics", help="time-resolved polarization from a decay map")
    p.add_argument("csv", help="decay-map file")
    p.add_argument("--min-counts", type=int, default=2000)
    p.add_argument("--t-cut-ps", type=float, default=120.0)
    p.add_argument("--json", dest="json_out")
    p.add_argument("--csv-out", dest="csv_out", help="write the per-bin curves here")
    p.set_defaults(func=_cmd_dynamics)


def _cmd_dynamics(args):
    dmap = formats.read_decay_map_csv(args.csv)
    dyn = analysis.extract_polarization_dynamics(
        dmap, min_counts_per_bin=args.min_counts, t_cut_ps=args.t_cut_ps
    )
    rf = analysis.fit_relaxation(dyn)
    results = {
        "n_bins": dyn.n_bins,
        "visibility_ss": rf.visibility_ss, "visibility_ss_err": rf.visibility_ss_err,
        "visibility_delta": rf.visibility_delta,
        "relax_ns": rf.relax_ns, "relax_err_ns": rf.relax_err_ns,
        "axis_ss_deg": float(rf.axis_ss_deg), "axis_ss_err_deg": rf.axis_ss_err_deg,
        "axis_delta_deg": rf.axis_delta_deg,
    }
    params = {"min_counts": args.min_counts, "t_cut_ps": args.t_cut_ps}
    if args.csv_out:
        formats.write_dynamics_csv(dyn, args.csv_out)
    _finish(args, "dynamics", results, params, [args.csv])
    print(f"V_ss = {rf.visibility_ss:.3f}, relax = {rf.relax_ns:.2f} ns, "
          f"axis drift = {rf.axis_delta_deg:.2f} deg")
    return 0


def _add_shg(sub):
    p = sub.add_parser("shg", help="fit the six-lobed crystal-orientation sweep")
    p.add_argument("csv", help="sweep file (angle_deg,intensity,error)")
    p.add_argument("--json", dest="json_out")
    p.set_defaults(func=_cmd_shg)


def _cmd_shg(args):
    sweep = formats.read_sweep_csv(args.csv)
    sa = analysis.analyze_shg_sweep(sweep)
    results = {
        "axis_deg_mod60": sa.axis_deg, "axis_err_deg": sa.axis_err_deg,
        "amplitude": sa.amplitude, "background": sa.background,
    }
    _finish(args, "shg", results, {}, [args.csv])
    print(f"crystal axis = {sa.axis_deg:.2f} deg (mod 60)")
    return 0


def _add_tdm(sub):
    p = sub.add_parser("tdm", help="transition dipole between two gridded states")
    p.add_argument("final", help="final-state wavefunction file")
    p.add_argument("initial", help="initial-state wavefunction file")
    p.add_argument("--crystal-axis", type=float, default=None,
                   help="reference crystal axis for the offset (degrees)")
    p.add_argument("--json", dest="json_out")
    p.set_defaults(func=_cmd_tdm)


def _cmd_tdm(args):
    from . import tdm as tdm_mod
    from . import wfgrid

    final = wfgrid.read_wavefunction(args.final)
    initial = wfgrid.read_wavefunction(args.initial)
    ta = tdm_mod.analyze_transition(final, initial)
    results = {
        "mu_re": [c.real for c in ta.mu], "mu_im": [c.imag for c in ta.mu],
        "strength": ta.strength, "axis_deg": float(ta.axis_deg),
        "in_plane_fraction": ta.in_plane_fraction, "visibility": ta.visibility,
        "energy_gap_ha": ta.energy_gap_ha,
    }
    if args.crystal_axis is not None:
        axes = CrystalAxes(args.crystal_axis)
        near, off = nearest_crystal_axis(float(ta.axis_deg), axes)
        results["nearest_crystal_axis_deg"] = float(near)
        results["crystal_offset_deg"] = off
    _finish(args, "tdm", results, {"crystal_axis": args.crystal_axis},
            [args.final, args.initial])
    print(f"axis = {float(ta.axis_deg):.2f} deg, visibility = {ta.visibility:.3f}, "
          f"in-plane fraction = {ta.in_plane_fraction:.3f}")
    return 0


def _add_stats(sub):
    p = sub.add_parser("stats", help="cohort angle statistics from a records CSV")
    p.add_argument("csv", help="dipole records file")
    p.add_argument("--crystal-axis", type=float, required=True)
    p.add_argument("--period", type=float, default=60.0)
    p.add_argument("--json", dest="json_out")
    p.set_defaults(func=_cmd_stats)


def _cmd_stats(args):
    records = formats.read_records_csv(args.csv)
    crystal = CrystalAxes(args.crystal_axis, args.period)
    st = analysis.angle_statistics(records, crystal)
    results = st.to_dict()
    _finish(args, "stats", results,
            {"crystal_axis": args.crystal_axis, "period": args.period}, [args.csv])
    print(f"n = {st.n}, misalignment = {st.misalignment_mean_deg:.2f} "
          f"+/- {st.misalignment_std_deg:.2f} deg, "
          f"clusters at {st.cluster_means_deg[0]:.2f} / {st.cluster_means_deg[1]:.2f} deg")
    return 0


def _add_reproduce(sub):
    p = sub.add_parser("reproduce", help="run a canned end-to-end measurement")
    p.add_argument("case", choices=sorted(recipes.REPRODUCE_CASES) + ["all"])
    p.add_argument("--outdir", required=True)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=_cmd_reproduce)


def _cmd_reproduce(args):
    out = recipes.reproduce(args.case, args.outdir, seed=args.seed)
    for path in out if isinstance(out, list) else [out]:
        print(f"wrote {path}")
    return 0


def _write_curve_csv(path, header, rows):
    from ._io import atomic_write_text

    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _finish(args, kind, results, params, inputs):
    if getattr(args, "json_out", None):
        report = reports.build_report(kind, results, parameters=params, inputs=inputs)
        reports.write_report(report, args.json_out)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qepol",
        description="simulate and analyze polarization dynamics of single-photon emitters",
    )
    parser.add_argument("--version", action="version", version=f"qepol {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for add in (_add_simulate, _add_g2, _add_lifetime, _add_polarization,
                _add_dynamics, _add_shg, _add_tdm, _add_stats, _add_reproduce):
        add(sub)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (QepolError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
