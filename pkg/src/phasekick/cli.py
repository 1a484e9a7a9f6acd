"""Command line front end.

Four subcommands: ``simulate`` produces synthetic measurement CSVs from
a config file, ``fit`` runs revival thermometry on fringe CSVs,
``tomo`` reconstructs the motional characteristic function, and
``heating`` predicts occupation growth from voltage noise.

Exit codes: 0 success, 2 invalid input or configuration, 3 numeric
failure (fit did not converge, truncation overflow), 4 file I/O error.

The default config path can be set with the PHASEKICK_CONFIG
environment variable.
"""

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .core import MotionalState, TrapConfig
from .errors import FitError, TruncationError, ValidationError
from .fringes import chi_state
from .heating import NoiseDrive, heating_rate, predict_nbar
from .io import (
    load_config,
    parse_reference_state,
    provenance_lines,
    read_fringe_csv,
    read_ring_csv,
    write_fringe_csv,
    write_grid_csv,
    write_ring_csv,
)
from .synth import synth_fringe, synth_ring_samples
from .thermometry import extract_contrast, fit_lineshape
from .tomography import (
    ChiSample,
    chi_from_samples,
    negativity_report,
    plan_rings,
    reconstruct_grid,
)

ENV_CONFIG = "PHASEKICK_CONFIG"


def _map(fn, items, threads):
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _require_config(args):
    path = args.config or os.environ.get(ENV_CONFIG)
    if not path:
        raise ValidationError(
            f"no config file: pass --config or set {ENV_CONFIG}"
        )
    return path


def _effective_config(args):
    cfg = load_config(_require_config(args))
    if getattr(args, "seed", None) is not None:
        cfg.seed = int(args.seed)
    if getattr(args, "shots", None) is not None:
        cfg.shots = int(args.shots)
    return cfg


def _out_dir(args, cfg=None):
    out = args.out or (cfg.out_dir if cfg is not None else None) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _provenance(cfg):
    return {"config-sha256": cfg.config_hash(), "seed": str(cfg.seed)}


def _detuning_grid(points, ramsey_time):
    # One full fringe period, endpoints included, so the phase fit is
    # well conditioned.
    return np.linspace(0.0, 2.0 * math.pi / ramsey_time, points)


def _write_text(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# -- simulate -------------------------------------------------------------


def cmd_simulate(args):
    cfg = _effective_config(args)
    out = _out_dir(args, cfg)
    extra = _provenance(cfg)

    if cfg.kind == "fringe":
        f = cfg.fringe
        detunings = _detuning_grid(f["detuning_points"], f["ramsey_time_s"])
        scan = synth_fringe(
            cfg.state,
            cfg.trap,
            f["n_kicks"],
            f["theta_rad"],
            detunings,
            f["ramsey_time_s"],
            cfg.shots,
            rng_seed=cfg.seed,
        )
        path = os.path.join(out, "fringe.csv")
        write_fringe_csv(path, [scan], extra)
        print(f"wrote {path}")
        return 0

    if cfg.kind == "thermometry-campaign":
        from .thermometry import plan_theta_grid

        c = cfg.campaign
        detunings = _detuning_grid(c["detuning_points"], c["ramsey_time_s"])
        spec_nbar = c["nbars"]
        for i, nbar in enumerate(spec_nbar):
            grid = plan_theta_grid(nbar, cfg.trap, c["n_kicks"], c["revival_index"])

            def one(job):
                j, theta = job
                return synth_fringe(
                    MotionalState.thermal(nbar),
                    cfg.trap,
                    c["n_kicks"],
                    float(theta),
                    detunings,
                    c["ramsey_time_s"],
                    cfg.shots,
                    rng_seed=[cfg.seed, i, j],
                )

            scans = _map(one, enumerate(grid), args.threads)
            file_extra = dict(extra)
            file_extra["truth-nbar"] = repr(float(nbar))
            path = os.path.join(out, f"lineshape_nbar_{nbar:g}.csv")
            write_fringe_csv(path, scans, file_extra)
            print(f"wrote {path} ({len(grid)} delay angles)")
        return 0

    if cfg.kind == "tomography":
        t = cfg.tomography
        if cfg.shots < 1:
            raise ValidationError("tomography simulation needs shots >= 1")
        if cfg.state is None:
            raise ValidationError("tomography simulation needs a [state] section")
        theta_grid = np.arange(t["theta_points"]) * (2.0 * math.pi / t["theta_points"])
        samples = synth_ring_samples(
            cfg.state,
            cfg.trap,
            t["rings"],
            theta_grid,
            shots=cfg.shots,
            seed=cfg.seed,
        )
        path = os.path.join(out, "rings.csv")
        write_ring_csv(path, samples, extra)
        print(f"wrote {path} ({len(samples)} samples)")
        return 0

    raise ValidationError(
        f"experiment kind {cfg.kind!r} is not handled by 'simulate' "
        "(use the 'heating' subcommand for heating-predict)"
    )


# -- fit ------------------------------------------------------------------


def _fmt_sig(x, digits=4):
    return f"{x:.{digits}g}"


def _fit_one(path, trap):
    meta, scans = read_fringe_csv(path)
    kick_counts = {s.n_kicks for s in scans}
    if len(kick_counts) != 1:
        raise ValidationError(
            f"{path}: mixed kick counts {sorted(kick_counts)} in one file"
        )
    n_kicks = kick_counts.pop()
    points = [extract_contrast(s) for s in scans]
    result = fit_lineshape(points, trap, n_kicks)
    truth = float(meta["truth-nbar"]) if "truth-nbar" in meta else None
    return meta, n_kicks, points, result, truth


def cmd_fit(args):
    trap = TrapConfig()
    if args.config or os.environ.get(ENV_CONFIG):
        trap = load_config(_require_config(args)).trap
    out = _out_dir(args)

    def run(path):
        try:
            return path, _fit_one(path, trap), None
        except (ValidationError, FitError, TruncationError) as exc:
            return path, None, exc

    results = _map(run, args.inputs, args.threads)

    report = [f"revival thermometry report ({len(results)} file(s))", ""]
    summary_rows = []
    failures = 0
    for path, ok, err in results:
        report.append(f"== {path}")
        if err is not None:
            failures += 1
            report.append(f"   FAILED: {err}")
            report.append("")
            summary_rows.append(f"{path},,,,,,,,,failed")
            continue
        meta, n_kicks, points, res, truth = ok
        report.append(f"   kicks per set:    {n_kicks}")
        report.append(f"   delay angles:     {len(points)}")
        report.append(f"   nbar:             {_fmt_sig(res.nbar)} +- {_fmt_sig(res.nbar_err)}")
        report.append(f"   amplitude:        {_fmt_sig(res.amplitude)} +- {_fmt_sig(res.amplitude_err)}")
        report.append(f"   revival fwhm:     {_fmt_sig(res.fwhm)} rad")
        report.append(f"   chi2 / dof:       {_fmt_sig(res.chi2)} / {res.dof}")
        if res.lower_bound_only:
            report.append("   note:             envelope unresolved, nbar is a lower bound")
        rel = ""
        if truth is not None:
            rel_val = abs(res.nbar - truth) / truth
            rel = repr(rel_val)
            report.append(f"   true nbar:        {_fmt_sig(truth)} (relative error {_fmt_sig(rel_val)})")
        report.append("")
        summary_rows.append(
            ",".join(
                [
                    path,
                    str(n_kicks),
                    "" if truth is None else repr(truth),
                    repr(res.nbar),
                    repr(res.nbar_err),
                    repr(res.amplitude),
                    repr(res.fwhm),
                    repr(res.chi2),
                    rel,
                    "lower-bound" if res.lower_bound_only else "ok",
                ]
            )
        )

    header = "file,n_kicks,truth_nbar,nbar,nbar_err,amplitude,fwhm_rad,chi2,rel_error,status"
    summary_path = os.path.join(out, "fit_summary.csv")
    _write_text(
        summary_path,
        provenance_lines("fit-summary") + [header] + summary_rows,
    )
    report_path = os.path.join(out, "fit_report.txt")
    _write_text(report_path, report)
    print(f"wrote {report_path}")
    print(f"wrote {summary_path}")
    if failures == len(results):
        errors = [err for _, _, err in results]
        if all(isinstance(err, ValidationError) for err in errors):
            raise ValidationError(f"all input files were invalid: {errors[0]}")
        raise FitError("all input files failed to fit")
    if failures:
        print(f"{failures} of {len(results)} file(s) failed; see report", file=sys.stderr)
    return 0


# -- tomo -----------------------------------------------------------------


def _exact_chi_samples(state, trap, rings, theta_points, threads):
    points = plan_rings(trap, rings, theta_points)

    def one(rp):
        chi = chi_state(state, rp.alpha)
        return ChiSample(
            alpha=rp.alpha,
            re=float(chi.real),
            re_err=1e-9,
            im=float(chi.imag),
            im_err=1e-9,
            n_kicks=rp.n_kicks,
            theta=rp.theta,
        )

    return _map(one, points, threads)


def cmd_tomo(args):
    cfg = _effective_config(args)
    if cfg.kind != "tomography":
        raise ValidationError(f"'tomo' needs a tomography config, got kind {cfg.kind!r}")
    t = cfg.tomography
    out = _out_dir(args, cfg)
    extra = _provenance(cfg)

    if args.inputs:
        samples = []
        for path in args.inputs:
            _, file_samples = read_ring_csv(path)
            samples.extend(file_samples)
        chis = chi_from_samples(samples, cfg.trap)
        source = f"{len(samples)} measured samples from {len(args.inputs)} file(s)"
    elif cfg.state is None:
        raise ValidationError(
            "tomography without input CSVs needs a [state] section to simulate"
        )
    elif cfg.shots == 0:
        chis = _exact_chi_samples(
            cfg.state, cfg.trap, t["rings"], t["theta_points"], args.threads
        )
        source = f"{len(chis)} noiseless model evaluations"
    else:
        theta_grid = np.arange(t["theta_points"]) * (2.0 * math.pi / t["theta_points"])
        samples = synth_ring_samples(
            cfg.state,
            cfg.trap,
            t["rings"],
            theta_grid,
            shots=cfg.shots,
            seed=cfg.seed,
        )
        chis = chi_from_samples(samples, cfg.trap)
        source = f"{len(samples)} synthesized samples"

    grid = reconstruct_grid(chis, resolution=t["resolution"])
    grid_path = os.path.join(out, "grid.csv")
    write_grid_csv(grid_path, grid, extra)

    neg = negativity_report(grid)
    report = [
        "characteristic function reconstruction",
        "",
        f"   input:             {source}",
        f"   grid cells:        {grid.re.size} ({neg.cells_evaluated} inside hull)",
        f"   resolution:        {t['resolution']:g}",
        f"   min Re chi:        {neg.min_value:.4f} +- {neg.min_err:.4f}",
        f"   at alpha:          {neg.min_alpha.real:.3f} {neg.min_alpha.imag:+.3f}i"
        f" (|alpha|^2 = {abs(neg.min_alpha) ** 2:.3f})",
        f"   significant (3x):  {'yes' if neg.significant else 'no'}",
        f"   negative fraction: {neg.negative_area_fraction:.4f}",
    ]

    if t.get("reference"):
        ref = parse_reference_state(t["reference"])
        inside = grid.mask & np.isfinite(grid.re)
        ys, xs = np.nonzero(inside)
        alphas = grid.x[xs] + 1j * grid.y[ys]
        theory = np.array([chi_state(ref, a) for a in alphas])
        res_re = grid.re[inside] - theory.real
        res_im = grid.im[inside] - theory.imag
        report += [
            "",
            f"   reference:         {t['reference']}",
            f"   max |Re residual|: {np.max(np.abs(res_re)):.5f}",
            f"   rms Re residual:   {np.sqrt(np.mean(res_re ** 2)):.5f}",
        ]
        finite_im = np.isfinite(res_im)
        if np.any(finite_im):
            report.append(
                f"   max |Im residual|: {np.max(np.abs(res_im[finite_im])):.5f}"
            )
        res_grid_re = np.full_like(grid.re, np.nan)
        res_grid_im = np.full_like(grid.im, np.nan)
        res_grid_re[inside] = res_re
        res_grid_im[inside] = np.where(finite_im, res_im, np.nan)
        residual_grid = type(grid)(
            x=grid.x,
            y=grid.y,
            re=res_grid_re,
            im=res_grid_im,
            re_err=grid.re_err,
            im_err=grid.im_err,
            mask=grid.mask,
            metadata={},
        )
        write_grid_csv(os.path.join(out, "residuals.csv"), residual_grid, extra)

    report_path = os.path.join(out, "tomo_report.txt")
    _write_text(report_path, report)
    print(f"wrote {grid_path}")
    print(f"wrote {report_path}")
    return 0


# -- heating --------------------------------------------------------------


def cmd_heating(args):
    cfg = _effective_config(args)
    if cfg.kind != "heating-predict":
        raise ValidationError(f"'heating' needs a heating-predict config, got kind {cfg.kind!r}")
    h = cfg.heating
    out = _out_dir(args, cfg)

    rate = heating_rate(
        cfg.trap,
        NoiseDrive(s_v=h["s_v"], d_eff=h["d_eff_m"], duration=0.0, nbar0=h["nbar0"]),
    )
    rows = []
    for duration in h["durations_s"]:
        drive = NoiseDrive(
            s_v=h["s_v"], d_eff=h["d_eff_m"], duration=duration, nbar0=h["nbar0"]
        )
        rows.append(f"{repr(float(duration))},{repr(float(predict_nbar(drive, cfg.trap)))}")

    extra = _provenance(cfg)
    extra["rate-quanta-per-s"] = repr(float(rate))
    path = os.path.join(out, "heating.csv")
    _write_text(path, provenance_lines("heating", extra) + ["duration_s,nbar"] + rows)
    print(f"heating rate: {rate:.4g} quanta/s")
    print(f"wrote {path}")
    return 0


# -- parser ---------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="phasekick",
        description="Spin-dependent-kick interferometry: simulation and analysis.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seeded=True):
        p.add_argument("--config", help=f"config file (default: ${ENV_CONFIG})")
        p.add_argument("--out", help="output directory (default: config or cwd)")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        if seeded:
            p.add_argument("--seed", type=int, help="override the config seed")
            p.add_argument("--shots", type=int, help="override shots per point")

    p_sim = sub.add_parser("simulate", help="synthesize measurement CSVs from a config")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="run revival thermometry on fringe CSVs")
    p_fit.add_argument("inputs", nargs="+", metavar="FRINGE_CSV")
    common(p_fit, seeded=False)
    p_fit.set_defaults(func=cmd_fit)

    p_tomo = sub.add_parser("tomo", help="reconstruct the motional characteristic function")
    p_tomo.add_argument("inputs", nargs="*", metavar="RING_CSV")
    common(p_tomo)
    p_tomo.set_defaults(func=cmd_tomo)

    p_heat = sub.add_parser("heating", help="predict occupation growth from voltage noise")
    common(p_heat, seeded=False)
    p_heat.set_defaults(func=cmd_heating)

    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FitError, TruncationError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
