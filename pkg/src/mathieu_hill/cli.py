"""Command-line front end.

Commands compute spectra, gap tables, spectrality classifications, pairing
scans and discriminant samples, and write machine-readable CSV/JSON files.
Every output embeds the run manifest (command, parameters, tool version,
timestamp); floats are serialized with 17 significant digits so identical
manifests reproduce identical files.

Exit codes: 0 success, 1 computation failure (diagnostic JSON on stderr),
2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import tempfile
import time
from typing import Any

import numpy as np

from . import __version__, asymptotics, shooting, singularity, spectrum
from .model import MathieuHillError, PotentialCoeffs, SolverConfig

SCHEMA_VERSION = "mathieu-hill/1"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_field(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return _fmt(x)
    return str(x)


def _complex_pair(text: str) -> complex:
    try:
        re_s, im_s = text.split(",")
        return complex(float(re_s), float(im_s))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"expected 're,im' pair, got {text!r}") from exc


def _manifest(command: str, params: dict[str, Any]) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "mathieu-hill",
        "version": __version__,
        "command": command,
        "params": params,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    }


def _atomic_write(path: str, content: str):
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _JSONEncoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, complex):
            return {"re": o.real, "im": o.imag}
        if dataclasses.is_dataclass(o) and not isinstance(o, type):
            return dataclasses.asdict(o)
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        return super().default(o)


def _write_json(path: str, payload: dict):
    def _clean(x):
        if isinstance(x, float) and (math.isnan(x) or math.isinf(x)):
            return repr(x)
        return x
    _atomic_write(path, json.dumps(payload, cls=_JSONEncoder, indent=2,
                                   default=None) + "\n")


def _write_csv(path: str, manifest: dict, schema: str, header: list[str],
               rows: list[list]):
    lines = [f"# schema: {schema}",
             f"# manifest: {json.dumps(manifest, cls=_JSONEncoder)}",
             ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt_field(x) for x in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _outdir(args) -> str:
    out = args.out or os.environ.get("MATHIEU_HILL_OUT") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _config(args, n_needed: int = 0) -> SolverConfig:
    cfg = SolverConfig(truncation_half_width=args.m) if args.m else SolverConfig()
    return cfg.for_band(n_needed)


def _pot(args) -> PotentialCoeffs:
    return PotentialCoeffs(args.a, args.b)


def cmd_spectrum(args) -> int:
    pot = _pot(args)
    cfg = _config(args, args.nmax)
    out = _outdir(args)
    manifest = _manifest("spectrum", {
        "a": [args.a.real, args.a.imag], "b": [args.b.real, args.b.imag],
        "nmax": args.nmax, "grid": args.grid, "t_lo": args.t_lo,
        "t_hi": args.t_hi, "M": cfg.M})
    grid = np.linspace(args.t_lo, args.t_hi, args.grid)
    arcs = []
    for n in range(-args.nmax, args.nmax + 1):
        arcs.append(spectrum.trace_arc(n, pot, grid, cfg))
    files = []
    for arc in arcs:
        name = f"arc_n{arc.n:+03d}.csv"
        rows = [[t, lam.real, lam.imag, adf, res]
                for t, lam, adf, res in zip(arc.ts, arc.lams,
                                            arc.abs_disc_dlam, arc.char_residuals)]
        _write_csv(os.path.join(out, name), manifest, "arc-v1",
                   ["t", "re_lambda", "im_lambda", "abs_dF", "f_residual"], rows)
        files.append(name)
    report = spectrum.separation_report(arcs, pot, cfg)
    summary = {
        "manifest": manifest,
        "arcs": [{
            "n": arc.n,
            "file": f"arc_n{arc.n:+03d}.csv",
            "endpoint_0": arc.endpoint_0,
            "endpoint_pi": arc.endpoint_pi,
            "min_abs_dF": arc.min_disc_dlam,
            "max_step": arc.max_step,
            "max_f_residual": arc.max_char_residual,
            "asymptotic_guarantee": arc.asymptotic_guarantee,
        } for arc in arcs],
        "gap_table": [dataclasses.asdict(r) for r in report.rows],
        "noise_floor": report.noise_floor,
        "min_arc_distance": report.min_arc_distance,
        "min_arc_distance_pair": report.min_arc_distance_pair,
        "simplicity": {str(k): v for k, v in report.simplicity.items()},
    }
    _write_json(os.path.join(out, "spectrum_summary.json"), summary)
    print(f"wrote {len(files)} arc files and spectrum_summary.json to {out}")
    return 0


def cmd_gaps(args) -> int:
    pot = _pot(args)
    cfg = _config(args, args.nmax + 1)
    out = _outdir(args)
    manifest = _manifest("gaps", {
        "a": [args.a.real, args.a.imag], "b": [args.b.real, args.b.imag],
        "nmax": args.nmax, "hp": args.hp, "M": cfg.M})
    scale = (2 * math.pi * cfg.M + math.pi) ** 2
    noise = float(np.finfo(float).eps) * scale
    threshold = 1e3 * noise
    rows = []
    table = []
    for n in range(1, args.nmax + 1):
        pred0, predpi = asymptotics.predict_gaps(n, pot)
        entry = {"n": n, "predicted_0": pred0, "predicted_pi": predpi}
        for at_pi, pred, key in ((False, pred0, "0"), (True, predpi, "pi")):
            if pred < threshold and not args.hp:
                entry[f"measured_{key}"] = None
                entry[f"ratio_{key}"] = None
                entry[f"marker_{key}"] = "unresolvable"
                continue
            if args.hp and pred > 0:
                meas = spectrum.endpoint_gap_hp(n, pot, at_pi, cfg)
            else:
                meas = spectrum.measure_endpoint_gap(pot, n, at_pi, cfg)
            entry[f"measured_{key}"] = meas
            entry[f"ratio_{key}"] = (meas / pred) if pred > 0 else None
            entry[f"marker_{key}"] = "ok" if pred > 0 else "zero-prediction"
        table.append(entry)
        rows.append([n, entry.get("measured_0"), pred0, entry.get("ratio_0"),
                     entry["marker_0"], entry.get("measured_pi"), predpi,
                     entry.get("ratio_pi"), entry["marker_pi"]])
    _write_csv(os.path.join(out, "gaps.csv"), manifest, "gaps-v1",
               ["n", "measured_0", "predicted_0", "ratio_0", "marker_0",
                "measured_pi", "predicted_pi", "ratio_pi", "marker_pi"], rows)
    _write_json(os.path.join(out, "gaps_summary.json"),
                {"manifest": manifest, "noise_floor": noise,
                 "comparison_threshold": threshold, "rows": table})
    print(f"wrote gaps.csv and gaps_summary.json to {out}")
    return 0


def cmd_classify(args) -> int:
    pot = _pot(args)
    out = _outdir(args)
    manifest = _manifest("classify", {
        "a": [args.a.real, args.a.imag], "b": [args.b.real, args.b.imag],
        "q_cap": args.q_cap, "rational_tol": args.rational_tol})
    rep = singularity.classify_spectrality(pot, q_cap=args.q_cap,
                                           rational_tol=args.rational_tol)
    payload = {"manifest": manifest, "report": dataclasses.asdict(rep)}
    path = os.path.join(out, "classify_summary.json")
    _write_json(path, payload)
    print(json.dumps({"verdict": rep.verdict,
                      "parity_verdict": rep.parity_verdict,
                      "arg_ab_over_pi": rep.arg_ab_over_pi}, cls=_JSONEncoder))
    return 0


def _parse_n_range(text: str) -> list[int]:
    if ":" in text:
        lo_s, hi_s = text.split(":", 1)
        lo, hi = int(lo_s), int(hi_s)
        if hi < lo:
            raise argparse.ArgumentTypeError(f"empty band range {text!r}")
        return list(range(lo, hi + 1))
    return [int(text)]


def cmd_pairing(args) -> int:
    pot = _pot(args)
    ns = args.n
    cfg = _config(args, max(abs(n) for n in ns))
    out = _outdir(args)
    manifest = _manifest("pairing", {
        "a": [args.a.real, args.a.imag], "b": [args.b.real, args.b.imag],
        "n": ns, "t": args.t, "grid": args.grid, "M": cfg.M})
    if args.grid:
        t_values = list(np.linspace(0.0, math.pi, args.grid))
    else:
        t_values = [args.t]
    rows = []
    table = []
    for n in ns:
        for t in t_values:
            rec = singularity.pairing_dn(n, pot, t, cfg)
            rows.append([n, rec.t, rec.lam.real, rec.lam.imag,
                         abs(rec.pairing), rec.inv_abs, rec.method])
            table.append({"n": n, "t": rec.t, "lambda": rec.lam,
                          "abs_pairing": abs(rec.pairing),
                          "inv_abs_pairing": rec.inv_abs, "method": rec.method})
    _write_csv(os.path.join(out, "pairing.csv"), manifest, "pairing-v1",
               ["n", "t", "re_lambda", "im_lambda", "abs_d", "inv_abs_d",
                "method"], rows)
    _write_json(os.path.join(out, "pairing_summary.json"),
                {"manifest": manifest, "records": table})
    print(f"wrote pairing.csv and pairing_summary.json to {out}")
    return 0


def cmd_discriminant(args) -> int:
    pot = _pot(args)
    cfg = _config(args)
    out = _outdir(args)
    manifest = _manifest("discriminant", {
        "a": [args.a.real, args.a.imag], "b": [args.b.real, args.b.imag],
        "line": ([args.line[0].real, args.line[0].imag,
                  args.line[1].real, args.line[1].imag] if args.line else None),
        "rect": args.rect, "samples": args.samples,
        "critical": args.critical, "density": args.density})
    lams = []
    if args.line:
        z0, z1 = args.line
        for s in np.linspace(0.0, 1.0, args.samples):
            lams.append(z0 + s * (z1 - z0))
        rect = shooting.Rectangle(min(z0.real, z1.real), max(z0.real, z1.real),
                                  min(z0.imag, z1.imag), max(z0.imag, z1.imag))
    else:
        re_min, re_max, im_min, im_max = args.rect
        side = max(2, int(math.isqrt(args.samples)))
        for re in np.linspace(re_min, re_max, side):
            for im in np.linspace(im_min, im_max, side):
                lams.append(complex(re, im))
        rect = shooting.Rectangle(re_min, re_max, im_min, im_max)
    rows = []
    for lam in lams:
        s = shooting.integrate_fundamental(pot, lam, cfg)
        rows.append([lam.real, lam.imag, s.disc.real, s.disc.imag,
                     s.disc_dlam.real, s.disc_dlam.imag, s.est_error])
    _write_csv(os.path.join(out, "discriminant.csv"), manifest, "discriminant-v1",
               ["re_lambda", "im_lambda", "re_F", "im_F", "re_dF", "im_dF",
                "est_error"], rows)
    summary = {"manifest": manifest, "n_samples": len(rows)}
    if args.critical:
        scan = shooting.find_critical_points(pot, rect, args.density, cfg)
        summary["critical_points"] = [{
            "lambda": p.lam, "F": p.disc, "dF_residual": p.disc_dlam_residual,
        } for p in scan.points]
        summary["possibly_incomplete"] = scan.possibly_incomplete
        summary["note"] = scan.note
    _write_json(os.path.join(out, "discriminant_summary.json"), summary)
    print(f"wrote discriminant.csv and discriminant_summary.json to {out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mathieu-hill",
        description="Spectral computations for the two-mode non-self-adjoint "
                    "Hill operator family")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, nmax=False):
        p.add_argument("--a", type=_complex_pair, required=True,
                       help="coefficient a as 're,im'")
        p.add_argument("--b", type=_complex_pair, required=True,
                       help="coefficient b as 're,im'")
        p.add_argument("--m", type=int, default=None,
                       help="Fourier truncation half-width (default: auto)")
        p.add_argument("--out", default=None,
                       help="output directory (default: $MATHIEU_HILL_OUT or .)")
        if nmax:
            p.add_argument("--nmax", type=int, required=True,
                           help="largest band label")

    p = sub.add_parser("spectrum", help="trace spectral arcs over t")
    common(p, nmax=True)
    p.add_argument("--grid", type=int, default=257, help="t samples per arc")
    p.add_argument("--t-lo", type=float, default=0.0)
    p.add_argument("--t-hi", type=float, default=math.pi)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("gaps", help="endpoint gap table, measured vs predicted")
    common(p, nmax=True)
    p.add_argument("--hp", action="store_true",
                   help="measure with the high-precision determinant path")
    p.set_defaults(func=cmd_gaps)

    p = sub.add_parser("classify", help="asymptotic spectrality classification")
    common(p)
    p.add_argument("--q-cap", type=int, default=10 ** 6)
    p.add_argument("--rational-tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("pairing", help="biorthogonal pairing scan")
    common(p)
    p.add_argument("--n", type=_parse_n_range, required=True,
                   help="band label or inclusive range 'lo:hi'")
    p.add_argument("--t", type=float, default=0.0, help="single quasi-momentum")
    p.add_argument("--grid", type=int, default=None,
                   help="scan a t-grid of this size over [0, pi] instead")
    p.set_defaults(func=cmd_pairing)

    p = sub.add_parser("discriminant", help="sample the Hill discriminant")
    common(p)
    p.add_argument("--line", type=_complex_pair, nargs=2, default=None,
                   metavar=("Z0", "Z1"), help="sample along a segment")
    p.add_argument("--rect", type=float, nargs=4, default=None,
                   metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"))
    p.add_argument("--samples", type=int, default=201)
    p.add_argument("--critical", action="store_true",
                   help="also search critical points of the discriminant")
    p.add_argument("--density", type=int, default=8,
                   help="grid density for the critical-point search")
    p.set_defaults(func=cmd_discriminant)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "discriminant" and (args.line is None) == (args.rect is None):
        parser.error("discriminant needs exactly one of --line or --rect")
    try:
        return args.func(args)
    except (MathieuHillError, ValueError) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc),
                "command": args.command}
        print(json.dumps(diag), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
