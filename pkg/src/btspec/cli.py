"""Command-line entry point ``btspec``.

Each subcommand runs one experiment, writes CSV/JSON artifacts plus a
``manifest.json`` into ``--out`` and prints a short summary.

Exit status: 0 pass, 2 a verified bound or prediction failed, 1 runtime
error, 64 malformed arguments or config, 73 output not writable.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
import time
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__

EXIT_OK, EXIT_FAIL, EXIT_ERROR, EXIT_USAGE, EXIT_CANTCREAT = 0, 2, 1, 64, 73


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# value parsers


def parse_axis(text: str) -> list[float]:
    """``start:stop:count`` into ``count`` evenly spaced values; lists pass through."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    parts = str(text).split(":")
    if len(parts) != 3:
        raise UsageError(f"axis must be start:stop:count, got {text!r}")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"axis must be start:stop:count, got {text!r}") from None
    if n < 1 or (n > 1 and not a < b):
        raise UsageError(f"axis needs count >= 1 and start < stop, got {text!r}")
    return list(np.linspace(a, b, n)) if n > 1 else [a]


def parse_floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def parse_ints(text) -> list[int]:
    vals = parse_floats(text)
    if any(v != int(v) for v in vals):
        raise UsageError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def parse_interval(text) -> tuple[float, float]:
    vals = parse_floats(text)
    if len(vals) != 2 or not vals[0] < vals[1]:
        raise UsageError(f"interval must be a,b with a < b, got {text!r}")
    return vals[0], vals[1]


def parse_complex(text) -> complex:
    if isinstance(text, (list, tuple)):
        return complex(float(text[0]), float(text[1]))
    try:
        return complex(str(text).replace(" ", "").replace("i", "j"))
    except ValueError:
        raise UsageError(f"expected a complex number like 0.2+1j, got {text!r}") from None


# --------------------------------------------------------------------------
# experiment parameters: name -> (parser, default, help)

COMMON = {
    "out": (str, "btspec-out", "output directory"),
    "seed": (int, 0, "seed for sampled experiments"),
    "threads": (int, None, "worker threads (default: BTSPEC_THREADS or CPU count)"),
}

EXPERIMENTS: dict[str, dict[str, tuple[Callable, Any, str]]] = {
    "spectrum": {
        "spec": (str, None, "operator spec JSON file"),
        "window": (parse_floats, None, "re_min,re_max,im_min,im_max"),
    },
    "pseudospectrum": {
        "spec": (str, None, "operator spec JSON file"),
        "re": (parse_axis, "-0.2:0.6:41", "real axis start:stop:count"),
        "im": (parse_axis, "0.5:1.5:41", "imaginary axis start:stop:count"),
        "tol": (float, 1e-6, "relative tolerance on the smallest singular value"),
    },
    "asymptotics": {
        "eps": (parse_floats, "0.08,0.04,0.02", "comma-separated eps values"),
        "modes": (int, 2, "number of modes N"),
        "mu1": (parse_complex, None, "override mu_11 for mode 1"),
    },
    "resolvent-bound": {
        "eps": (parse_floats, "0.05,0.025", "eps values; C is frozen at the first"),
        "rho": (float, 1.0, "real-part cap factor rho"),
        "rhat": (float, 10.0, "exclusion radius factor"),
        "samples": (int, 200, "samples per eps"),
    },
    "strip-estimate": {
        "eps": (parse_floats, "0.1,0.05", "eps values; C is frozen at the first"),
        "delta": (float, 0.3, "strip parameter delta"),
        "samples": (int, 100, "samples per eps"),
    },
    "reduction-check": {
        "eps": (parse_floats, "0.08,0.05", "eps values"),
        "modes": (int, 1, "number of modes"),
        "tol": (float, 1e-5, "agreement tolerance"),
    },
    "rho0": {
        "interval": (parse_interval, "0,1", "interval a,b"),
        "n": (parse_ints, "511,1023,2047", "grid sizes"),
    },
    "scaling-law": {
        "interval": (parse_interval, "0,1", "interval a,b"),
        "eps": (parse_floats, "0.1,0.05,0.025", "eps values"),
        "n": (int, 800, "interior nodes"),
        "samples": (int, 32, "Lambda samples per eps"),
    },
    "nu-curve": {
        "interval": (parse_interval, "0,1", "interval a,b"),
        "eps": (float, 0.05, "eps"),
        "lambda": (parse_axis, None, "Lambda samples start:stop:count"),
        "n": (int, 800, "interior nodes"),
    },
    "airy-estimate": {
        "interval": (parse_interval, "0,1", "interval a,b"),
        "eps": (parse_floats, "0.1,0.05", "eps values; C is frozen at the first"),
        "K": (float, None, "Lambda ceiling factor (default twice the minimizer's quotient)"),
    },
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="btspec", description="Spectral experiments for 1D Bloch-Torrey operators.")
    p.add_argument("--version", action="version", version=f"btspec {__version__}")
    sub = p.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name, params in EXPERIMENTS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="JSON config or manifest from an earlier run")
        for key, (_, default, helptext) in {**COMMON, **params}.items():
            # None marks "not given" so config values can fill in
            sp.add_argument(f"--{key}", dest=key.replace("-", "_"), default=None,
                            help=f"{helptext} (default: {default})")
    return p


def resolve_config(ns: argparse.Namespace) -> dict[str, Any]:
    """Merge explicit flags, config file and defaults, in that priority."""
    exp = ns.experiment
    params = {**COMMON, **EXPERIMENTS[exp]}
    cfg: dict[str, Any] = {}
    if ns.config:
        try:
            data = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}") from None
        if "config" in data and isinstance(data["config"], dict):
            data = data["config"]
        if data.get("experiment", exp) != exp:
            raise UsageError(f"config is for {data['experiment']!r}, not {exp!r}")
        unknown = set(data) - set(params) - {"experiment"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg = data
    resolved: dict[str, Any] = {"experiment": exp}
    for key, (parse, default, _) in params.items():
        raw = getattr(ns, key.replace("-", "_"))
        if raw is None:
            raw = cfg.get(key, default)
        if raw is None:
            resolved[key] = None
            continue
        try:
            resolved[key] = parse(raw)
        except UsageError:
            raise
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for --{key}: {raw!r} ({exc})") from None
    if resolved["threads"] is None:
        from .spectra import default_workers
        resolved["threads"] = default_workers()
    if resolved["threads"] < 1:
        raise UsageError("--threads must be positive")
    return resolved


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


# --------------------------------------------------------------------------
# experiment runners: each returns (passed, summary lines, {filename: text})


def _load_spec(path):
    from .operators import OperatorSpec, SpecError
    if path is None:
        raise UsageError("--spec is required")
    try:
        return OperatorSpec.from_json(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read spec {path}: {exc}") from None
    except (SpecError, KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"invalid spec {path}: {exc}") from None


def run_spectrum(c):
    from .spectra import survey_spectrum
    spec = _load_spec(c["spec"])
    w = c["window"]
    if w is not None and len(w) != 4:
        raise UsageError("--window needs re_min,re_max,im_min,im_max")
    res = survey_spectrum(spec, tuple(w) if w else None).sorted("real")
    rows = ["re,im,residual,flagged"]
    for lam, r, f in zip(res.eigenvalues, res.residuals, res.flagged):
        rows.append(f"{lam.real:.17g},{lam.imag:.17g},{r:.17g},{int(f)}")
    lines = [f"{len(res)} eigenvalues in window, {int(res.flagged.sum())} flagged"]
    return True, lines, {"eigenvalues.csv": "\n".join(rows) + "\n"}


def run_pseudospectrum(c):
    from .spectra import pseudospectrum_grid
    spec = _load_spec(c["spec"])
    g = pseudospectrum_grid(spec, c["re"], c["im"], tol=c["tol"], workers=c["threads"])
    peak = g.argmax()
    lines = [f"{g.norms.size} points, max norm {np.max(g.norms):.6g} at {peak:.6g}"]
    return True, lines, {"pseudospectrum.csv": g.to_csv(), "pseudospectrum.json": g.to_json()}


def run_asymptotics(c):
    from .asymptotics import verify_eigenvalue_asymptotics
    rep = verify_eigenvalue_asymptotics(c["eps"], c["modes"], mu1=c["mu1"], workers=c["threads"])
    lines = [f"mode {k}: slope {rep.slopes[k]:.3f}, refined slope {rep.refined_slopes[k]:.3f} "
             f"(re-derived coefficient: {rep.refined_slopes_rederived[k]:.3f})" for k in rep.slopes]
    return rep.passes(), lines, {"asymptotics.csv": rep.to_csv(), "asymptotics.json": rep.to_json()}


def run_resolvent_bound(c):
    from .asymptotics import frozen_constant_check, verify_resolvent_bound
    reps = [verify_resolvent_bound(e, c["rho"], c["rhat"], c["samples"], seed=c["seed"],
                                   workers=c["threads"]) for e in c["eps"]]
    C, ok = frozen_constant_check([r.max_ratio for r in reps])
    acc = all(r.accretive_ok for r in reps)
    lines = [f"eps={r.eps}: max ratio {r.max_ratio:.4g}" for r in reps]
    lines.append(f"C frozen at {C:.4g}; growth check {'ok' if ok else 'violated'}; "
                 f"accretive check {'ok' if acc else 'violated'}")
    files = {f"resolvent_bound_eps{r.eps:g}.csv": r.to_csv() for r in reps}
    files.update({f"resolvent_bound_eps{r.eps:g}.json": r.to_json() for r in reps})
    return ok and acc, lines, files


def run_strip_estimate(c):
    from .asymptotics import frozen_constant_check, verify_strip_estimate
    reps = [verify_strip_estimate(e, c["delta"], c["samples"], seed=c["seed"], workers=c["threads"])
            for e in c["eps"]]
    C1, ok1 = frozen_constant_check([r.max_ratio_sum for r in reps])
    C2, ok2 = frozen_constant_check([r.max_ratio_resolvent for r in reps])
    acc = all(r.accretive_ok for r in reps)
    lines = [f"eps={r.eps}: max u1+u2 ratio {r.max_ratio_sum:.4g} (random f {r.max_ratio_sum_random:.4g}), "
             f"max resolvent ratio {r.max_ratio_resolvent:.4g}" for r in reps]
    lines.append(f"frozen C: {C1:.4g} / {C2:.4g}; growth {'ok' if ok1 and ok2 else 'violated'}")
    files = {f"strip_eps{r.eps:g}.csv": r.to_csv() for r in reps}
    files.update({f"strip_eps{r.eps:g}.json": r.to_json() for r in reps})
    return ok1 and ok2 and acc, lines, files


def run_reduction_check(c):
    from .asymptotics import kappa0, line_spec
    from .reduction import find_lambda_root
    from .spectra import locate_eigenvalue
    rows, ok, lines = ["eps,mode,reduction_re,reduction_im,direct_re,direct_im,gap"], True, []
    for e in c["eps"]:
        for k in range(1, c["modes"] + 1):
            ec = e ** (4 / 3)
            lam = find_lambda_root(e ** (-2 / 3) * kappa0(k, e), ec)
            red = e ** (2 / 3) * lam
            direct = locate_eigenvalue(line_spec(e), kappa0(k, e)).value
            gap = abs(red - direct)
            ok = ok and gap < c["tol"]
            rows.append(f"{e:.17g},{k},{red.real:.17g},{red.imag:.17g},"
                        f"{direct.real:.17g},{direct.imag:.17g},{gap:.17g}")
            lines.append(f"eps={e} mode {k}: gap {gap:.3e}")
    return ok, lines, {"reduction.csv": "\n".join(rows) + "\n"}


def run_rho0(c):
    from .variational import compute_rho0
    a, b = c["interval"]
    r = compute_rho0(a, b, c["n"])
    ok = r.rho0 > math.pi ** 2 / (b - a) ** 2 and r.extrapolant_spread < 1e-6
    lines = [f"rho0({a:g},{b:g}) = {r.rho0:.12f}", f"extrapolant spread {r.extrapolant_spread:.3e}, "
             f"Euler-Lagrange residual {r.el_residual:.3e}"]
    return ok, lines, {"rho0.csv": r.to_csv(), "rho0.json": r.to_json()}


def run_scaling_law(c):
    from .variational import verify_scaling_law
    a, b = c["interval"]
    rep = verify_scaling_law(c["eps"], a, b, n=c["n"], samples=c["samples"], workers=c["threads"])
    last = rep.rows[-1]
    ok = (rep.within_bounds and rep.error_decreasing and abs(last["rel_err"]) < 0.05
          and all(r["direct_gap"] < 1e-6 for r in rep.rows))
    lines = [f"eps={r['eps']}: Lambda1/eps^2 = {r['ratio']:.8f} (rel. err {r['rel_err']:.2e}, "
             f"direct gap {r['direct_gap']:.1e})" for r in rep.rows]
    lines.append(f"rho0 = {rep.rho0:.10f}")
    return ok, lines, {"scaling_law.csv": rep.to_csv(), "scaling_law.json": rep.to_json()}


def run_nu_curve(c):
    from .variational import compute_rho0, nu_curve, scaling_samples
    a, b = c["interval"]
    lams = c["lambda"]
    if lams is None:
        lams = scaling_samples(c["eps"], a, b, compute_rho0(a, b, (255, 511)).rho0)
    curve = nu_curve(c["eps"], a, b, lams, n=c["n"], workers=c["threads"])
    msg = "no sign change" if curve.crossing is None else f"crossing at Lambda = {curve.crossing:.12g}"
    return True, [msg], {"nu_curve.csv": curve.to_csv(), "nu_curve.json": curve.to_json()}


def run_airy_estimate(c):
    from .asymptotics import frozen_constant_check
    from .variational import auxiliary_airy_estimate, compute_rho0
    a, b = c["interval"]
    r = compute_rho0(a, b)
    ests = [auxiliary_airy_estimate(e, r.minimizer, r.grid, K=c["K"]) for e in c["eps"]]
    C, ok = frozen_constant_check([e.ratio for e in ests])
    rows = ["eps,lambda,ratio_plus,ratio_minus"] + [
        f"{e.eps:.17g},{e.lam:.17g},{e.ratio_plus:.17g},{e.ratio_minus:.17g}" for e in ests]
    lines = [f"eps={e.eps}: ratio {e.ratio:.4g}" for e in ests] + [f"C frozen at {C:.4g}"]
    return ok, lines, {"airy_estimate.csv": "\n".join(rows) + "\n"}


RUNNERS = {
    "spectrum": run_spectrum, "pseudospectrum": run_pseudospectrum, "asymptotics": run_asymptotics,
    "resolvent-bound": run_resolvent_bound, "strip-estimate": run_strip_estimate,
    "reduction-check": run_reduction_check, "rho0": run_rho0, "scaling-law": run_scaling_law,
    "nu-curve": run_nu_curve, "airy-estimate": run_airy_estimate,
}


def run(config: dict[str, Any]) -> int:
    """Run a resolved config; returns the exit status."""
    out = Path(config["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".btspec-write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"btspec: cannot write to {out}: {exc}", file=sys.stderr)
        return EXIT_CANTCREAT
    t0 = time.perf_counter()
    try:
        passed, lines, files = RUNNERS[config["experiment"]](config)
    except UsageError as exc:
        print(f"btspec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - reported as an operational error
        print(f"btspec: {config['experiment']} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    wall = time.perf_counter() - t0
    manifest = {
        "tool": "btspec", "version": __version__, "wall_time_s": wall, "passed": bool(passed),
        "config": {k: _jsonable(v) for k, v in config.items()},
        "outputs": sorted(files),
    }
    try:
        for name, text in files.items():
            (out / name).write_text(text)
        (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    except OSError as exc:
        print(f"btspec: cannot write to {out}: {exc}", file=sys.stderr)
        return EXIT_CANTCREAT
    for line in lines:
        print(line)
    print(f"{config['experiment']}: {'PASS' if passed else 'FAIL'} ({wall:.1f} s, outputs in {out})")
    return EXIT_OK if passed else EXIT_FAIL


def _attach_negative_values(argv: list[str]) -> list[str]:
    # argparse reads "--im -2:0:5" as two options; rewrite it as "--im=-2:0:5"
    out: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if (tok.startswith("--") and "=" not in tok and i + 1 < len(argv)
                and re.match(r"^-[\d.]", argv[i + 1])):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ns = build_parser().parse_args(_attach_negative_values(argv))
    try:
        config = resolve_config(ns)
    except UsageError as exc:
        print(f"btspec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
