"""Command-line front end.

Subcommands: ``two-mode``, ``wick``, ``intdist``, ``ed run``, ``ed scan`` and
``verify``. Exit codes: 0 success, 2 usage or parse error, 3 optimizer
non-convergence, 4 a verification or invariant failure.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__, edengine, gibbs, wick
from ._backend import BACKEND
from .errors import FermiwickError
from .intdist import FitConfig, check_bound, fit_free_spectrum
from .spectra import ModeEnergies, format_spectrum, mode_energies_to_spectrum, read_spectrum, spectrum_to_mode_energies

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_INVARIANT = 4

SUITES = ("bound", "consistency", "free-chain")
OPTIONAL_SUITES = ("bound-labeled",)

# config key -> (converter, LatticeModel field or None)
CONFIG_KEYS = {
    "L": (int, "length"),
    "M": (int, "filling"),
    "t": (float, "hopping"),
    "V": (float, "interaction"),
    "mu": (float, "chemical_potential"),
    "boundary": (str, "boundary"),
    "cut": (int, None),
    "seed": (int, None),
    "restarts": (int, None),
    "tol": (float, None),
}


class UsageError(FermiwickError):
    pass


def _g17(x) -> str:
    return f"{float(x):.17g}"


def _g6(x) -> str:
    return f"{float(x):.6g}"


def _bool(x) -> str:
    return "true" if x else "false"


# ---------------------------------------------------------------- config


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}: line {lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise UsageError(f"{path}: line {lineno}: unknown key {key!r}")
            try:
                out[key] = CONFIG_KEYS[key][0](value)
            except ValueError:
                raise UsageError(f"{path}: line {lineno}: bad value {value!r} for {key}") from None
    return out


def _settings(args) -> dict:
    """Defaults, then the config file, then explicit flags."""
    settings = {"L": 8, "t": 1.0, "V": 0.0, "mu": 0.0, "boundary": "open",
                "seed": 0, "restarts": 16, "tol": 1e-10}
    if getattr(args, "config", None):
        settings.update(read_config(args.config))
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _model(settings, interaction=None) -> edengine.LatticeModel:
    fields = {f: settings[k] for k, (_, f) in CONFIG_KEYS.items() if f and k in settings}
    if interaction is not None:
        fields["interaction"] = interaction
    return edengine.LatticeModel(**fields)


def _fit_config(settings) -> FitConfig:
    return FitConfig(restarts=settings["restarts"], tol=settings["tol"], seed=settings["seed"])


def parse_v_range(text: str) -> np.ndarray:
    """``start:stop:step`` with ``stop`` included when it lies on the grid."""
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"V range must be start:stop:step, got {text!r}") from None
    if not all(math.isfinite(x) for x in (start, stop, step)):
        raise UsageError("V range must be finite")
    if step <= 0:
        raise UsageError("V range step must be positive")
    if stop < start:
        raise UsageError("V range stop lies below start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        # LF endings regardless of platform
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


# ---------------------------------------------------------------- commands


def cmd_two_mode(args) -> int:
    m = ModeEnergies.from_terms([args.e1, args.e2], {(0, 1): args.e12})
    e1, e2 = args.e1, args.e2
    e12 = e1 + e2 + args.e12
    mom = gibbs.moments(m)
    corrected = wick.violation_two_mode_closed(e1, e2, e12)
    printed = wick.violation_two_mode_closed(e1, e2, e12, as_printed=True)
    with _output(args.out) as out:
        print(f"E1 = {e1:.12g}", file=out)
        print(f"E2 = {e2:.12g}", file=out)
        print(f"E12 = {e12:.12g}", file=out)
        print(f"Z = {mom.partition_function:.12g}", file=out)
        print(f"<n1> = {mom.occupation[0]:.12g}", file=out)
        print(f"<n2> = {mom.occupation[1]:.12g}", file=out)
        print(f"<n1 n2> = {mom.pair_occupation[0, 1]:.12g}", file=out)
        if args.as_printed:
            print(f"W = {printed:.12g}  (printed closed form, diagnostic)", file=out)
        else:
            print(f"W = {corrected:.12g}", file=out)
        print(f"W_corrected = {corrected:.12g}", file=out)
        print(f"W_printed = {printed:.12g}", file=out)
    return EXIT_OK


def _load_spectrum(path, n_modes=None):
    try:
        with open(path, encoding="utf-8") as fh:
            return read_spectrum(fh, n_modes)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def cmd_wick(args) -> int:
    spec = _load_spectrum(args.spectrum)
    m = spectrum_to_mode_energies(spec)
    rep = wick.report(m, args.method, as_printed=args.as_printed)
    with _output(args.out) as out:
        print(f"# method = {rep.method.value}", file=out)
        print("i,j,W", file=out)
        for (i, j), w in sorted(rep.pairwise.items()):
            print(f"{i},{j},{_g17(w)}", file=out)
        print(f"# w_max = {_g17(rep.w_max)}", file=out)
    return EXIT_OK


def cmd_intdist(args) -> int:
    settings = _settings(args)
    spec = _load_spectrum(args.spectrum, args.n_modes if args.pairing == "labeled" else None)
    if not spec.normalized:
        spec = spec.normalize()
    cfg = replace(_fit_config(settings), evals_per_mode=args.evals_per_mode)
    fit = fit_free_spectrum(spec, args.n_modes, cfg, pairing=args.pairing)
    with _output(args.out) as out:
        print(f"d_f = {_g17(fit.d_f)}", file=out)
        print("eps_star = " + " ".join(_g17(e) for e in fit.eps_star), file=out)
        print(f"e0_star = {_g17(fit.e0_star)}", file=out)
        print(f"pairing = {args.pairing}", file=out)
        print(f"objective_evals = {fit.objective_evals}", file=out)
        print(f"restarts = {fit.restarts_used}", file=out)
        print(f"converged = {_bool(fit.converged)}", file=out)
    if not fit.converged:
        print("warning: evaluation budget exhausted before convergence", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_ed_run(args) -> int:
    settings = _settings(args)
    model = _model(settings)
    res = edengine.run_pipeline(model, settings.get("cut"), _fit_config(settings))
    manifest = [
        ("version", __version__),
        ("L", model.length), ("M", model.filling), ("t", _g17(model.hopping)),
        ("V", _g17(model.interaction)), ("mu", _g17(model.chemical_potential)),
        ("boundary", model.boundary), ("cut", res.cut), ("seed", settings["seed"]),
        ("restarts", settings["restarts"]), ("tol", _g17(settings["tol"])),
        ("ground_energy", _g17(res.ground.energy)), ("gap", _g17(res.ground.gap)),
        ("gap_warning", _bool(res.ground.degenerate)),
        ("w_max", _g17(res.wick.w_max)), ("d_f", _g17(res.fit.d_f)),
        ("bound_slack", _g17(res.bound.slack)), ("bound_ok", _bool(res.bound.holds)),
        ("converged", _bool(res.fit.converged)),
        ("labeling_ok", _bool(res.labeled)),
        ("flagged_levels", int(res.spectrum.flagged.sum()) if res.spectrum.flagged is not None else 0),
    ]
    if not res.labeled:
        manifest.append(("labeling_error", res.labeling_error))
    with _output(args.out) as out:
        for key, value in manifest:
            print(f"# {key} = {value}", file=out)
        out.write(format_spectrum(res.spectrum))
    return EXIT_OK if res.fit.converged else EXIT_NOT_CONVERGED


SCAN_COLUMNS = ("V", "w_max", "d_f", "bound_slack", "bound_ok", "gap_warning", "labeling_ok")


def _scan_row(job):
    settings, v = job
    res = edengine.run_pipeline(_model(settings, v), settings.get("cut"), _fit_config(settings))
    return [_g17(v), _g17(res.wick.w_max), _g17(res.fit.d_f), _g17(res.bound.slack),
            _bool(res.bound.holds), _bool(res.ground.degenerate), _bool(res.labeled)]


def cmd_ed_scan(args) -> int:
    settings = _settings(args)
    values = parse_v_range(args.v_range)
    _model(settings)  # validate before any work
    jobs = [(settings, float(v)) for v in values]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_scan_row, jobs))
    else:
        rows = [_scan_row(job) for job in jobs]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCAN_COLUMNS)
    writer.writerows(rows)
    with _output(args.out) as out:
        out.write(buf.getvalue())
    return EXIT_OK


# ---------------------------------------------------------------- verify


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    summary: str

    def line(self) -> str:
        return f"{self.name}: {'PASS' if self.passed else 'FAIL'} {self.summary}"


def random_two_body(rng, n_modes, single=3.0, pair=1.0) -> ModeEnergies:
    """Uniform eps_i in [-single, single] and eps_ij in [-pair, pair]."""
    eps = rng.uniform(-single, single, n_modes)
    pairs = {(i, j): rng.uniform(-pair, pair) for i in range(n_modes) for j in range(i + 1, n_modes)}
    return ModeEnergies.from_terms(eps, pairs)


def bound_sweep(seed: int = 0, count: int = 500, pairing: str = "sorted"):
    """(w_max, d_f, slack) for ``count`` random four-mode two-body models."""
    rng = np.random.default_rng([seed, 1])
    cfg = FitConfig(seed=seed)
    rows = []
    for _ in range(count):
        m = random_two_body(rng, 4)
        w = wick.report(m).w_max
        fit = fit_free_spectrum(mode_energies_to_spectrum(m, normalized=True), 4, cfg, pairing=pairing)
        rows.append((w, fit.d_f, check_bound(w, fit.d_f)))
    return rows


def suite_bound(seed: int = 0, pairing: str = "sorted") -> SuiteResult:
    rows = bound_sweep(seed, pairing=pairing)
    bad = sum(not chk.holds for _, _, chk in rows)
    worst = min(chk.slack for _, _, chk in rows)
    name = "bound" if pairing == "sorted" else "bound-labeled"
    return SuiteResult(name, bad == 0,
                       f"{len(rows) - bad}/{len(rows)} instances satisfy W <= 6 D_F, min slack {_g6(worst)}")


def perturbative_error(m: ModeEnergies, scale: float, as_printed: bool = False) -> float:
    """max over pairs of |W_perturbative - W_exact| with pair energies scaled."""
    ms = m.with_interactions_scaled(scale)
    exact = wick.report(ms, wick.Method.EXACT).pairwise
    pert = wick.report(ms, wick.Method.PERTURBATIVE, as_printed=as_printed).pairwise
    return max(abs(pert[k] - exact[k]) for k in exact)


def perturbative_correlator_error(m: ModeEnergies, scale: float) -> float:
    """Same as :func:`perturbative_error` on the signed <n_i n_j> - <n_i><n_j>.

    Unlike W this has no kink where the correlation changes sign, so its
    error shrinks as scale**2 already at moderate scales.
    """
    ms = m.with_interactions_scaled(scale)
    mom = gibbs.moments(ms)
    occ = [wick.perturbative_occupation(ms, k) for k in range(ms.n_modes)]
    worst = 0.0
    for i in range(ms.n_modes):
        for j in range(i + 1, ms.n_modes):
            exact = mom.pair_occupation[i, j] - mom.occupation[i] * mom.occupation[j]
            approx = wick.perturbative_pair_occupation(ms, i, j) - occ[i] * occ[j]
            worst = max(worst, abs(approx - exact))
    return worst


def suite_consistency(seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng([seed, 2])
    closed_err = 0.0
    for _ in range(100):
        e1, e2, e12 = rng.uniform(-3, 3, 3)
        m = ModeEnergies.from_terms([e1, e2], {(0, 1): e12})
        closed = wick.violation_two_mode_closed(e1, e2, e1 + e2 + e12)
        closed_err = max(closed_err, abs(closed - wick.violation_exact(m, 0, 1)))
    occ_err = 0.0
    for eps in np.linspace(-30, 30, 121):
        m = ModeEnergies([eps])
        occ_err = max(occ_err, abs(gibbs.exact_occupation(m, 0) - (1.0 / (1.0 + math.exp(eps)))))
    ratios = []
    for _ in range(50):
        m = random_two_body(rng, 4, single=2.0, pair=1.0)
        errs = [perturbative_correlator_error(m, s) for s in (0.04, 0.02, 0.01)]
        ratios += [errs[0] / errs[1], errs[1] / errs[2]]
    ok = closed_err <= 1e-12 and occ_err <= 1e-12 and all(3.0 <= r <= 5.0 for r in ratios)
    return SuiteResult("consistency", ok,
                       f"closed-form err {_g6(closed_err)}, occupation err {_g6(occ_err)}, "
                       f"perturbative ratios in [{_g6(min(ratios))}, {_g6(max(ratios))}]")


def suite_free_chain(seed: int = 0, length: int = 12) -> SuiteResult:
    model = edengine.LatticeModel(length)
    res = edengine.run_pipeline(model, length // 2, FitConfig(seed=seed))
    additivity = edengine.additivity_defect(res.spectrum) if res.labeled else math.inf
    residual = max(edengine.verify_full_wick(res.reduced, i, j)
                   for i in range(res.cut) for j in range(res.cut))
    ok = (res.labeled and additivity < 1e-10 and res.wick.w_max <= 1e-8
          and residual <= 1e-10 and res.fit.d_f <= 1e-4)
    return SuiteResult("free-chain", ok,
                       f"L={length} pair-energy defect {_g6(additivity)}, w_max {_g6(res.wick.w_max)}, "
                       f"Wick residual {_g6(residual)}, d_f {_g6(res.fit.d_f)}")


def run_suite(name: str, seed: int = 0) -> SuiteResult:
    if name == "bound":
        return suite_bound(seed)
    if name == "bound-labeled":
        return suite_bound(seed, pairing="labeled")
    if name == "consistency":
        return suite_consistency(seed)
    if name == "free-chain":
        return suite_free_chain(seed)
    raise UsageError(f"unknown suite {name!r}")


def cmd_verify(args) -> int:
    names = SUITES if args.suites is None else [s.strip() for s in args.suites.split(",") if s.strip()]
    for name in names:
        if name not in SUITES + OPTIONAL_SUITES:
            raise UsageError(f"unknown suite {name!r}; choose from {', '.join(SUITES + OPTIONAL_SUITES)}")
    results = [run_suite(name, args.seed) for name in names]
    with _output(args.out) as out:
        for r in results:
            print(r.line(), file=out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


# ---------------------------------------------------------------- parser


def _add_model_flags(p):
    p.add_argument("--config", metavar="PATH", help="key = value model file (L, M, t, V, mu, boundary, cut)")
    p.add_argument("--L", type=int, dest="L", help="chain length")
    p.add_argument("--M", type=int, dest="M", help="particle number (default L//2)")
    p.add_argument("--t", type=float, dest="t", help="hopping amplitude")
    p.add_argument("--V", type=float, dest="V", help="nearest-neighbour interaction")
    p.add_argument("--mu", type=float, help="chemical potential")
    p.add_argument("--boundary", choices=("open", "periodic"))
    p.add_argument("--cut", type=int, help="sites in the left block (default L//2)")


def _add_fit_flags(p):
    p.add_argument("--seed", type=int, help="restart seed (default 0)")
    p.add_argument("--restarts", type=int, help="Nelder-Mead restarts (default 16)")
    p.add_argument("--tol", type=float, help="simplex convergence tolerance (default 1e-10)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fermiwick", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("two-mode", help="two-mode spectrum: moments and both closed forms")
    p.add_argument("--e1", type=float, required=True, help="single-mode energy eps_1")
    p.add_argument("--e2", type=float, required=True, help="single-mode energy eps_2")
    p.add_argument("--e12", type=float, required=True, help="pair energy eps_12")
    p.add_argument("--as-printed", action="store_true", help="report W from the printed closed form")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_two_mode)

    p = sub.add_parser("wick", help="pairwise Wick violation of a labeled spectrum file")
    p.add_argument("spectrum", help="spectrum file, one 'bits,energy' line per level")
    p.add_argument("--method", default="exact", choices=("exact", "perturbative", "two-mode-closed"))
    p.add_argument("--as-printed", action="store_true", help="diagnostic variants of the closed forms")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_wick)

    p = sub.add_parser("intdist", help="interaction distance of a spectrum file")
    p.add_argument("spectrum", help="spectrum file, labeled or bare energies")
    p.add_argument("--n-modes", type=int, help="modes of the free fit (default from the file)")
    p.add_argument("--pairing", default="sorted", choices=("sorted", "labeled"))
    p.add_argument("--evals-per-mode", type=int, default=200, help="budget per restart is this times N")
    _add_fit_flags(p)
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_intdist)

    ed = sub.add_parser("ed", help="exact diagonalization of the t-V chain")
    ed_sub = ed.add_subparsers(dest="ed_command", required=True)
    p = ed_sub.add_parser("run", help="one pipeline run: manifest then spectrum")
    _add_model_flags(p)
    _add_fit_flags(p)
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_ed_run)
    p = ed_sub.add_parser("scan", help="sweep V and write CSV")
    _add_model_flags(p)
    _add_fit_flags(p)
    p.add_argument("--v-range", required=True, metavar="START:STOP:STEP")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_ed_scan)

    p = sub.add_parser("verify", help="built-in verification suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--suites", help=f"comma list from {', '.join(SUITES + OPTIONAL_SUITES)}")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FermiwickError as exc:
        print(f"fermiwick: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
