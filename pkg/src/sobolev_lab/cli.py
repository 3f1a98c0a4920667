"""Command-line front end, configuration, and report persistence.

Subcommands: ``deficit``, ``project``, ``spectrum``, ``inequality-scan``,
``sharpness``, ``ratio-scan``, ``selftest``. Configuration resolves in
three layers: built-in defaults, then a ``key=value`` config file
(``--config``), then explicit flags. Every run writes a JSON report that
embeds the package version, the fully resolved config, and the grid, with
sorted keys so identical runs produce byte-identical bytes; family and
scan subcommands also write CSV (comma-separated, 17 significant digits).

Exit codes: 0 success, 1 validation error (bad flags, bad config, bad
values), 2 numerical failure. ``SOBOLEV_LAB_THREADS`` caps the thread
pools used inside the modules.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass

from . import __version__
from .bubbles import (Bubble, Dimension, as_field, sobolev_constant,
                      unit_bubble)
from .corpus import zonal_shell
from .deficit import deficit, grad_integral_p
from .errors import NumericalError
from .experiments import (DEFAULT_EPS_LIST, DEFAULT_I_LIST,
                          anisotropic_family, anisotropic_field, bump_family,
                          perturbation_corpus, stability_ratio_scan)
from .grids import AngularGrid, RadialGrid
from .kernels import (search_appendixB_C, search_C1, search_c0,
                      verify_appendixB, verify_lemma21, verify_lemma23,
                      zeta_for)
from .projection import project_Fu
from .spectrum import sector_ladders, spectral_gap

SUBCOMMANDS = ("deficit", "project", "spectrum", "inequality-scan",
               "sharpness", "ratio-scan", "selftest")

APPENDIX_EPS0 = 0.3

INEQUALITY_SAMPLES = 1_000_000


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run parameters; embedded verbatim in every report."""

    n: int = 3
    p: float = 2.0
    grid_N: int = 2048
    grid_M: int = 64
    seed: int = 0
    out: str = "reports"
    field: str = "bubble"
    kappa: float = 0.5
    sectors: int = 4
    k: int = 3
    eps_list: tuple = tuple(DEFAULT_EPS_LIST)
    i_list: tuple = tuple(DEFAULT_I_LIST)
    x_far: float = 40.0

    def validate(self):
        if self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n}")
        if not 1.0 < self.p < self.n:
            raise ValueError(f"need 1 < p < n, got p={self.p}, n={self.n}")
        if self.grid_N < 16 or self.grid_M < 4:
            raise ValueError(
                f"grid sizes too small: N={self.grid_N}, M={self.grid_M}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if not self.out:
            raise ValueError("output directory must be nonempty")
        if not 0.0 < self.kappa < 1.0:
            raise ValueError(f"kappa must lie in (0, 1), got {self.kappa}")
        if self.sectors < 1 or self.k < 1:
            raise ValueError(
                f"sectors and k must be >= 1, got {self.sectors}, {self.k}")
        if not self.eps_list or any(e <= 0.0 for e in self.eps_list):
            raise ValueError("eps-list must be nonempty and positive")
        if not self.i_list or any(i < 1 for i in self.i_list):
            raise ValueError("i-list must be nonempty positive integers")
        if self.x_far <= 1.0:
            raise ValueError(f"x-far must exceed 1, got {self.x_far}")
        return self

    def as_dict(self):
        return {
            "n": self.n, "p": self.p, "grid_N": self.grid_N,
            "grid_M": self.grid_M, "seed": self.seed, "out": self.out,
            "field": self.field, "kappa": self.kappa,
            "sectors": self.sectors, "k": self.k,
            "eps_list": list(self.eps_list), "i_list": list(self.i_list),
            "x_far": self.x_far,
        }


def _float_list(text):
    vals = tuple(float(v) for v in str(text).split(",") if v.strip())
    if not vals:
        raise ValueError(f"empty list: {text!r}")
    return vals


def _int_list(text):
    return tuple(int(v) for v in str(text).split(",") if v.strip())


_CASTS = {
    "n": int, "p": float, "grid_N": int, "grid_M": int, "seed": int,
    "out": str, "field": str, "kappa": float, "sectors": int, "k": int,
    "eps_list": _float_list, "i_list": _int_list, "x_far": float,
}


def load_config_file(path):
    """Parse a key=value config file into typed overrides.

    Blank lines and '#' comments are ignored; keys may use dashes or
    underscores. Unknown keys and uncastable values raise ValueError.
    """
    overrides = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(
                    f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            key = key.strip().replace("-", "_")
            if key not in _CASTS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                overrides[key] = _CASTS[key](value.strip())
            except ValueError as exc:
                raise ValueError(
                    f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return overrides


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _build_parser():
    top = _Parser(prog="sobolev-lab",
                  description="Stability laboratory for the p-Sobolev "
                              "inequality: deficits, projections, spectra, "
                              "inequality scans, and sharpness rates.")
    sub = top.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    extras = {
        "deficit": ("field",),
        "project": ("field",),
        "spectrum": ("sectors", "k"),
        "inequality-scan": ("kappa",),
        "sharpness": ("eps_list", "i_list", "x_far"),
        "ratio-scan": (),
        "selftest": (),
    }
    helps = {
        "deficit": "evaluate the Sobolev deficit of a named field",
        "project": "project a named field onto the bubble manifold",
        "spectrum": "sector eigenvalue ladders and the transverse gap",
        "inequality-scan": "constant searches with fresh-seed verification",
        "sharpness": "rate families with log-log slope fits",
        "ratio-scan": "deficit / distance^alpha over the corpus",
        "selftest": "grid moment checks and known-eigenvalue checks",
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--n", type=int, default=None,
                        help="ambient dimension")
        sp.add_argument("--p", type=float, default=None,
                        help="Sobolev exponent, 1 < p < n")
        sp.add_argument("--grid-N", dest="grid_N", type=int, default=None,
                        help="radial nodes")
        sp.add_argument("--grid-M", dest="grid_M", type=int, default=None,
                        help="angular nodes")
        sp.add_argument("--seed", type=int, default=None,
                        help="seed for sampled scans")
        sp.add_argument("--out", type=str, default=None,
                        help="report output directory")
        sp.add_argument("--config", type=str, default=None,
                        help="key=value config file (flags win)")
        if "field" in extras[name]:
            sp.add_argument("--field", type=str, default=None,
                            help="bubble | stretch:I | shell:L:EPS")
        if "sectors" in extras[name]:
            sp.add_argument("--sectors", type=int, default=None,
                            help="number of angular sectors to solve")
            sp.add_argument("--k", type=int, default=None,
                            help="eigenvalues per sector")
        if "kappa" in extras[name]:
            sp.add_argument("--kappa", type=float, default=None,
                            help="interpolation parameter in (0, 1)")
        if "eps_list" in extras[name]:
            sp.add_argument("--eps-list", dest="eps_list", type=_float_list,
                            default=None, help="comma-separated bump sizes")
            sp.add_argument("--i-list", dest="i_list", type=_int_list,
                            default=None,
                            help="comma-separated stretch indices")
            sp.add_argument("--x-far", dest="x_far", type=float,
                            default=None, help="bump center distance "
                            "(must satisfy the separation precondition)")
    return top


def resolve_config(ns):
    values = {}
    if getattr(ns, "config", None):
        values.update(load_config_file(ns.config))
    for key in _CASTS:
        flag = getattr(ns, key, None)
        if flag is not None:
            values[key] = flag
    # selftest is self-contained; everything else must pin the exponent
    if ns.subcommand != "selftest" and "p" not in values:
        raise ValueError("--p is required (or set p= in the config file)")
    return RunConfig(**values).validate()


# ---------------------------------------------------------------------------
# report writing
# ---------------------------------------------------------------------------

def _write_json(path, payload):
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_csv(path, header, rows):
    def cell(v):
        return f"{v:.17g}" if isinstance(v, float) else str(v)

    lines = [",".join(header)]
    lines += [",".join(cell(v) for v in row) for row in rows]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _grids(cfg):
    dim = Dimension(cfg.n, cfg.p)
    rgrid = RadialGrid.for_dimension(dim, N=cfg.grid_N)
    agrid = AngularGrid(cfg.n, M=cfg.grid_M)
    return dim, rgrid, agrid


def _grid_block(rgrid, agrid):
    return {"N": rgrid.N, "M": agrid.M,
            "s_min": rgrid.s_min, "s_max": rgrid.s_max}


def _named_field(cfg, dim, rgrid, agrid):
    """Field registry for deficit/project: named by construction."""
    name = cfg.field
    if name == "bubble":
        return as_field(Bubble(1.0, 1.0, 0.0), dim)
    if name.startswith("stretch:"):
        return anisotropic_field(dim, int(name.split(":", 1)[1]))
    if name.startswith("shell:"):
        parts = name.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected shell:L:EPS, got {name!r}")
        ell, eps = int(parts[1]), float(parts[2])
        if eps <= 0.0:
            raise ValueError(f"shell eps must be positive, got {eps}")
        v = as_field(unit_bubble(dim, rgrid), dim)
        phi = zonal_shell(dim.n, ell, 0.0, 1.0)
        gv = grad_integral_p(v, dim, rgrid, agrid) ** (1.0 / dim.p)
        gp = grad_integral_p(phi, dim, rgrid, agrid) ** (1.0 / dim.p)
        return v.plus(phi, eps * gv / gp, desc=name)
    raise ValueError(
        f"unknown field {name!r}: use bubble, stretch:I, or shell:L:EPS")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_deficit(cfg):
    dim, rgrid, agrid = _grids(cfg)
    fld = _named_field(cfg, dim, rgrid, agrid)
    rep = deficit(fld.to_gridded(rgrid, agrid, desc=cfg.field),
                  dim, rgrid, agrid)
    result = {"field": cfg.field, **rep.as_dict()}
    summary = (f"deficit[{cfg.field}] n={cfg.n} p={cfg.p:g}: "
               f"delta={rep.deficit:.6e}")
    return result, _grid_block(rgrid, agrid), summary, {}


def _cmd_project(cfg):
    dim, rgrid, agrid = _grids(cfg)
    fld = _named_field(cfg, dim, rgrid, agrid)
    proj = project_Fu(fld.to_gridded(rgrid, agrid, desc=cfg.field),
                      dim, rgrid, agrid)
    result = {"field": cfg.field, **proj.as_dict()}
    bub = proj.bubble
    summary = (f"project[{cfg.field}] n={cfg.n} p={cfg.p:g}: "
               f"a={bub.a:.6g} b={bub.b:.6g} x0={bub.x0:.6g} "
               f"distance={proj.distance:.6e}")
    return result, _grid_block(rgrid, agrid), summary, {}


def _cmd_spectrum(cfg):
    dim, rgrid, agrid = _grids(cfg)
    gap = spectral_gap(dim, rgrid)
    ladders = sector_ladders(dim, rgrid, ells=tuple(range(cfg.sectors)),
                             k=cfg.k)
    threshold = (dim.pstar - 1.0) * sobolev_constant(dim, rgrid) ** dim.p
    result = {
        "gap": gap, "threshold": threshold,
        "sectors": [lad.as_dict() for lad in ladders],
    }
    summary = (f"spectrum n={cfg.n} p={cfg.p:g}: gap={gap:.6e} "
               f"threshold={threshold:.6e}")
    return result, _grid_block(rgrid, agrid), summary, {}


def _cmd_inequality_scan(cfg):
    dim = Dimension(cfg.n, cfg.p)
    p, kappa, seed = cfg.p, cfg.kappa, cfg.seed
    c0 = search_c0(p, kappa, sample_budget=INEQUALITY_SAMPLES, seed=seed)
    worst21, bad21 = verify_lemma21(p, kappa, c0.constant,
                                    samples=INEQUALITY_SAMPLES, seed=seed + 1)
    c1 = search_C1(dim, kappa, seed=seed)
    worst23, bad23 = verify_lemma23(dim, kappa, c1.constant,
                                    samples=INEQUALITY_SAMPLES, seed=seed + 1)
    result = {
        "quadratic_term": {"search": c0.as_dict(), "verify_min_gap": worst21,
                           "verify_violations": bad21},
        "function_expansion": {"search": c1.as_dict(),
                               "verify_min_gap": worst23,
                               "verify_violations": bad23},
    }
    if dim.p <= dim.low_p_threshold:
        cb = search_appendixB_C(dim, APPENDIX_EPS0,
                                sample_budget=INEQUALITY_SAMPLES, seed=seed)
        worstB, badB = verify_appendixB(dim, APPENDIX_EPS0, cb.constant,
                                        samples=INEQUALITY_SAMPLES,
                                        seed=seed + 1)
        result["weighted_absorption"] = {
            "eps0": APPENDIX_EPS0, "zeta": zeta_for(APPENDIX_EPS0, p),
            "search": cb.as_dict(), "verify_min_gap": worstB,
            "verify_violations": badB,
        }
    else:
        result["weighted_absorption"] = {
            "skipped": f"needs p <= 2n/(n+2) = {dim.low_p_threshold:g}"}
    violations = bad21 + bad23 + result["weighted_absorption"].get(
        "verify_violations", 0)
    summary = (f"inequality-scan p={p:g} kappa={kappa:g}: "
               f"c0={c0.constant:.6g} C1={c1.constant:.6g} "
               f"violations={violations}")
    return result, None, summary, {}


def _family_rows(fit, alpha):
    rows = []
    for x, d, r in zip(fit.abscissae, fit.deficits, fit.distances):
        rows.append((x, d, r, d / r ** alpha))
    return rows


def _cmd_sharpness(cfg):
    dim, rgrid, agrid = _grids(cfg)
    alpha = max(2.0, dim.p)
    aniso = anisotropic_family(dim, cfg.i_list, rgrid, agrid)
    bumpf = bump_family(dim, cfg.eps_list, cfg.x_far, rgrid, agrid)
    result = {"alpha": alpha, "anisotropic": aniso.as_dict(),
              "bump": bumpf.as_dict()}
    csvs = {
        "sharpness_anisotropic.csv": _family_rows(aniso, alpha),
        "sharpness_bump.csv": _family_rows(bumpf, alpha),
    }
    summary = (f"sharpness n={cfg.n} p={cfg.p:g}: "
               f"anisotropic slope={aniso.deficit_slope:.4f} "
               f"bump slope={bumpf.deficit_slope:.4f}")
    return result, _grid_block(rgrid, agrid), summary, csvs


def _cmd_ratio_scan(cfg):
    dim, rgrid, agrid = _grids(cfg)
    corpus = perturbation_corpus(dim, rgrid, agrid)
    scan = stability_ratio_scan(dim, corpus, rgrid, agrid)
    rows = list(zip(scan.descs, scan.deficits, scan.distances, scan.ratios))
    result = scan.as_dict()
    summary = (f"ratio-scan n={cfg.n} p={cfg.p:g} alpha={scan.alpha:g}: "
               f"min={scan.min_ratio:.6e} median={scan.median_ratio:.6e} "
               f"failures={scan.failures}/{scan.count}")
    return result, _grid_block(rgrid, agrid), summary, {"ratio_scan.csv": rows}


def _cmd_selftest(cfg):
    dim, rgrid, agrid = _grids(cfg)
    rgrid.self_test()
    agrid.self_test()
    c = sobolev_constant(dim, rgrid) ** dim.p
    ladders = sector_ladders(dim, rgrid, ells=(0, 1), k=2)
    known = {
        "amplitude": (ladders[0].eigenvalues[0], (dim.p - 1.0) * c),
        "concentration": (ladders[0].eigenvalues[1], (dim.pstar - 1.0) * c),
        "translation": (ladders[1].eigenvalues[0], (dim.pstar - 1.0) * c),
    }
    errors = {name: abs(got - want) / want
              for name, (got, want) in known.items()}
    worst = max(errors.values())
    if worst > 1e-3:
        raise NumericalError("known eigenvalues not recovered",
                             **{k: float(v) for k, v in errors.items()})
    result = {
        "grid_moment_checks": "passed",
        "known_eigenvalue_relative_errors": errors,
    }
    summary = (f"selftest n={cfg.n} p={cfg.p:g}: grids ok, "
               f"eigenvalue errors <= {worst:.2e}")
    return result, _grid_block(rgrid, agrid), summary, {}


_COMMANDS = {
    "deficit": _cmd_deficit,
    "project": _cmd_project,
    "spectrum": _cmd_spectrum,
    "inequality-scan": _cmd_inequality_scan,
    "sharpness": _cmd_sharpness,
    "ratio-scan": _cmd_ratio_scan,
    "selftest": _cmd_selftest,
}

CSV_HEADER = ("param", "deficit", "distance", "ratio")


def run(argv):
    """Execute one subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if ns.subcommand is None:
        parser.print_usage(sys.stderr)
        sys.stderr.write("sobolev-lab: error: a subcommand is required\n")
        return 1
    try:
        cfg = resolve_config(ns)
    except (ValueError, OSError) as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"sobolev-lab: config error: {exc}\n")
        return 1
    try:
        result, grid, summary, csvs = _COMMANDS[ns.subcommand](cfg)
    except ValueError as exc:
        sys.stderr.write(f"sobolev-lab: invalid input: {exc}\n")
        return 1
    except NumericalError as exc:
        sys.stderr.write(f"sobolev-lab: numerical failure: {exc}\n")
        return 2
    os.makedirs(cfg.out, exist_ok=True)
    payload = {
        "version": __version__,
        "subcommand": ns.subcommand,
        "config": cfg.as_dict(),
        "grid": grid,
        "result": result,
    }
    stem = ns.subcommand.replace("-", "_")
    _write_json(os.path.join(cfg.out, f"{stem}.json"), payload)
    for name, rows in csvs.items():
        _write_csv(os.path.join(cfg.out, name), CSV_HEADER, rows)
    print(summary)
    return 0


def main():
    sys.exit(run(sys.argv[1:]))


__all__ = ["RunConfig", "load_config_file", "resolve_config", "run", "main"]


if __name__ == "__main__":
    main()
