"""Command-line front end.

Subcommands: validate, seminorms, kernel, apply, compose, spectrum,
suite.  Exit codes: 0 success, 1 scientific failure (a hypothesis or
acceptance check failed), 2 usage/config error.  All outputs are
canonical JSON / CSV; every report embeds the config hash and seed.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings

from ._jsonutil import dump_json
from .calculus import compare_symbols
from .config import ConfigError, RunConfig, load_config
from .core import make_grid
from .errors import InvalidArgumentError, LemmaViolatedError
from .operator import (
    FIOSpec,
    apply as apply_kernel,
    assemble,
    load_field,
    save_field,
    save_kernel,
)
from .phase import check_separation, omega_region_check, validate_G, \
    validate_H_via_lemma
from .presets import bundled_test_fields
from .spectral import spectrum
from .suite import run_suite
from .symbols import estimate_seminorms

EXIT_OK = 0
EXIT_SCIENTIFIC = 1
EXIT_USAGE = 2

_THREAD_LIMITER = None  # keeps threadpoolctl limits alive for the process


def _set_threads(n: int | None):
    global _THREAD_LIMITER
    if n is None:
        return
    os.environ.setdefault("OMP_NUM_THREADS", str(n))
    try:
        import threadpoolctl
        _THREAD_LIMITER = threadpoolctl.threadpool_limits(limits=n)
    except ImportError:
        warnings.warn("threadpoolctl unavailable; set OMP_NUM_THREADS "
                      "before launching for BLAS thread control")


def _out_dir(cfg: RunConfig, args) -> str:
    out = args.out or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    return out


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        doc = dict(cfg.raw)
        doc["seed"] = args.seed
        from .config import parse_config
        cfg = parse_config(doc)
    if args.h is not None:
        doc = dict(cfg.raw)
        doc["h_list"] = [args.h]
        from .config import parse_config
        cfg = parse_config(doc)
    return cfg


def _fio_spec(cfg: RunConfig, h: float) -> FIOSpec:
    return FIOSpec(cfg.phase, cfg.amplitude, h, theta_grid=cfg.theta_grid,
                   cutoff=cfg.cutoff, ibp=cfg.ibp)


def cmd_validate(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    box = cfg.grid
    g_rep = validate_G(cfg.phase, box, k=3, seed=cfg.seed)
    h_rep = validate_H_via_lemma(cfg.phase, box, seed=cfg.seed)
    try:
        sep = check_separation(cfg.phase, box, seed=cfg.seed)
        separation = {"C2": sep["C2"], "witness": list(sep["witness"]),
                      "violated": False}
    except LemmaViolatedError as exc:
        separation = {"C2": None, "witness": [list(w) for w in exc.witness],
                      "violated": True}
    omega = omega_region_check(cfg.phase, 0.01, box, seed=cfg.seed)
    passed = bool(g_rep.passed and h_rep.passed
                  and not separation["violated"])
    report = {
        **cfg.stamp(),
        "phase": cfg.phase.name,
        "G": g_rep.to_jsonable(), "H": h_rep.to_jsonable(),
        "separation": separation,
        "omega_region": omega,
        "passed": passed,
    }
    path = os.path.join(out, "validation.json")
    dump_json(report, path)
    print(f"wrote {path}")
    c2 = separation["C2"]
    print(f"G: {'pass' if g_rep.passed else 'FAIL'}; "
          f"H: {'pass' if h_rep.passed else 'FAIL'}; "
          f"C2={'violated' if c2 is None else format(c2, '.6g')}")
    return EXIT_OK if passed else EXIT_SCIENTIFIC


def cmd_seminorms(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    table = estimate_seminorms(cfg.amplitude, cfg.grid, k=2)
    path = os.path.join(out, "seminorms.json")
    with open(path, "w") as fh:
        fh.write(table.to_json())
    print(f"wrote {path} (max constant {table.max_constant():.6g})")
    return EXIT_OK


def cmd_kernel(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    src = cfg.source_grid or cfg.grid
    for h in cfg.h_list:
        M = assemble(_fio_spec(cfg, h), cfg.grid, src)
        M.metadata.update(cfg.stamp())
        paths = save_kernel(M, os.path.join(out, f"kernel_h{h:g}"))
        print(f"h={h:g}: wrote {paths['csv']}, {paths['npz']}, "
              f"{paths['json']}")
    return EXIT_OK


def cmd_apply(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    src = cfg.source_grid or cfg.grid
    if args.input:
        fields = [load_field(args.input)]
        names = ["input"]
    else:
        fields = bundled_test_fields(src)
        names = [f"bundled{i}" for i in range(len(fields))]
    for h in cfg.h_list:
        M = assemble(_fio_spec(cfg, h), cfg.grid, src)
        for name, f in zip(names, fields):
            res = apply_kernel(M, f)
            path = os.path.join(out, f"apply_h{h:g}_{name}.csv")
            save_field(res, path)
            print(f"h={h:g} {name}: wrote {path}")
    return EXIT_OK


def cmd_compose(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    base_h = cfg.h_list[0]
    runs = []
    for h in cfg.h_list:
        n = int(round(cfg.grid.points_per_axis * base_h / h))
        runs.append((h, make_grid(cfg.grid.dim, cfg.grid.half_width,
                                  max(n, cfg.grid.points_per_axis))))
    rep = compare_symbols(cfg.phase, cfg.amplitude, runs)
    path = os.path.join(out, "symbol_comparison.json")
    doc = {**cfg.stamp(), "report": rep.to_jsonable()}
    dump_json(doc, path)
    # plot-ready symbol samples at the coarsest run
    from hfio.calculus import extract_symbol, predicted_symbol
    from hfio.operator import compose_ffstar
    h0, grid0 = runs[0]
    comp = compose_ffstar(_fio_spec(cfg, h0), grid0, grid0, route="direct")
    ext = extract_symbol(comp, h0)
    ext.to_csv(os.path.join(out, f"symbol_extracted_h{h0:g}.csv"))
    pred = predicted_symbol(cfg.phase, cfg.amplitude, "FFstar",
                            ext.x_nodes, ext.xi_nodes)
    pred.to_csv(os.path.join(out, f"symbol_predicted_h{h0:g}.csv"))
    print(f"wrote {path}")
    print(f"errors={['%.3e' % e for e in rep.errors]} slope={rep.slope} "
          f"passed={rep.passed}")
    return EXIT_OK if rep.passed else EXIT_SCIENTIFIC


def cmd_spectrum(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    src = cfg.source_grid or cfg.grid
    code = EXIT_OK
    for h in cfg.h_list:
        M = assemble(_fio_spec(cfg, h), cfg.grid, src)
        rep = spectrum(M)
        jpath = os.path.join(out, f"spectrum_h{h:g}.json")
        doc = {**cfg.stamp(), "report": rep.to_jsonable()}
        dump_json(doc, jpath)
        cpath = os.path.join(out, f"singular_values_h{h:g}.csv")
        rep.save_csv(cpath)
        print(f"h={h:g}: norm={rep.operator_norm:.6g} "
              f"verdict={rep.verdict}; wrote {jpath}, {cpath}")
    return code


def cmd_suite(args) -> int:
    out = args.out or "hfio-out"
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "suite_result.json")
    res = run_suite(seed=args.seed if args.seed is not None else 1234,
                    out_path=path)
    print(f"wrote {path}")
    print(f"overall: {'PASS' if res.overall else 'FAIL'} "
          f"({res.environment['total_runtime_s']}s)")
    return EXIT_OK if res.overall else EXIT_SCIENTIFIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hfio",
        description="Semiclassical Fourier-integral-operator numerics: "
                    "hypothesis validation, kernel assembly, symbol "
                    "calculus and spectral verification.",
        epilog="Environment: FIO_MAX_MATRIX overrides the dense-matrix "
               "node cap (default 4096). Exit codes: 0 success, "
               "1 scientific failure, 2 usage/config error.")
    p.add_argument("--threads", type=int, default=None,
                   help="limit BLAS/OpenMP threads")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        if needs_config:
            sp.add_argument("--config", required=True,
                            help="path to the JSON run configuration")
        sp.add_argument("--out", default=None,
                        help="output directory (default: config out_dir)")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        sp.add_argument("--h", type=float, default=None,
                        help="override h_list with a single value")

    for name, helptext in (
            ("validate", "validate phase hypotheses, write JSON reports"),
            ("seminorms", "estimate amplitude class constants"),
            ("kernel", "assemble and export kernel matrices"),
            ("apply", "apply the operator to input or bundled fields"),
            ("compose", "composition + symbol comparison pipeline"),
            ("spectrum", "singular-value analysis per h")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        if name == "apply":
            sp.add_argument("--input", default=None,
                            help="field CSV to transform (default: "
                                 "bundled test fields)")

    sp = sub.add_parser("suite", help="run the bundled acceptance suite")
    sp.add_argument("--out", default=None)
    sp.add_argument("--seed", type=int, default=None)
    return p


_CONFIG_COMMANDS = {
    "validate": cmd_validate,
    "seminorms": cmd_seminorms,
    "kernel": cmd_kernel,
    "apply": cmd_apply,
    "compose": cmd_compose,
    "spectrum": cmd_spectrum,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    _set_threads(args.threads)
    try:
        if args.command == "suite":
            return cmd_suite(args)
        cfg = _load(args)
        with warnings.catch_warnings():
            warnings.simplefilter("once")
            return _CONFIG_COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidArgumentError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LemmaViolatedError, RuntimeError) as exc:
        print(f"scientific failure: {exc}", file=sys.stderr)
        return EXIT_SCIENTIFIC


if __name__ == "__main__":
    sys.exit(main())
