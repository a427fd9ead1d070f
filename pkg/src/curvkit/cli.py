"""
Command-line entry point: ``curvkit <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 every point failed
to produce an estimate.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import benchmark as bm
from .errors import CurvkitError
from .io import (
    read_curvature_csv,
    read_xyz,
    write_curvature_csv,
    write_member_map,
    write_report_csv,
    write_truth_csv,
    write_xyz,
)
from .normals import estimate_normals_pca
from .quadratic import MIN_K as QUAD_MIN_K
from .quadratic import quadratic_field
from .simplify import SimplifyParams, match_target_size, select_curvature, simplify_adaptive, simplify_uniform
from .spatial import SpatialIndex
from .surfaces import SURFACES, add_gaussian_noise, make_surface, sample_surface
from .wme import FLAG_DEFAULT_NORMAL, FLAG_DEGENERATE, estimate_field, resolve_k

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE = 0, 1, 2, 3

log = logging.getLogger("curvkit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _k_arg(text: str):
    if text == "auto":
        return "auto"
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"k must be 'auto' or an integer, got {text!r}") from None
    if k < 1:
        raise argparse.ArgumentTypeError("k must be positive")
    return k


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="curvkit", description="Curvature estimation for oriented point clouds.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("sample", help="sample a synthetic surface with ground truth")
    s.add_argument("--surface", required=True, choices=sorted(SURFACES))
    s.add_argument("--params", type=_floats, default=[], help="shape parameters, e.g. 5,2")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--noise-sigma2", type=float, default=0.0)
    s.add_argument("--keep-normals", action="store_true",
                   help="write exact normals even when noise is added")
    s.add_argument("--truth", help="CSV of clean positions, normals and curvatures")

    s = sub.add_parser("normals", help="estimate PCA normals")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--k", type=int, default=30)
    s.add_argument("--out", required=True)

    s = sub.add_parser("estimate", help="estimate curvature at every point")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--method", choices=bm.METHODS, default="wme")
    s.add_argument("--k", type=_k_arg, default="auto")
    s.add_argument("--normal-k", type=int, help="k for PCA normals (default: same as --k)")
    s.add_argument("--oriented", action="store_true",
                   help="normals are globally consistent; skip local re-orientation")
    s.add_argument("--out", required=True)

    s = sub.add_parser("benchmark", help="run a synthetic benchmark and write a CSV report")
    s.add_argument("--mode", choices=["convergence", "compare", "holdout"], required=True)
    s.add_argument("--surface", choices=sorted(SURFACES), default="torus")
    s.add_argument("--params", type=_floats, default=[])
    s.add_argument("--n-list", type=_ints, default=[1000, 2000, 4000, 8000, 16000])
    s.add_argument("--k-rule", default="pow23", help="pow23, auto or fixed:K")
    s.add_argument("--method", choices=bm.METHODS, default="wme")
    s.add_argument("--trials", type=int, default=3)
    s.add_argument("--sigma2-list", type=_floats, default=[0.0])
    s.add_argument("--fractions", type=_floats, default=[0.5, 0.6, 0.7, 0.8, 0.9])
    s.add_argument("--k-infer", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    s = sub.add_parser("simplify", help="cluster-based simplification")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--curv", help="curvature CSV from 'estimate' (required for adaptive)")
    s.add_argument("--mode", choices=["uniform", "adaptive"], default="adaptive")
    s.add_argument("--T", type=float, default=50)
    s.add_argument("--c", type=float, default=0.9)
    s.add_argument("--curvature-kind", choices=["gaussian", "mean", "principal-max"], default="mean")
    s.add_argument("--target-size", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--member-map")
    s.add_argument("--out", required=True)
    return p


def _cmd_sample(a) -> int:
    surface = make_surface(a.surface, a.params)
    sample = sample_surface(surface, a.n, a.seed)
    cloud = sample.cloud
    if a.noise_sigma2 > 0:
        cloud = add_gaussian_noise(cloud, a.noise_sigma2, bm.trial_seed(a.seed, 1))
        if not a.keep_normals:
            cloud = cloud.with_normals(None)
    write_xyz(cloud, a.out)
    if a.truth:
        write_truth_csv(sample, a.truth)
    log.info("wrote %d points of %s to %s", len(cloud), surface, a.out)
    return EXIT_OK


def _cmd_normals(a) -> int:
    cloud = read_xyz(a.inp)
    est = estimate_normals_pca(cloud, a.k)
    write_xyz(cloud.with_normals(est.normals), a.out)
    return EXIT_OK


def _cmd_estimate(a) -> int:
    cloud = read_xyz(a.inp)
    n = len(cloud)
    k = resolve_k(a.k, n)
    index = SpatialIndex(cloud.positions)
    extra = np.zeros(n, dtype=np.int64)
    if cloud.normals is None:
        nk = a.normal_k or max(k, 3)
        log.warning("input has no normals; estimating PCA normals with k=%d", nk)
        est = estimate_normals_pca(cloud, nk, index=index)
        cloud = cloud.with_normals(est.normals)
        extra[est.degenerate] = FLAG_DEFAULT_NORMAL
    if a.method == "wme":
        field = estimate_field(cloud, k, index=index, local_orientation=not a.oriented)
    else:
        if a.k == "auto":
            k = max(k, QUAD_MIN_K)
        field = quadratic_field(cloud, k, index=index)
    flags = field.flags | extra
    write_curvature_csv(field, cloud, a.out, flags=flags)
    log.info("estimated %s curvature with k=%d at %d points", a.method, k, n)
    if np.all(flags & FLAG_DEGENERATE):
        log.error("no point produced an estimate")
        return EXIT_DEGENERATE
    return EXIT_OK


def _cmd_benchmark(a) -> int:
    surface = make_surface(a.surface, a.params)
    k_of = bm.parse_k_rule(a.k_rule)
    if a.mode == "convergence":
        res = bm.convergence_experiment(surface, a.n_list, k_of, a.method, a.seed, a.trials)
        write_report_csv(res.all_reports, a.out)
        print(f"slope={res.slope:.4f} intercept={res.intercept:.4f}")
    elif a.mode == "compare":
        reports = []
        for n in a.n_list:
            pairs = bm.compare_methods(surface, [n], k_of(n), a.sigma2_list, a.seed, a.trials)
            flat = [r for pair in pairs for r in pair]
            reports += flat
            for method in bm.METHODS:
                for s2 in a.sigma2_list:
                    group = [r for r in flat if r.method == method and r.sigma2 == s2]
                    reports.append(bm.aggregate_reports(group))
        write_report_csv(reports, a.out)
    else:
        n = a.n_list[0]
        sample = sample_surface(surface, n, bm.trial_seed(a.seed, n, 0))
        k_est = k_of(n)
        ref = bm.holdout_reference(sample.cloud, k_est, a.method)
        reports = []
        for fr in a.fractions:
            mse_K, mse_H = bm.holdout_evaluation(ref, fr, k_est, a.k_infer, a.seed, a.method)
            reports.append(bm.MseReport(a.method, str(surface), int(round(fr * n)), k_est, 0.0,
                                        float("nan"), mse_K, mse_H, float("nan"), a.seed, None, True))
        write_report_csv(reports, a.out)
    return EXIT_OK


def _cmd_simplify(a) -> int:
    cloud = read_xyz(a.inp)
    curv = None
    if a.curv:
        table = read_curvature_csv(a.curv)
        if len(table["id"]) != len(cloud):
            raise CurvkitError(f"{a.curv} has {len(table['id'])} rows for {len(cloud)} points")
        curv = select_curvature(a.curvature_kind, table["K"], table["H"], table["k1"], table["k2"])
    if a.mode == "adaptive" and curv is None:
        raise UsageError("adaptive simplification needs --curv")
    params = SimplifyParams(a.T, a.c, a.curvature_kind, a.seed)
    if a.target_size:
        res, T = match_target_size(cloud, a.target_size, curv, params, a.mode)
        log.info("T=%.6g gives %d representatives", T, len(res))
    elif a.mode == "adaptive":
        res = simplify_adaptive(cloud, curv, params)
    else:
        res = simplify_uniform(cloud, a.T, a.seed, curv)
    write_xyz(type(cloud)(res.representatives), a.out)
    if a.member_map:
        write_member_map(res, a.member_map)
    return EXIT_OK


COMMANDS = {
    "sample": _cmd_sample,
    "normals": _cmd_normals,
    "estimate": _cmd_estimate,
    "benchmark": _cmd_benchmark,
    "simplify": _cmd_simplify,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="curvkit: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (CurvkitError, OSError, ValueError) as exc:
        print(f"curvkit: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    finally:
        logging.captureWarnings(False)


if __name__ == "__main__":
    sys.exit(main())
