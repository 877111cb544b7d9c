"""Command-line entry points for synthesis, pairs, degradation, metrics,
theory checks and synthetic guides.

Every subcommand accepts --config (JSON), --seed, --out and --jobs plus
dotted per-field overrides such as --optim.iterations 50 or
--retrieval.keep 8.  Outputs are reproducible byte-for-byte from
(inputs, config, seed): manifests are sorted JSON without timestamps,
child seeds derive from the global seed by stable integer paths, and
worker threads never share mutable state.  Exit status is 0 only when
every invariant check of the run passed.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
from dataclasses import replace

import numpy as np
import torch

from .config import PipelineConfig
from .core import HyperCube, RgbImage, load_cube, load_rgb, project_rgb, save_cube, save_rgb
from .degrade import DegradationSpec, apply_degradation, build_pairs
from .metrics import evaluate
from .pipeline import draw_guide, synthesize
from .seeding import child_seed
from .theory import (
    DiscreteDist,
    LinearDegradation,
    PairAtom,
    check_mixture_coverage,
    check_pair_perturbation,
    wasserstein1,
)
from .transport import SparseWarp, load_warp, save_warp, verify_operator

SLACK_TOL = -1e-9

# Stage tags for child-seed derivation.
_STAGE_GUIDE = 0
_STAGE_VERIFY = 1
_STAGE_DEGRADE = 2
_STAGE_THEORY = 3


def _write_json(payload: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_overrides(extras: list[str]) -> dict[str, str]:
    """Parse leftover args of the form --a.b value or --a.b=value."""
    overrides: dict[str, str] = {}
    i = 0
    while i < len(extras):
        token = extras[i]
        if not token.startswith("--"):
            raise SystemExit(f"unrecognized argument {token!r}")
        body = token[2:]
        if "=" in body:
            key, value = body.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extras):
                raise SystemExit(f"override {token!r} is missing a value")
            key, value = body, extras[i + 1]
            i += 2
        overrides[key] = value
    return overrides


def _load_config(args: argparse.Namespace, extras: list[str]) -> PipelineConfig:
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    direct: dict[str, str] = {}
    if getattr(args, "seed", None) is not None:
        direct["seed"] = str(args.seed)
    if getattr(args, "out", None) is not None:
        direct["out_dir"] = args.out
    if getattr(args, "jobs", None) is not None:
        direct["jobs"] = str(args.jobs)
    config = config.apply_overrides(direct)
    return config.apply_overrides(_parse_overrides(extras))


def _synth_one(
    index_pair: tuple[int, int],
    proxy: HyperCube,
    guide: RgbImage,
    config: PipelineConfig,
    out_dir: str,
    guide_info: dict | None,
) -> dict:
    i, j = index_pair
    cube_path = os.path.join(out_dir, f"synth_{i}_{j}.hsic")
    warp_path = os.path.join(out_dir, f"warp_{i}_{j}.swrp")
    trace_path = os.path.join(out_dir, f"trace_{i}_{j}.csv")
    verify_seed = child_seed(config.seed, _STAGE_VERIFY, i, j)
    result = synthesize(proxy, guide, config, verify_seed=verify_seed)
    save_cube(result.cube, cube_path)
    save_warp(result.composite, warp_path)
    result.trace.to_csv(trace_path)
    row = {
        "proxy_index": i,
        "guide_index": j,
        "status": "ok",
        "cube": os.path.basename(cube_path),
        "operator": os.path.basename(warp_path),
        "trace": os.path.basename(trace_path),
        "verify_seed": verify_seed,
        "verify": result.report.to_dict(),
        "final_loss": {"total": result.final_loss.total, **result.final_loss.terms},
        "clamped": result.cube.clamped,
    }
    if guide_info is not None:
        row["guide_draw"] = guide_info
    return row


def cmd_synth(args: argparse.Namespace, extras: list[str]) -> int:
    config = _load_config(args, extras)
    if args.proxy:
        config = replace(config, proxies=tuple(args.proxy))
    if args.guide:
        config = replace(config, guides=tuple(args.guide))
    if not config.proxies:
        raise SystemExit("synth needs at least one proxy cube (--proxy or config)")
    os.makedirs(config.out_dir, exist_ok=True)
    proxies = [load_cube(path) for path in config.proxies]
    tasks = []
    for i, proxy in enumerate(proxies):
        if config.guides:
            guide_images = [(load_rgb(path), None) for path in config.guides]
        else:
            guide_images = []
            proxy_rgb = project_rgb(proxy)
            for j in range(config.guides_per_proxy):
                seed = child_seed(config.seed, _STAGE_GUIDE, i, j)
                guide, _, drawn = draw_guide(proxy_rgb, config.guide, seed)
                guide_images.append((guide, drawn))
        for j, (guide, drawn) in enumerate(guide_images):
            tasks.append(((i, j), proxy, guide, drawn))
    rows = []
    failures = 0

    def run(task) -> dict:
        (i, j), proxy, guide, drawn = task
        try:
            return _synth_one((i, j), proxy, guide, config, config.out_dir, drawn)
        except Exception as exc:  # noqa: BLE001 - isolate per-pair failures
            return {"proxy_index": i, "guide_index": j, "status": "error", "error": str(exc)}

    if config.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(pool.map(run, tasks))
    else:
        rows = [run(task) for task in tasks]
    rows.sort(key=lambda r: (r["proxy_index"], r["guide_index"]))
    for row in rows:
        if row["status"] != "ok" or not row["verify"]["passed"]:
            failures += 1
    manifest = {
        "command": "synth",
        "config": config.to_json(),
        "results": rows,
        "failures": failures,
    }
    _write_json(manifest, os.path.join(config.out_dir, "manifest.json"))
    for row in rows:
        status = row["status"]
        print(f"synth proxy {row['proxy_index']} guide {row['guide_index']}: {status}")
        if status == "error":
            print(f"  error: {row['error']}")
    return 0 if failures == 0 else 1


def cmd_guide(args: argparse.Namespace, extras: list[str]) -> int:
    config = _load_config(args, extras)
    proxy = load_cube(args.proxy)
    proxy_rgb = project_rgb(proxy)
    os.makedirs(config.out_dir, exist_ok=True)
    seed = child_seed(config.seed, _STAGE_GUIDE, 0, 0)
    guide, correspondence, drawn = draw_guide(proxy_rgb, config.guide, seed)
    guide_path = os.path.join(config.out_dir, "guide.png")
    # .npy rather than .npz: the zip wrapper stamps timestamps into its
    # member headers, which would break byte-identical reruns
    corr_path = os.path.join(config.out_dir, "correspondence.npy")
    save_rgb(guide, guide_path, bit_depth=16)
    np.save(corr_path, correspondence)
    manifest = {
        "command": "guide",
        "proxy": os.path.basename(args.proxy),
        "guide": os.path.basename(guide_path),
        "correspondence": os.path.basename(corr_path),
        "draw": drawn,
        "config": config.to_json(),
    }
    _write_json(manifest, os.path.join(config.out_dir, "guide_manifest.json"))
    print(f"guide written to {guide_path}")
    return 0


def cmd_degrade(args: argparse.Namespace, extras: list[str]) -> int:
    config = _load_config(args, extras)
    spec = config.degradation
    if args.kind:
        spec = replace(spec, kind=args.kind)
    spec = replace(spec, seed=child_seed(config.seed, _STAGE_DEGRADE, 0))
    os.makedirs(config.out_dir, exist_ok=True)
    rows = []
    failures = 0
    for index, path in enumerate(args.cube):
        out_path = os.path.join(config.out_dir, f"degraded_{index}.hsic")
        try:
            cube = load_cube(path)
            file_spec = replace(spec, seed=child_seed(config.seed, _STAGE_DEGRADE, 1, index))
            degraded = apply_degradation(cube, file_spec)
            save_cube(degraded, out_path)
            rows.append(
                {
                    "input": os.path.basename(path),
                    "output": os.path.basename(out_path),
                    "seed": file_spec.seed,
                    "clamped": degraded.clamped,
                    "status": "ok",
                }
            )
        except Exception as exc:  # noqa: BLE001 - per-file isolation
            failures += 1
            rows.append({"input": os.path.basename(path), "status": "error", "error": str(exc)})
    manifest = {
        "command": "degrade",
        "spec": spec.to_json(),
        "results": rows,
        "failures": failures,
    }
    _write_json(manifest, os.path.join(config.out_dir, "degrade_manifest.json"))
    for row in rows:
        print(f"degrade {row['input']}: {row['status']}")
    return 0 if failures == 0 else 1


def cmd_pairs(args: argparse.Namespace, extras: list[str]) -> int:
    config = _load_config(args, extras)
    with open(args.synth_manifest, "r", encoding="utf-8") as fh:
        synth_manifest = json.load(fh)
    synth_dir = os.path.dirname(os.path.abspath(args.synth_manifest))
    synth_config = PipelineConfig.from_json(synth_manifest["config"])
    proxies = [load_cube(path) for path in synth_config.proxies]
    groups: list[list[HyperCube]] = [[] for _ in proxies]
    for row in synth_manifest["results"]:
        if row["status"] != "ok":
            continue
        groups[row["proxy_index"]].append(load_cube(os.path.join(synth_dir, row["cube"])))
    spec = replace(config.degradation, seed=config.seed)
    if args.kind:
        spec = replace(spec, kind=args.kind)
    pair_set = build_pairs(proxies, groups, spec, ratio=config.ratio)
    os.makedirs(config.out_dir, exist_ok=True)
    rows = []
    for index, record in enumerate(pair_set.pairs):
        degraded_path = os.path.join(config.out_dir, f"pair_{index}_degraded.hsic")
        clean_path = os.path.join(config.out_dir, f"pair_{index}_clean.hsic")
        save_cube(record.degraded, degraded_path)
        save_cube(record.clean, clean_path)
        rows.append(
            {
                "index": index,
                "degraded": os.path.basename(degraded_path),
                "clean": os.path.basename(clean_path),
                "provenance": record.provenance,
                "proxy_index": record.proxy_index,
                "guide_index": record.guide_index,
                "seed": record.seed,
            }
        )
    verified = pair_set.verify()
    proxy_count, generated_count = pair_set.counts()
    manifest = {
        "command": "pairs",
        "spec": spec.to_json(),
        "ratio": pair_set.ratio,
        "counts": {"proxy": proxy_count, "generated": generated_count},
        "pairs": rows,
        "reproduction_check": verified,
    }
    _write_json(manifest, os.path.join(config.out_dir, "pairs_manifest.json"))
    print(f"pairs: {len(rows)} written ({proxy_count} proxy, {generated_count} generated)")
    return 0 if verified else 1


def cmd_metrics(args: argparse.Namespace, extras: list[str]) -> int:
    config = _load_config(args, extras)
    if len(args.ref) != len(args.test):
        raise SystemExit(f"{len(args.ref)} reference cubes but {len(args.test)} test cubes")
    rows = []
    for ref_path, test_path in zip(args.ref, args.test):
        report = evaluate(load_cube(ref_path), load_cube(test_path))
        row = {
            "reference": os.path.basename(ref_path),
            "test": os.path.basename(test_path),
            **report.to_json(),
        }
        rows.append(row)
    payload = {"command": "metrics", "results": rows}
    if args.out:
        os.makedirs(config.out_dir, exist_ok=True)
        _write_json(payload, os.path.join(config.out_dir, "metrics.json"))
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _random_dist(rng: np.random.Generator, atoms: int, shape: tuple[int, int]) -> DiscreteDist:
    return DiscreteDist.uniform(
        [PairAtom(x=rng.random(shape), y=rng.random(shape)) for _ in range(atoms)]
    )


def _random_operator(rng: np.random.Generator, n: int) -> SparseWarp:
    import scipy.sparse as sp

    support = 4
    rows = np.repeat(np.arange(n), support)
    cols = rng.integers(0, n, size=n * support)
    weights = rng.random(n * support) + 1e-3
    matrix = sp.coo_matrix((weights, (rows, cols)), shape=(n, n)).tocsr()
    sums = np.asarray(matrix.sum(axis=1)).reshape(-1)
    matrix = sp.diags(1.0 / sums) @ matrix
    return SparseWarp(matrix=matrix.tocsr(), k_limit=support, stencil=1)


def cmd_theory(args: argparse.Namespace, extras: list[str]) -> int:
    config = _load_config(args, extras)
    rng = np.random.default_rng(child_seed(config.seed, _STAGE_THEORY))
    trials = args.trials
    shape = (3, 2)
    coverage_min = np.inf
    for _ in range(trials):
        atoms = int(rng.integers(2, 6))
        reports = check_mixture_coverage(
            _random_dist(rng, atoms, shape),
            _random_dist(rng, atoms, shape),
            _random_dist(rng, atoms, shape),
            _random_dist(rng, atoms, shape),
            alphas=(0.0, 0.25, 0.5, 0.75, 1.0),
        )
        coverage_min = min(coverage_min, min(r.slack for r in reports))
    perturb_min = np.inf
    n = 12
    for _ in range(trials):
        warp = _random_operator(rng, n)
        samples = [rng.random((n, 3)) for _ in range(4)]
        errors = [0.1 * rng.standard_normal((n, 3)) for _ in range(4)]
        reports = check_pair_perturbation(
            samples,
            errors,
            LinearDegradation.scaling(float(rng.uniform(0.5, 2.0))),
            warp,
        )
        perturb_min = min(perturb_min, min(r.slack for r in reports))
    oracle_max = 0.0
    for _ in range(trials):
        p = _random_dist(rng, 4, shape)
        q = _random_dist(rng, 4, shape)
        from scipy.optimize import linear_sum_assignment

        cost = np.array([[float(np.linalg.norm(a.x - b.x) + np.linalg.norm(a.y - b.y)) for b in q.atoms] for a in p.atoms])
        r_idx, c_idx = linear_sum_assignment(cost)
        hungarian = float(cost[r_idx, c_idx].sum()) / 4.0
        oracle_max = max(oracle_max, abs(wasserstein1(p, q) - hungarian))
    checks = [
        ("mixture_coverage", coverage_min >= SLACK_TOL, f"min slack {coverage_min:.3e}"),
        ("pair_perturbation", perturb_min >= SLACK_TOL, f"min slack {perturb_min:.3e}"),
        ("assignment_oracle", oracle_max <= 1e-9, f"max |diff| {oracle_max:.3e}"),
    ]
    print(f"{'lemma':<24} {'status':<8} detail")
    status = 0
    for name, ok, detail in checks:
        print(f"{name:<24} {'pass' if ok else 'FAIL':<8} {detail}")
        if not ok:
            status = 1
    return status


def cmd_verify(args: argparse.Namespace, extras: list[str]) -> int:
    warp = load_warp(args.operator)
    report = verify_operator(warp, seed=args.probe_seed)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0 if report.passed else 1


def main(argv: list[str] | None = None) -> int:
    torch.set_num_threads(1)
    parser = argparse.ArgumentParser(
        prog="specwarp",
        description="Hyperspectral data synthesis via sparse stochastic warping.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON pipeline config")
        p.add_argument("--seed", type=int, help="global seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--jobs", type=int, help="parallel worker limit")

    p_synth = sub.add_parser("synth", help="synthesize guide-aligned cubes")
    common(p_synth)
    p_synth.add_argument("--proxy", action="append", help="proxy cube path (repeatable)")
    p_synth.add_argument("--guide", action="append", help="guide image path (repeatable)")
    p_synth.set_defaults(fn=cmd_synth)

    p_guide = sub.add_parser("guide", help="render a synthetic guide view")
    common(p_guide)
    p_guide.add_argument("--proxy", required=True, help="proxy cube path")
    p_guide.set_defaults(fn=cmd_guide)

    p_degrade = sub.add_parser("degrade", help="apply a degradation operator")
    common(p_degrade)
    p_degrade.add_argument("--cube", action="append", required=True, help="input cube (repeatable)")
    p_degrade.add_argument("--kind", help="degradation kind")
    p_degrade.set_defaults(fn=cmd_degrade)

    p_pairs = sub.add_parser("pairs", help="export aligned degraded/clean pairs")
    common(p_pairs)
    p_pairs.add_argument("--synth-manifest", required=True, help="manifest from synth")
    p_pairs.add_argument("--kind", help="degradation kind")
    p_pairs.set_defaults(fn=cmd_pairs)

    p_metrics = sub.add_parser("metrics", help="evaluate cube fidelity metrics")
    common(p_metrics)
    p_metrics.add_argument("--ref", action="append", required=True, help="reference cube (repeatable)")
    p_metrics.add_argument("--test", action="append", required=True, help="test cube (repeatable)")
    p_metrics.set_defaults(fn=cmd_metrics)

    p_theory = sub.add_parser("theory", help="run randomized inequality checks")
    common(p_theory)
    p_theory.add_argument("--trials", type=int, default=25, help="trials per lemma")
    p_theory.set_defaults(fn=cmd_theory)

    p_verify = sub.add_parser("verify", help="re-check a saved operator file")
    common(p_verify)
    p_verify.add_argument("--operator", required=True, help="operator container path")
    p_verify.add_argument("--probe-seed", type=int, default=0, help="probe cube seed")
    p_verify.set_defaults(fn=cmd_verify)

    args, extras = parser.parse_known_args(argv)
    return args.fn(args, extras)


if __name__ == "__main__":
    sys.exit(main())
