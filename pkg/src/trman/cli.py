"""Command-line harness: instance generation, single completion runs, and
(n, |omega|) phase sweeps.

Subcommands::

    trman generate  --mode tr|utr --dims N,... --rank R[,R,...] --rate P | --samples M
                    --seed S --out DIR
    trman complete  --in DIR [--out DIR] --optimizer rgd|rcg --beta pr+|fr|none ...
    trman phase     --mode tr|utr [--truth-mode tr|utr] --n-grid ... --omega-grid ...
                    --rank R --trials T --seed S --out DIR

Exit codes: 0 success, 2 argument error, 3 input parse error, 4 optimizer
line-search failure. ``TRMAN_THREADS`` caps the phase-sweep worker pool.

The success threshold, Armijo schedule, and stopping rules are
configurable defaults of this tool; they are printed in ``--help`` and
recorded in the output manifests so runs are self-describing.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import completion, kernels, optim, tensor, tr
from .errors import ParseError

CORES_FILE = "truth_cores.txt"
SAMPLES_FILE = "samples.txt"
MANIFEST_FILE = "manifest.json"

# Above this edge length the recovery error is measured on a holdout sample
# instead of the materialized full tensor.
FULL_ERROR_MAX_EDGE = 150
DEFAULT_HOLDOUT = 2000


def _parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ValueError(f"expected comma-separated integers, got {text!r}")


def _parse_grid(text: str) -> list[int]:
    """Comma list ``a,b,c`` or inclusive range ``lo:hi:step``."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range grid must be lo:hi:step, got {text!r}")
        lo, hi, step = (int(p) for p in parts)
        if step <= 0 or hi < lo:
            raise ValueError(f"bad range grid {text!r}")
        return list(range(lo, hi + 1, step))
    return list(_parse_ints(text))


def _normalize_rank(mode: str, rank: tuple[int, ...], d: int):
    if mode == "utr":
        if len(set(rank)) != 1:
            raise ValueError(f"uniform mode needs a single rank, got {rank}")
        return int(rank[0])
    if len(rank) == 1:
        return rank * d
    if len(rank) != d:
        raise ValueError(f"need {d} ranks (or one to broadcast), got {rank}")
    return rank


_BETA_NAMES = {"pr+": "polak_ribiere_plus", "fr": "fletcher_reeves", "none": "none"}


def _build_config(args) -> optim.OptimConfig:
    return optim.OptimConfig(
        max_iters=args.max_iters,
        grad_tol=args.grad_tol,
        beta_rule=_BETA_NAMES[args.beta],
        seed=args.seed,
        lam=getattr(args, "lam", 0.0),
    )


def _random_truth(mode, dims, rank, rng):
    if mode == "utr":
        core = rng.random((rank, dims[0], rank))
        return tr.UtrCore(core, len(dims))
    cores = [
        rng.random((rank[k], dims[k], rank[(k + 1) % len(dims)]))
        for k in range(len(dims))
    ]
    return tr.TrCores(cores)


def _scaled_random_init(mode, dims, rank, rng, samples: completion.SampleSet):
    """Uniform random cores rescaled so the sampled values match the
    observations in RMS."""
    d = len(dims)
    u = _random_truth(mode, dims, rank, rng)
    vals = kernels.sampled_values(u.pack(), samples.indices)
    rms_init = float(np.sqrt(np.mean(vals**2))) if len(vals) else 0.0
    rms_obs = float(np.sqrt(np.mean(samples.values**2))) if len(samples) else 0.0
    if rms_init > 0 and rms_obs > 0:
        c = (rms_obs / rms_init) ** (1.0 / d)
        if mode == "utr":
            return tr.UtrCore(c * u.core, u.order)
        return tr.TrCores([c * x for x in u.cores])
    return u


def _recovery_error(u, truth, rng):
    """Relative recovery error: full tensor below the dense cap, otherwise
    a seeded holdout sample. Returns (error, metric_name)."""
    dims = truth.dims
    if max(dims) < FULL_ERROR_MAX_EDGE:
        full = tr.utr_full(truth) if isinstance(truth, tr.UtrCore) else tr.tr_full(truth)
        return completion.relative_error(u, full), "full"
    total = int(np.prod(np.asarray(dims, dtype=np.int64)))
    count = min(DEFAULT_HOLDOUT * 5, total)
    idx = completion.SampleSet.random_indices(dims, count, rng)
    ref = completion.SampleSet.from_cores(truth, idx)
    return completion.relative_error(u, ref), "holdout"


def cmd_generate(args) -> int:
    dims = _parse_ints(args.dims)
    if args.mode == "utr" and len(set(dims)) != 1:
        raise ValueError(f"uniform mode needs equal extents, got {dims}")
    rank = _normalize_rank(args.mode, _parse_ints(args.rank), len(dims))
    total = int(np.prod(np.asarray(dims, dtype=np.int64)))
    if args.samples is not None:
        count = args.samples
    else:
        count = int(round(args.rate * total))
    if not 0 < count <= total:
        raise ValueError(f"sample count {count} outside 1..{total}")
    os.makedirs(args.out, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    truth = _random_truth(args.mode, dims, rank, rng)
    idx = completion.SampleSet.random_indices(dims, count, rng)
    samples = completion.SampleSet.from_cores(truth, idx)
    cores_path = os.path.join(args.out, CORES_FILE)
    samples_path = os.path.join(args.out, SAMPLES_FILE)
    if args.mode == "utr":
        tr.write_tr_cores(cores_path, tr.TrCores([truth.core]))
    else:
        tr.write_tr_cores(cores_path, truth)
    completion.write_samples(samples_path, samples)
    if args.emit_dense:
        full = tr.utr_full(truth) if args.mode == "utr" else tr.tr_full(truth)
        tensor.write_coord_tensor(os.path.join(args.out, "truth_dense.txt"), full)
    manifest = {
        "kind": "generate",
        "mode": args.mode,
        "dims": list(dims),
        "rank": rank if args.mode == "utr" else list(rank),
        "seed": args.seed,
        "dist": "uniform",
        "sample_count": count,
        "sampling_rate": args.rate,
        "cores_file": CORES_FILE,
        "samples_file": SAMPLES_FILE,
    }
    with open(os.path.join(args.out, MANIFEST_FILE), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {cores_path}, {samples_path} ({count} samples)")
    return 0


def _load_instance(in_dir):
    manifest_path = os.path.join(in_dir, MANIFEST_FILE)
    try:
        with open(manifest_path) as f:
            manifest = json.load(f)
    except FileNotFoundError:
        raise ValueError(f"no manifest at {manifest_path}; run generate first")
    except json.JSONDecodeError as e:
        raise ParseError(str(e), manifest_path)
    samples = completion.read_samples(os.path.join(in_dir, manifest["samples_file"]))
    truth = None
    cores_path = os.path.join(in_dir, manifest.get("cores_file", ""))
    if manifest.get("cores_file") and os.path.exists(cores_path):
        loaded = tr.read_tr_cores(cores_path)
        if manifest["mode"] == "utr":
            truth = tr.UtrCore(loaded.cores[0], len(manifest["dims"]))
        else:
            truth = loaded
    return manifest, samples, truth


def cmd_complete(args) -> int:
    manifest, samples, truth = _load_instance(args.in_dir)
    mode = manifest["mode"]
    dims = tuple(manifest["dims"])
    rank = manifest["rank"]
    rank = rank if mode == "utr" else tuple(rank)
    out_dir = args.out or args.in_dir
    os.makedirs(out_dir, exist_ok=True)

    holdout = None
    if truth is not None and args.holdout_count > 0:
        rng = np.random.default_rng(np.random.SeedSequence((args.seed, 7)))
        total = int(np.prod(np.asarray(dims, dtype=np.int64)))
        want = min(args.holdout_count, total - len(samples))
        if want > 0:
            idx = completion.SampleSet.disjoint_random_indices(
                dims, want, samples.linear_offsets(), rng
            )
            holdout = completion.SampleSet.from_cores(truth, idx)

    problem = completion.CompletionProblem(dims, rank, samples, holdout, args.lam)
    cfg = _build_config(args)
    if args.init_cores:
        loaded = tr.read_tr_cores(args.init_cores)
        if mode == "utr":
            u0 = tr.UtrCore(loaded.cores[0], len(dims))
        else:
            u0 = loaded
    else:
        rng = np.random.default_rng(np.random.SeedSequence((args.seed, 1)))
        u0 = _scaled_random_init(mode, dims, rank, rng, samples)

    t0 = time.perf_counter()
    solver = optim.rcg if args.optimizer == "rcg" else optim.rgd
    u_final, trace = solver(u0, problem, cfg)
    elapsed = time.perf_counter() - t0

    trace_path = os.path.join(out_dir, "trace.csv")
    trace.write_csv(trace_path)
    rec_path = os.path.join(out_dir, "recovered_cores.txt")
    if mode == "utr":
        tr.write_tr_cores(rec_path, tr.TrCores([u_final.core]))
    else:
        tr.write_tr_cores(rec_path, u_final)

    recovery = None
    metric = "none"
    if truth is not None:
        err_rng = np.random.default_rng(np.random.SeedSequence((args.seed, 9)))
        recovery, metric = _recovery_error(u_final, truth, err_rng)
    result = {
        "status": trace.metadata["status"],
        "iterations": trace.iters[-1],
        "final_objective": trace.objectives[-1],
        "final_grad_norm": trace.grad_norms[-1],
        "train_rel_err": trace.train_rel_errs[-1],
        "recovery_rel_err": recovery,
        "recovery_metric": metric,
        "success": None if recovery is None else bool(recovery <= args.success_tol),
        "success_tol": args.success_tol,
        "optimizer": args.optimizer,
        "beta": args.beta,
        "lam": args.lam,
        "seed": args.seed,
        "backend": kernels.backend_name(),
        "elapsed_s": elapsed,
        "injective_start": trace.metadata["injective_start"],
        "injective_end": trace.metadata["injective_end"],
    }
    with open(os.path.join(out_dir, "result.json"), "w") as f:
        json.dump(result, f, indent=2, sort_keys=True)
        f.write("\n")
    print(
        f"{args.optimizer}: status={result['status']} iters={result['iterations']} "
        f"train={result['train_rel_err']:.3e}"
        + ("" if recovery is None else f" recovery={recovery:.3e} ({metric})")
    )
    if trace.metadata["status"] == "linesearch_failure":
        return 4
    return 0


def _phase_cell(args, truth_mode, base_rank, n, omega, cell_index, cfg):
    """Run one grid cell; returns (success_rate, mean_err, mean_iters, mean_time)."""
    dims = (n, n, n)
    truth_rank = _normalize_rank(truth_mode, base_rank, 3)
    solve_rank = _normalize_rank(args.mode, base_rank, 3)
    solver = optim.rcg if args.optimizer == "rcg" else optim.rgd
    errs = []
    iters = []
    times = []
    successes = 0
    for trial in range(args.trials):
        rng = np.random.default_rng(np.random.SeedSequence((args.seed + cell_index, trial)))
        truth = _random_truth(truth_mode, dims, truth_rank, rng)
        idx = completion.SampleSet.random_indices(dims, omega, rng)
        samples = completion.SampleSet.from_cores(truth, idx)
        u0 = _scaled_random_init(args.mode, dims, solve_rank, rng, samples)
        problem = completion.CompletionProblem(dims, solve_rank, samples, None, cfg.lam)
        t0 = time.perf_counter()
        u_final, trace = solver(u0, problem, cfg)
        times.append(time.perf_counter() - t0)
        err, _ = _recovery_error(u_final, truth, rng)
        errs.append(err)
        iters.append(trace.iters[-1])
        if err <= args.success_tol:
            successes += 1
    return (
        successes / args.trials,
        float(np.mean(errs)),
        float(np.mean(iters)),
        float(np.mean(times)),
    )


def cmd_phase(args) -> int:
    ns = _parse_grid(args.n_grid)
    omegas = _parse_grid(args.omega_grid)
    if not ns or not omegas:
        raise ValueError("empty grid")
    if args.trials < 1:
        raise ValueError("trials must be >= 1")
    for n in ns:
        total = n**3
        for omega in omegas:
            if not 0 < omega <= total:
                raise ValueError(f"|omega|={omega} outside 1..{total} for n={n}")
    truth_mode = args.truth_mode or args.mode
    base_rank = _parse_ints(args.rank)
    os.makedirs(args.out, exist_ok=True)
    cfg = _build_config(args)
    workers = max(1, int(os.environ.get("TRMAN_THREADS", "1")))

    cells = [(i_n, i_o, n, o) for i_n, n in enumerate(ns) for i_o, o in enumerate(omegas)]

    def run(cell):
        i_n, i_o, n, omega = cell
        cell_index = i_n * len(omegas) + i_o
        return _phase_cell(args, truth_mode, base_rank, n, omega, cell_index, cfg)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(c) for c in cells]

    csv_path = os.path.join(args.out, "phase.csv")
    with open(csv_path, "w") as f:
        f.write("n,omega,success_rate,mean_final_err,mean_iters,mean_time_s\n")
        for cell, (rate, err, iters, secs) in zip(cells, results):
            _, _, n, omega = cell
            f.write(f"{n},{omega},{rate:.17g},{err:.17g},{iters:.17g},{secs:.6f}\n")
    manifest = {
        "kind": "phase",
        "mode": args.mode,
        "truth_mode": truth_mode,
        "rank": list(base_rank),
        "n_grid": ns,
        "omega_grid": omegas,
        "trials": args.trials,
        "seed": args.seed,
        "optimizer": args.optimizer,
        "beta": args.beta,
        "max_iters": args.max_iters,
        "grad_tol": args.grad_tol,
        "success_tol": args.success_tol,
        "lam": args.lam,
        "backend": kernels.backend_name(),
    }
    with open(os.path.join(args.out, "phase_manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {csv_path} ({len(cells)} cells x {args.trials} trials)")
    return 0


def _add_optim_flags(p):
    p.add_argument("--optimizer", choices=("rgd", "rcg"), default="rcg")
    p.add_argument("--beta", choices=tuple(_BETA_NAMES), default="pr+",
                   help="CG parameter rule (default pr+)")
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--grad-tol", type=float, default=1e-8,
                   help="stop when ||g|| / max(1, ||g0||) falls below this")
    p.add_argument("--success-tol", type=float, default=1e-4,
                   help="relative recovery error counted as success (our default)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0,
                   help="ridge weight on the cores (0 = plain misfit)")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trman",
        description="Tensor ring completion harness on the quotient geometry.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic ground truth and sample set")
    g.add_argument("--mode", choices=("tr", "utr"), default="tr")
    g.add_argument("--dims", required=True, help="comma-separated extents, e.g. 30,30,30")
    g.add_argument("--rank", required=True, help="ring ranks (one value broadcasts)")
    pick = g.add_mutually_exclusive_group(required=True)
    pick.add_argument("--rate", type=float, help="sampling rate in (0, 1]")
    pick.add_argument("--samples", type=int, help="absolute sample count")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--emit-dense", action="store_true",
                   help="also write the full tensor in coordinate text form")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("complete", help="run one completion on a generated instance")
    c.add_argument("--in", dest="in_dir", required=True, help="directory from generate")
    c.add_argument("--out", default=None, help="output directory (default: --in)")
    c.add_argument("--init-cores", default=None, help="cores file to start from")
    c.add_argument("--holdout-count", type=int, default=DEFAULT_HOLDOUT,
                   help="held-out entries used for the per-iteration error column")
    _add_optim_flags(c)
    c.set_defaults(func=cmd_complete)

    ph = sub.add_parser("phase", help="sweep (n, |omega|) cells of cubic third-order instances")
    ph.add_argument("--mode", choices=("tr", "utr"), default="tr",
                    help="solver parametrization")
    ph.add_argument("--truth-mode", choices=("tr", "utr"), default=None,
                    help="ground-truth family (default: same as --mode)")
    ph.add_argument("--rank", default="2", help="ring rank (one value broadcasts)")
    ph.add_argument("--n-grid", required=True, help="e.g. 20,30,40 or 20:40:10")
    ph.add_argument("--omega-grid", required=True, help="e.g. 500:8000:500")
    ph.add_argument("--trials", type=int, default=5)
    _add_optim_flags(ph)
    ph.add_argument("--out", required=True)
    ph.set_defaults(func=cmd_phase)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
