"""Command-line interface.

Usage::

    ntkspectra [global flags] <command> [config.json] [options]

Commands
--------
sample      draw points from the config density
gram        assemble the Gram matrix (``gram.npy``) and report its size
eigsys      top eigenvalues and eigenvectors of the Gram matrix
modes       analytic eigenfunctions of a piecewise-constant density
train       train a network on the config target and record the trace
predict     kernel-predicted residual curve and convergence time
reproduce   run one catalog experiment (``fig1`` .. ``fig12``, ``custom``)
list        print the experiment catalog

Exit codes: 0 success, 2 config error, 3 numerical fault, 4 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .. import analytic, geometry, kernels, nets, predictor, spectral
from ..errors import BudgetExceeded, ConfigError, NTKSpectraError, NumericalFault
from .catalog import list_experiments
from .config import build_config, load_config
from .figures import RunResult, run
from .results import ResultTable

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_BUDGET = 0, 2, 3, 4


def exit_code_for(exc):
    if isinstance(exc, BudgetExceeded):
        return EXIT_BUDGET
    if isinstance(exc, NumericalFault):
        return EXIT_NUMERICAL
    return EXIT_CONFIG


def _parser():
    ap = argparse.ArgumentParser(prog="ntkspectra", description="NTK spectra under non-uniform densities.")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--out", default=None, help="output directory (default: results)")
    ap.add_argument("--paper-scale", action="store_true", help="use the published sample sizes")
    ap.add_argument("--threads", type=int, default=None, help="worker threads for compiled kernels")
    ap.add_argument("--json", action="store_true", help="also write a JSON mirror of every table")
    ap.add_argument("--quiet", action="store_true", help="suppress progress messages")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("sample", "gram", "eigsys", "modes", "train", "predict"):
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON config file")
    p = sub.add_parser("reproduce")
    p.add_argument("fig_id", help="experiment id, e.g. fig4")
    p.add_argument("config", nargs="?", default=None, help="optional JSON overrides")
    sub.add_parser("list")
    return ap


def _load(args, exp_id=None):
    raw = load_config(args.config) if getattr(args, "config", None) else {}
    if exp_id is not None:
        if raw.get("id", exp_id) != exp_id:
            raise ConfigError("config id %r does not match %r" % (raw["id"], exp_id))
        raw["id"] = exp_id
    raw.setdefault("id", "custom")
    return build_config(raw, seed=args.seed, out=args.out, paper_scale=args.paper_scale)


def _sample(cfg):
    p = cfg.params
    for key in ("density", "n"):
        if key not in p:
            raise ConfigError("missing required field: %s" % key)
    density = geometry.density_from_config(p["density"])
    return density, geometry.sample(density, int(p["n"]), cfg.seed)


def _kernel_spec(p):
    k = p.get("kernel", {"kind": "two_layer"})
    return kernels.KernelSpec(k.get("kind", "two_layer"), int(k.get("depth", 1)))


def cmd_sample(cfg, log):
    _, smp = _sample(cfg)
    if smp.angles is not None:
        t = ResultTable("sample", ["angle", "x", "y", "region", "weight"], units={"angle": "rad"})
        for th, (x, y), r, w in zip(smp.angles, smp.points, smp.regions, smp.weights):
            t.add(th, x, y, int(r), w)
    else:
        t = ResultTable("sample", ["x", "y", "z", "region", "weight"])
        for (x, y, z), r, w in zip(smp.points, smp.regions, smp.weights):
            t.add(x, y, z, int(r), w)
    return RunResult(cfg, [t], {"n": smp.n})


def cmd_gram(cfg, log):
    _, smp = _sample(cfg)
    spec = _kernel_spec(cfg.params)
    H = spectral.assemble_gram(smp.points, spec)
    directory = os.path.join(cfg.out, cfg.id)
    os.makedirs(directory, exist_ok=True)
    np.save(os.path.join(directory, "gram.npy"), H)
    log("gram: wrote %s" % os.path.join(directory, "gram.npy"))
    return RunResult(cfg, [], {"n": smp.n, "kernel": spec.kind, "depth": spec.depth, "bytes": spectral.gram_bytes(smp.n),
                               "trace": float(np.trace(H))})


def cmd_eigsys(cfg, log):
    _, smp = _sample(cfg)
    k = int(cfg.params.get("k", 10))
    sp = spectral.eig_sym(spectral.assemble_gram(smp.points, _kernel_spec(cfg.params)), min(k, smp.n))
    d = smp.d
    t = ResultTable("eigenvalues", ["rank", "frequency", "gram_eigenvalue", "operator_eigenvalue"])
    labels = spectral.frequency_labels(sp.eigenvalues.size, d)
    for i, lam in enumerate(sp.eigenvalues):
        t.add(i, int(labels[i]), lam, lam / sp.n)
    head = ["angle"] if smp.angles is not None else ["x", "y", "z"]
    v = ResultTable("eigenvectors", head + ["v%d" % i for i in range(sp.eigenvalues.size)])
    for i in range(smp.n):
        c = (smp.angles[i],) if smp.angles is not None else tuple(smp.points[i])
        v.add(*c, *sp.eigenvectors[i])
    return RunResult(cfg, [t, v], {"n": smp.n, "k": int(sp.eigenvalues.size)})


def cmd_modes(cfg, log):
    p = cfg.params
    if "density" not in p:
        raise ConfigError("missing required field: density")
    density = geometry.density_from_config(p["density"])
    if not isinstance(density, geometry.PiecewiseDensity1D):
        raise ConfigError("analytic modes need a piecewise-constant density on the circle")
    modes = analytic.periodic_modes(density, int(p.get("k", 10)))
    t = ResultTable("modes", ["index", "q", "s", "lambda", "region", "amplitude", "phase"])
    for i, m in enumerate(modes):
        for q, lam, j, a, ph in m.to_rows():
            t.add(i, q, m.s, lam, j, a, ph)
    return RunResult(cfg, [t], {"Z": analytic.z_const(density), "count": len(modes)})


def _net_and_target(cfg, smp):
    p = cfg.params
    if "target" not in p:
        raise ConfigError("missing required field: target")
    target = geometry.target_from_config(p["target"])
    y = geometry.target_eval(target, smp.angles if smp.angles is not None else smp.points)
    netp = p.get("net", {})
    depth = int(netp.get("depth", 1))
    if depth == 1:
        net = nets.TwoLayerNet.init(smp.d, int(netp.get("width", 1000)), float(netp.get("tau", 1.0)), cfg.seed,
                                    bias_init=netp.get("bias_init", "normal"), paired=bool(netp.get("paired", False)))
    else:
        net = nets.DeepNet.init(smp.d, [int(netp.get("width", 256))] * depth, float(netp.get("tau", 1.0)), cfg.seed,
                                dtype=np.dtype(netp.get("dtype", "float64")))
    return net, y


def _train_config(p):
    tr = dict(p.get("train", {}))
    if "eta" not in tr:
        raise ConfigError("missing required field: train.eta")
    return nets.TrainConfig(eta=float(tr["eta"]), batch=tr.get("batch"), max_iters=int(tr.get("max_iters", 1000)),
                            seed=int(tr.get("seed", 0)), delta=float(tr.get("delta", 0.05)),
                            record_every=int(tr.get("record_every", 1)), loss=tr.get("loss", "sum"),
                            stop_when_converged=bool(tr.get("stop_when_converged", False)),
                            train_first_last=bool(tr.get("train_first_last", True)))


def cmd_train(cfg, log):
    density, smp = _sample(cfg)
    net, y = _net_and_target(cfg, smp)
    tc = _train_config(cfg.params)
    k = int(smp.regions.max()) + 1 if smp.regions.max() >= 0 else 1
    regions = np.maximum(smp.regions, 0)
    tr = nets.train(net, smp.points, y, tc, regions=regions, n_regions=k)
    if tr.diverged:
        raise NumericalFault("training diverged: loss grew past 1e6 times its initial value (eta=%g)" % tc.eta)
    cols = ["iter", "loss"] + ["region_%d_mse" % j for j in range(k)] + ["residual_norm"]
    t = ResultTable("trace", cols)
    for i in range(tr.iterations.size):
        t.add(int(tr.iterations[i]), tr.loss[i], *tr.region_mse[i], tr.residual_norm[i])
    times = nets.region_convergence_time(tr, tc.delta)
    ct = ResultTable("convergence", ["region", "time"], meta={"not_converged": nets.NOT_CONVERGED})
    for j, v in enumerate(times):
        ct.add(j, int(v))
    directory = os.path.join(cfg.out, cfg.id)
    os.makedirs(directory, exist_ok=True)
    nets.save_checkpoint(os.path.join(directory, "net.bin"), net)
    return RunResult(cfg, [t, ct], {"final_loss": float(tr.loss[-1]), "stopped_early": tr.stopped_early})


def cmd_predict(cfg, log):
    _, smp = _sample(cfg)
    p = cfg.params
    target = geometry.target_from_config(p["target"]) if "target" in p else None
    if target is None:
        raise ConfigError("missing required field: target")
    y = geometry.target_eval(target, smp.angles if smp.angles is not None else smp.points)
    tc = _train_config(p)
    sp = spectral.eig_sym(spectral.assemble_gram(smp.points, _kernel_spec(p)))
    eta = tc.eta / smp.n if tc.loss == "mean" else tc.eta
    ts = np.arange(0, tc.max_iters + 1, tc.record_every)
    res = predictor.predict_residual(sp, y, eta, ts)
    t = ResultTable("prediction", ["t", "predicted_residual"])
    for a, b in zip(ts, np.atleast_1d(res)):
        t.add(int(a), b)
    thr = float(np.sqrt(2 * tc.delta))
    pt = predictor.predicted_time(sp, y, eta, thr)
    return RunResult(cfg, [t], {"predicted_time": pt, "threshold": thr})


COMMANDS = {"sample": cmd_sample, "gram": cmd_gram, "eigsys": cmd_eigsys, "modes": cmd_modes,
            "train": cmd_train, "predict": cmd_predict}


def _print_list(as_json):
    rows = list_experiments()
    if as_json:
        print(json.dumps(rows, indent=1))
        return
    for r in rows:
        print("%-7s %-10s ~%5ds %6d MB  criteria %-8s %s" % (
            r["id"], r["figure"], r["runtime_s"], r["memory_mb"], ",".join(map(str, r["criteria"])), r["title"]))
        print("        setup: %s" % r["setup"])


def main(argv=None):
    args = _parser().parse_args(argv)
    log = (lambda msg: None) if args.quiet else (lambda msg: print(msg, file=sys.stderr, flush=True))
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be at least 1")
            import numba

            # prefer layers that need no extra runtime library
            numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        if args.command == "list":
            _print_list(args.json)
            return EXIT_OK
        if args.command == "reproduce":
            cfg = _load(args, args.fig_id)
            result = run(cfg, log)
        else:
            cfg = _load(args)
            result = COMMANDS[args.command](cfg, log)
        paths = result.write(as_json=args.json)
        for key in sorted(result.summary):
            print("%s: %s" % (key, result.summary[key]))
        for path in paths:
            log("wrote %s" % path)
        return EXIT_OK
    except NTKSpectraError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
