"""Command-line experiment runner.

Every subcommand takes ``--seed``, ``--threads``, ``--out-dir`` and
``--config``. A config file is INI: keys in ``[common]`` apply to every
subcommand, keys in a section named after the subcommand (e.g.
``[depth-test]``) apply to it alone; key names are the long flag names
without the dashes prefix (``circuits-per-depth = 500``). Flags given on the
command line override the file.
"""
import argparse
import configparser
import csv
import json
import os
import subprocess
import sys

import numpy as np

from . import __version__
from .circuits import brickwork, circuit_from_json, circuit_to_json, sample_circuit
from .errors import CalibrationError, InvalidArgument, ResourceLimitError, RqcError
from .linalg import matrix_to_pairs
from .metrics import EpsNet, build_eps_net, d_otimes, lipschitz_transfer_check
from .mixing import MixingBoundConfig, estimate_c_k, fixed_subspace
from .rng import RngStream
from .simulator import Oracle, OracleConfig

EXIT_USAGE = 2
EXIT_RESOURCE = 3
EXIT_CALIBRATION = 4
EXIT_OTHER = 1


class MissingFile(RqcError):
    pass


def version_string():
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "describe", "--tags", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def int_list(text):
    """'1-5' or '0,2,4' -> list of ints."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def float_list(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _need_file(path, what):
    if path is None:
        raise InvalidArgument(f"a {what} file is required")
    if not os.path.isfile(path):
        raise MissingFile(f"{what} file not found: {path}")
    return path


def _write_json(args, name, doc):
    os.makedirs(args.out_dir, exist_ok=True)
    doc = {"metadata": {"seed": args.seed, "version": version_string(), "command": args.command},
           **doc}
    path = os.path.join(args.out_dir, name)
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True, default=_jsonable)
        f.write("\n")
    return path


def _write_text(args, name, text):
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, name)
    with open(path, "w") as f:
        f.write(text)
    return path


def _write_csv(args, name, rows, fields):
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, name)
    with open(path, "w", newline="") as f:
        f.write(f"# seed={args.seed} version={version_string()}\n")
        w = csv.DictWriter(f, fields, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
    return path


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _oracle_config(args):
    return OracleConfig(mode=args.mode, injected_error=args.injected_error,
                        shots_per_observable=args.shots, cone_limit=args.cone_limit)


def _load_circuit(args, net=None):
    if args.circuit:
        with open(_need_file(args.circuit, "circuit")) as f:
            return circuit_from_json(f.read())
    if args.n is None or args.depth is None:
        raise InvalidArgument("give --circuit or both --n and --depth")
    return sample_circuit(brickwork(args.n, args.depth), net if net is not None else "haar",
                          RngStream(args.seed, (1,)))


# -- subcommands ---------------------------------------------------------------------------------

def cmd_calibrate_mixing(args):
    cfg = estimate_c_k(2, int_list(args.depths), args.circuits_per_depth, args.gamma,
                       RngStream(args.seed), n=args.n)
    path = os.path.join(args.out_dir, args.output)
    os.makedirs(args.out_dir, exist_ok=True)
    cfg.save(path)
    print(f"c2={cfg.c_k:.6g} slope={cfg.fit.get('slope', float('nan')):.4g} "
          f"r2={cfg.fit.get('r2', float('nan')):.4g} -> {path}")


def cmd_anticc(args):
    from .anticc import estimate_tail, fit_tail, registered_suite
    suite = registered_suite()
    names = args.suite.split(",") if args.suite else list(suite)
    grid = float_list(args.eps_grid)
    summary = {}
    for i, name in enumerate(names):
        if name not in suite:
            raise InvalidArgument(f"unknown suite member {name!r}; known: {', '.join(suite)}")
        e = suite[name]
        tail = estimate_tail(e.poly, e.dim, grid, args.trials, RngStream(args.seed, (i,)).generator())
        fit = fit_tail(tail, e.dim, e.degree)
        _write_csv(args, f"tail_{name}.csv", tail.rows(), ["eps", "p_hat", "wilson_lo", "wilson_hi", "trials"])
        summary[name] = {"dim": e.dim, "degree": e.degree, "mean_abs2": tail.mean, **fit.as_dict(),
                         "monotone": tail.is_monotone()}
        _write_json(args, f"fit_{name}.json", {"fit": summary[name]})
        print(f"{name}: C_hat={fit.C_hat:.4g} r2={fit.r2:.4g} predicted={fit.predicted_C:.4g}")


def cmd_depth_test(args):
    from .protocols import DepthTestParams, depth_test
    cal = MixingBoundConfig.load(_need_file(args.calibration, "calibration"))
    circuit = _load_circuit(args)
    oracle = Oracle(circuit, config=_oracle_config(args))
    params = DepthTestParams(gamma=args.gamma or cal.gamma, c2=cal.c_k, max_depth=args.max_depth)
    trace = []
    d = depth_test(oracle, params, RngStream(args.seed, (2,)), trace)
    path = _write_json(args, "depth_test.json", {"depth": d, "c2": cal.c_k, "gamma": params.gamma,
                                                  "circuit_depth": circuit.architecture.depth,
                                                  "iterations": trace})
    print(f"depth={d}")
    print(f"report: {path}")


def _gate_params(args, depth, net):
    from .protocols import GateLearnParams
    cal = MixingBoundConfig.load(_need_file(args.calibration, "calibration"))
    if net is None and args.delta is None:
        raise InvalidArgument("continuum mode needs --delta")
    return GateLearnParams(gamma=args.gamma or cal.gamma, c2=cal.c_k, depth=depth, net=net, delta=args.delta)


def _load_net(args):
    return EpsNet.load(_need_file(args.net, "net")) if args.net else None


def cmd_learn_gate(args):
    from .protocols import learn_first_gate
    net = _load_net(args)
    circuit = _load_circuit(args, net)
    params = _gate_params(args, circuit.architecture.depth, net)
    oracle = Oracle(circuit, config=_oracle_config(args))
    trace = []
    g = learn_first_gate(oracle, args.gate_index, params, RngStream(args.seed, (2,)), trace=trace)
    true = circuit.gates[0][args.gate_index]
    dist = d_otimes(g, true, rng=args.seed).value
    _write_json(args, "learn_gate.json", {"gate": matrix_to_pairs(g), "d_otimes_to_true": dist,
                                          "trace": trace})
    print(f"d_otimes={dist:.3g}")


def cmd_learn_circuit(args):
    from .protocols import circuit_distance, learn_circuit
    net = _load_net(args)
    circuit = _load_circuit(args, net)
    params = _gate_params(args, circuit.architecture.depth, net)
    oracle = Oracle(circuit, config=_oracle_config(args))
    learned = learn_circuit(oracle, circuit.architecture, params, RngStream(args.seed, (2,)),
                            final_metric=args.final_metric)
    report = {"report": learned.report, "corrections": [matrix_to_pairs(c) for c in learned.corrections]}
    if circuit.num_qubits <= 10:
        frob, dia = circuit_distance(circuit.unitary(), learned.unitary())
        report.update(frobenius_distance=frob, diamond_distance=dia)
        print(f"frobenius={frob:.3g} diamond={dia:.3g}")
    try:
        _write_text(args, "learned_circuit.json", circuit_to_json(learned.absorbed()))
    except InvalidArgument:
        _write_text(args, "learned_circuit.json", circuit_to_json(learned.circuit))
    _write_json(args, "learn_circuit.json", report)


def cmd_purity(args):
    from .protocols import purity_experiment
    rows = purity_experiment(args.n, int_list(args.depths), args.trials, RngStream(args.seed),
                             all_mixed=args.all_mixed)
    _write_csv(args, "purity.csv", rows, ["depth", "mean", "stderr", "trials"])
    for r in rows:
        print(f"D={r['depth']} mean={r['mean']:.6f} se={r['stderr']:.2g}")


def cmd_build_net(args):
    net = build_eps_net(args.eps, RngStream(args.seed), coverage_trials=args.coverage_trials,
                        max_support=args.max_support, validation_samples=args.validation_samples)
    path = os.path.join(args.out_dir, args.output)
    os.makedirs(args.out_dir, exist_ok=True)
    net.save(path)
    print(f"support={len(net)} covered={net.validation.get('covered_fraction')} -> {path}")


def cmd_lemma_checks(args):
    from .kernels import det_transfer
    from .protocols import lemma_checks
    rows = lemma_checks(float_list(args.deltas), args.trials, RngStream(args.seed))
    doc = {"rows": rows}
    if args.net:
        net = EpsNet.load(_need_file(args.net, "net"))
        basis = fixed_subspace(2).basis
        f = lambda u: float(det_transfer(u[None], basis, 1)[0])
        doc["lipschitz"] = lipschitz_transfer_check(f, args.lipschitz, net, float_list(args.deltas),
                                                    args.lipschitz_trials, RngStream(args.seed, (9,)))
    _write_json(args, "lemma_checks.json", doc)
    for r in rows:
        print(f"delta={r['delta']} signal_violations={r['signal_violations']} "
              f"dotimes_violations={r['dotimes_violations']}")


def cmd_sample_circuit(args):
    net = _load_net(args)
    c = sample_circuit(brickwork(args.n, args.depth), net if net is not None else "haar",
                       RngStream(args.seed, (1,)))
    path = _write_text(args, args.output, circuit_to_json(c))
    print(path)


# -- parser ----------------------------------------------------------------------------------------

def _oracle_flags(p):
    p.add_argument("--mode", choices=["exact", "shots"], default="exact")
    p.add_argument("--injected-error", type=float, default=0.0, help="exact mode tomography error")
    p.add_argument("--shots", type=int, default=None, help="shots per observable (shots mode)")
    p.add_argument("--cone-limit", type=int, default=13)


def _circuit_flags(p):
    p.add_argument("--circuit", help="circuit JSON; otherwise sampled from --n/--depth")
    p.add_argument("--n", type=int)
    p.add_argument("--depth", type=int)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    common.add_argument("--out-dir", default="out", help="output directory")
    common.add_argument("--config", help="INI config file")

    ap = argparse.ArgumentParser(prog="rqclab", description="random circuit scrambling and learning experiments")
    ap.add_argument("--version", action="version", version=version_string())
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate-mixing", parents=[common], help="fit the mixing exponent c2")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--depths", default="1-5")
    p.add_argument("--circuits-per-depth", type=int, default=500)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--output", default="calibration.json")
    p.set_defaults(func=cmd_calibrate_mixing)

    p = sub.add_parser("anticc", parents=[common], help="tail estimates for the registered polynomials")
    p.add_argument("--suite", default="", help="comma-separated names (default: all)")
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--eps-grid", default="0.1,0.0316227766,0.01,0.00316227766,0.001,0.000316227766,0.0001")
    p.set_defaults(func=cmd_anticc)

    p = sub.add_parser("depth-test", parents=[common], help="estimate the depth of a brickwork circuit")
    _circuit_flags(p)
    _oracle_flags(p)
    p.add_argument("--calibration", help="calibration JSON from calibrate-mixing")
    p.add_argument("--gamma", type=float, default=None, help="defaults to the calibration's gamma")
    p.add_argument("--max-depth", type=int, default=64)
    p.set_defaults(func=cmd_depth_test)

    for name, func, helptext in (("learn-gate", cmd_learn_gate, "learn one first-layer gate"),
                                 ("learn-circuit", cmd_learn_circuit, "learn a whole brickwork circuit")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        _circuit_flags(p)
        _oracle_flags(p)
        p.add_argument("--calibration", help="calibration JSON from calibrate-mixing")
        p.add_argument("--net", help="net JSON (discrete mode); omit for continuum mode")
        p.add_argument("--delta", type=float, default=None)
        p.add_argument("--gamma", type=float, default=None)
        if name == "learn-gate":
            p.add_argument("--gate-index", type=int, default=0)
        else:
            p.add_argument("--final-metric", choices=["diamond", "frobenius"], default="diamond")
        p.set_defaults(func=func)

    p = sub.add_parser("purity", parents=[common], help="output purity against depth")
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--depths", default="0-6")
    p.add_argument("--trials", type=int, default=300)
    p.add_argument("--all-mixed", action="store_true")
    p.set_defaults(func=cmd_purity)

    p = sub.add_parser("build-net", parents=[common], help="greedy epsilon-net of two-qubit gates")
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--coverage-trials", type=int, default=2000)
    p.add_argument("--max-support", type=int, default=5000)
    p.add_argument("--validation-samples", type=int, default=1000)
    p.add_argument("--output", default="net.json")
    p.set_defaults(func=cmd_build_net)

    p = sub.add_parser("lemma-checks", parents=[common], help="numeric checks of the partial-trace lemmas")
    p.add_argument("--deltas", default="0.001,0.01,0.1")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--net", help="net JSON for the Lipschitz transfer check")
    p.add_argument("--lipschitz", type=float, default=144.0)
    p.add_argument("--lipschitz-trials", type=int, default=2000)
    p.set_defaults(func=cmd_lemma_checks)

    p = sub.add_parser("sample-circuit", parents=[common], help="write a random brickwork circuit")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--net", help="draw gates from this net instead of Haar")
    p.add_argument("--output", default="circuit.json")
    p.set_defaults(func=cmd_sample_circuit)
    return ap, sub


def _config_defaults(path, command):
    if not os.path.isfile(path):
        raise MissingFile(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    cp.read(path)
    values = {}
    for section in ("common", command):
        if cp.has_section(section):
            for k, v in cp.items(section):
                values[k.replace("-", "_")] = v
    return values


def _bool_fix(values, parser):
    # store_true flags arrive as strings from the config file
    for action in parser._actions:
        if isinstance(action, argparse._StoreTrueAction) and action.dest in values:
            values[action.dest] = str(values[action.dest]).strip().lower() in ("1", "true", "yes", "on")
    return values


def main(argv=None):
    ap, sub = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.config:
            sp = sub.choices[args.command]
            values = _bool_fix(_config_defaults(args.config, args.command), sp)
            known = {a.dest for a in sp._actions}
            unknown = sorted(set(values) - known)
            if unknown:
                raise InvalidArgument(f"unknown config keys: {', '.join(unknown)}")
            sp.set_defaults(**values)
            args = ap.parse_args(argv)
        if args.threads > 1:
            os.environ.setdefault("NUMBA_NUM_THREADS", str(args.threads))
        args.func(args)
    except (MissingFile, InvalidArgument) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return EXIT_USAGE
    except ResourceLimitError as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return EXIT_RESOURCE
    except CalibrationError as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return EXIT_CALIBRATION
    except RqcError as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return EXIT_OTHER
    return 0


if __name__ == "__main__":
    sys.exit(main())
