"""Command-line surface.

Exit codes: 0 success (and verification pass), 1 semantic failure (e.g.
verification failed), 2 invalid flags or inputs, 3 I/O failure, 4
numerical failure. Every report embeds the resolved configuration and all
seeds; reruns with identical flags produce byte-identical files.
"""

import argparse
import json
import math
import sys
from dataclasses import asdict

import numpy as np

from . import equivalence, experiment, serialize
from .errors import InvalidInputError, NumericalError
from .synth import SystemSpec, generate_dataset, generate_system
from .training import TrainConfig, evaluate, init_student, oracle_optimal_r2, train


def _snr_value(text: str) -> float:
    if text.lower() in ("inf", "+inf", "infinity", "none"):
        return math.inf
    return float(text)


def _int_list(text: str):
    return tuple(int(tok) for tok in text.split(",") if tok)


def cmd_gen_system(args) -> int:
    spec = SystemSpec(
        n=args.n,
        m=args.m,
        p=args.p,
        epsilon=args.epsilon,
        seed=args.seed,
        activation_target=args.activation_target,
        input_std=args.input_std,
        input_sparsity=args.input_sparsity,
    )
    params, info = generate_system(spec, return_info=True)
    metadata = {"system_spec": asdict(spec), **info}
    serialize.write_model(args.out, params, metadata)
    lo, hi = info["singular_value_range"]
    print(f"wrote {args.out}: n={spec.n} singular values in [{lo:.6f}, {hi:.6f}]")
    return 0


def cmd_gen_data(args) -> int:
    params, metadata = serialize.read_model(args.model)
    stored = metadata.get("system_spec", {})
    spec = SystemSpec(
        n=params.n,
        m=params.m,
        p=params.p,
        epsilon=stored.get("epsilon", 0.01),
        seed=stored.get("seed", 0),
        activation_target=stored.get("activation_target", 0.6),
        input_std=args.input_std if args.input_std is not None else stored.get("input_std", 1.0),
        input_sparsity=(
            args.input_sparsity
            if args.input_sparsity is not None
            else stored.get("input_sparsity", 1.0)
        ),
    )
    dataset = generate_dataset(
        params, spec, args.n_train, args.n_test, args.t_len, args.snr_db, args.seed
    )
    serialize.write_dataset(args.out, dataset)
    snr = dataset.metadata["empirical_snr_db"]
    print(f"wrote {args.out}: {args.n_train}+{args.n_test} sequences, empirical SNR {snr:.3f} dB")
    return 0


def cmd_embed(args) -> int:
    params, _ = serialize.read_model(args.model)
    record = equivalence.unitary_embedding(params, args.bound_m)
    residual = float(
        np.max(np.abs(record.urnn.w.T @ record.urnn.w - np.eye(record.urnn.n)))
    )
    certificate = {
        "source_hash": record.source_hash,
        "rho": record.rho,
        "input_bound": record.input_bound,
        "state_bound": record.state_bound,
        "orthogonality_residual": residual,
        "states": record.urnn.n,
    }
    serialize.write_model(args.out, record.urnn, {"embedding_certificate": certificate})
    if args.report:
        serialize.write_json(
            args.report, {"format_version": serialize.REPORT_FORMAT_VERSION, **certificate}
        )
    print(
        f"embedded -> {args.out}: states={record.urnn.n} rho={record.rho:.12g} "
        f"state_bound={record.state_bound:.12g} orthogonality_residual={residual:.3e}"
    )
    return 0


def cmd_verify(args) -> int:
    model_a, _ = serialize.read_model(args.model_a)
    model_b, _ = serialize.read_model(args.model_b)
    report = equivalence.verify_equivalence(
        model_a, model_b, args.bound_m, args.trials, args.t_len, args.tol, args.seed
    )
    payload = {
        "format_version": serialize.REPORT_FORMAT_VERSION,
        "config": {
            "model_a": args.model_a,
            "model_b": args.model_b,
            "input_bound": args.bound_m,
            "trials": args.trials,
            "t_len": args.t_len,
            "tolerance": args.tol,
            "seed": args.seed,
        },
        "max_abs_deviation": report.max_abs_deviation,
        "per_trial_deviations": report.per_trial_deviations,
        "edge_deviations": report.edge_deviations,
        "passed": report.passed,
    }
    if args.report:
        serialize.write_json(args.report, payload)
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}: max |y_a - y_b| = {report.max_abs_deviation:.3e} (tol {args.tol:g})")
    return 0 if report.passed else 1


def cmd_train(args) -> int:
    dataset = serialize.read_dataset(args.dataset)
    config = TrainConfig(
        hidden_units=args.hidden_units,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        constraint=args.constraint,
        contractive_cap=args.cap,
        patience=args.patience,
        validation_fraction=args.validation_fraction,
        seed=args.seed,
    )
    meta = dataset.metadata
    m = meta["system_spec"]["m"]
    p = meta["system_spec"]["p"]
    student = init_student(args.hidden_units, m, p, config)
    best, report = train(student, dataset, config)
    test_r2 = evaluate(best, dataset.test) if dataset.test else None
    serialize.write_model(args.out, best, {"train_config": asdict(config)})
    payload = {
        "format_version": serialize.REPORT_FORMAT_VERSION,
        "config": asdict(config),
        "dataset": args.dataset,
        "train_losses": report.train_losses,
        "val_losses": report.val_losses,
        "test_r2_per_epoch": report.test_r2,
        "constraint_residuals": report.constraint_residuals,
        "best_epoch": report.best_epoch,
        "epochs_run": report.epochs_run,
        "stopping_reason": report.stopping_reason,
        "final_constraint_residual": report.final_constraint_residual,
        "final_test_r2": test_r2,
        "optimal_r2": oracle_optimal_r2(dataset) if dataset.test else None,
        "wall_time_s": serialize.recorded_wall_time(report.wall_time_s),
        "seed": config.seed,
    }
    if args.report:
        serialize.write_json(args.report, payload)
    print(
        f"trained {args.hidden_units} units [{args.constraint}]: "
        f"epochs={report.epochs_run} ({report.stopping_reason}) "
        f"test R^2={test_r2 if test_r2 is None else format(test_r2, '.4f')}",
        flush=True,
    )
    print(f"wall time {report.wall_time_s:.1f}s", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    params, _ = serialize.read_model(args.model)
    dataset = serialize.read_dataset(args.dataset)
    score = evaluate(params, dataset.test)
    optimal = oracle_optimal_r2(dataset)
    if args.report:
        serialize.write_json(
            args.report,
            {
                "format_version": serialize.REPORT_FORMAT_VERSION,
                "model": args.model,
                "dataset": args.dataset,
                "test_r2": score,
                "optimal_r2": optimal,
            },
        )
    print(f"test R^2 = {score:.6f} (noise-limited optimum {optimal:.6f})")
    return 0


def cmd_experiment(args) -> int:
    if args.preset == "desk":
        config = experiment.desk_preset(seeds=_int_list(args.seeds) if args.seeds else (0, 1, 2))
    else:
        units_rnn = _int_list(args.units_rnn)
        units_urnn = _int_list(args.units_urnn)
        units_contrnn = _int_list(args.units_contrnn)
        modes = []
        units_by_mode = []
        for mode, units in (("rnn", units_rnn), ("contrnn", units_contrnn), ("urnn", units_urnn)):
            if units:
                modes.append(mode)
                units_by_mode.append((mode, units))
        config = experiment.ExperimentConfig(
            n_true=args.n_true,
            m=args.m,
            p=args.p,
            epsilon=args.epsilon,
            input_std=args.input_std,
            input_sparsity=args.input_sparsity,
            n_train=args.n_train,
            n_test=args.n_test,
            t_len=args.t_len,
            snr_db=args.snr_db,
            modes=tuple(modes),
            units_by_mode=tuple(units_by_mode),
            seeds=_int_list(args.seeds) if args.seeds else (0, 1, 2),
            max_epochs=args.max_epochs,
            patience=args.patience,
        )
    rows, n_failed = experiment.run_experiment(config, args.out)
    print(f"wrote {args.out}/sweep.csv with {len(rows)} rows ({n_failed} failed cells)")
    if n_failed:
        print(f"{n_failed} cells diverged", file=sys.stderr)
        return 4
    return 0


def cmd_converse(args) -> int:
    if args.kind == "relu":
        witness = equivalence.converse_relu_witness(1, args.wc)
        probes = equivalence.scalar_probe_inputs()
        gap = equivalence.one_state_urnn_gap(witness, args.grid_resolution, probes=probes)
        record = equivalence.unitary_embedding(witness, equivalence.SCALAR_PROBE_BOUND)
        contrast = equivalence.max_output_deviation(witness, record.urnn, probes)
        payload = {
            "format_version": serialize.REPORT_FORMAT_VERSION,
            "kind": "relu",
            "w_c": args.wc,
            "grid_resolution": args.grid_resolution,
            "one_state_gap": gap,
            "two_state_embedding_deviation": contrast,
            "probe_bound": equivalence.SCALAR_PROBE_BOUND,
            "probe_t_len": equivalence.SCALAR_PROBE_T,
        }
        print(
            f"best 1-state unitary deviation (gap): {gap:.6g}\n"
            f"2-state embedding deviation on the same probes: {contrast:.3e}"
        )
    else:
        candidates = equivalence.sample_scalar_unitary_sigmoid_candidates(
            args.candidates, args.seed
        )
        gaps = []
        for cand in candidates:
            rep = equivalence.sigmoid_mismatch_witness(args.wc, cand)
            gaps.append(rep.max_gap)
        usable = [g for g in gaps if g is not None]
        payload = {
            "format_version": serialize.REPORT_FORMAT_VERSION,
            "kind": "sigmoid",
            "w_c": args.wc,
            "candidates": args.candidates,
            "seed": args.seed,
            "x_grid": list(equivalence.DEFAULT_MISMATCH_GRID),
            "per_candidate_max_gap": gaps,
            "min_max_gap": min(usable) if usable else None,
        }
        print(
            f"{len(usable)}/{len(gaps)} candidates admissible; "
            f"smallest linearization gap: {min(usable):.6g}"
            if usable
            else "no admissible candidates"
        )
    if args.report:
        serialize.write_json(args.report, payload)
    return 0


def cmd_dof(args) -> int:
    d_rnn = equivalence.dof_count(args.n, args.m, args.p, "rnn")
    d_urnn = equivalence.dof_count(args.n, args.m, args.p, "urnn_double")
    print(
        f"n={args.n} m={args.m} p={args.p}: rnn={d_rnn} urnn(2n states)={d_urnn} "
        f"ratio={d_urnn / d_rnn:.6f} (< 2)"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="urnn-equiv",
        description="Construct, verify and stress-test the equivalence between "
        "contractive and unitary recurrent networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-system", help="draw a random slow contractive relu system")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--activation-target", type=float, default=0.6)
    p.add_argument("--input-std", type=float, default=1.0)
    p.add_argument("--input-sparsity", type=float, default=1.0)
    p.add_argument("--out", required=True, help="output model.json path")
    p.set_defaults(func=cmd_gen_system)

    p = sub.add_parser("gen-data", help="simulate a model and add observation noise")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--n-train", type=int, default=700)
    p.add_argument("--n-test", type=int, default=300)
    p.add_argument("--t-len", type=int, default=1000)
    p.add_argument("--snr-db", type=_snr_value, default=20.0, help="SNR in dB, or 'inf'")
    p.add_argument("--input-std", type=float, default=None)
    p.add_argument("--input-sparsity", type=float, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("embed", help="construct the 2n-state unitary twin of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--bound-m", type=float, required=True, help="input norm bound M")
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("verify", help="Monte-Carlo input-output equivalence check")
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b", required=True)
    p.add_argument("--bound-m", type=float, required=True)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--t-len", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("train", help="fit a student model to a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--hidden-units", type=int, required=True)
    p.add_argument("--constraint", choices=("none", "contractive", "unitary"), default="none")
    p.add_argument("--cap", type=float, default=0.999)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--max-epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--validation-fraction", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a model on a dataset's test split")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="hidden-unit sweep over constraint modes")
    p.add_argument("--out", required=True)
    p.add_argument("--preset", choices=("desk", "none"), default="desk")
    p.add_argument("--seeds", default=None, help="comma-separated realization seeds")
    p.add_argument("--n-true", type=int, default=4)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--input-std", type=float, default=1.0)
    p.add_argument("--input-sparsity", type=float, default=1.0)
    p.add_argument("--n-train", type=int, default=700)
    p.add_argument("--n-test", type=int, default=300)
    p.add_argument("--t-len", type=int, default=1000)
    p.add_argument("--snr-db", type=_snr_value, default=20.0)
    p.add_argument("--units-rnn", default="", help="e.g. 2,4,8")
    p.add_argument("--units-urnn", default="")
    p.add_argument("--units-contrnn", default="")
    p.add_argument("--max-epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=10)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("converse", help="lower-bound and impossibility witnesses")
    p.add_argument("kind", choices=("relu", "sigmoid"))
    p.add_argument("--wc", type=float, default=0.9)
    p.add_argument("--grid-resolution", type=int, default=61)
    p.add_argument("--candidates", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_converse)

    p = sub.add_parser("dof", help="degrees-of-freedom comparison")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.set_defaults(func=cmd_dof)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
