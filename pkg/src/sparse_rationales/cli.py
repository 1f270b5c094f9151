"""Command line interface: ``sparse-rationales <command> ...``.

Exit status is 0 on success, 1 for invalid input and 2 when the solver did
not converge within its tolerance (the result is still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .graph import GraphError, build_highlight_graph, build_matching_graph, parse_variant
from .lp_sparsemap import SolverConfig, lp_sparsemap_solve
from .map_oracles import BRUTE_FORCE_MAX_VARIABLES, map_factor, map_global_brute_force
from .metrics import corpus_token_f1
from .sampling import gumbel_matching, perturb_and_map_sample

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise io.InputError(f"{self.prog}: {message}")


def _add_graph_args(p, scores_required=True):
    p.add_argument("--graph", help="factor graph JSON")
    p.add_argument("--scores", required=scores_required, help="scores JSON (vector or row-major matrix)")
    p.add_argument("--variant", help="build a matching graph from a score matrix: XorAtMostOne, AtMostOne2 or Budget(B)")
    p.add_argument("--budget", type=int, help="B for the Budget matching variant")
    p.add_argument("--budget-pct", type=float, help="build a highlight graph from a score vector")
    p.add_argument("--transition", type=float, default=0.005, help="highlight edge score r (default 0.005)")


def _add_solver_args(p):
    p.add_argument("--config", help="solver config JSON")
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--unroll", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparse-rationales", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("map", help="exact MAP assignment")
    _add_graph_args(p)
    p.add_argument("--out")

    p = sub.add_parser("infer", help="LP-SparseMAP relaxed solution")
    _add_graph_args(p)
    _add_solver_args(p)
    p.add_argument("--out")

    p = sub.add_parser("sample", help="perturb-and-MAP samples or Gumbel matchings, as JSON lines")
    _add_graph_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--method", choices=["perturb-and-map", "gumbel-matching"], default="perturb-and-map")
    p.add_argument("--mode", choices=["train", "test"], default="train", help="gumbel-matching mode")
    p.add_argument("--temperature", type=float, default=0.1, help="gumbel-matching softmax temperature")
    p.add_argument("--out")

    p = sub.add_parser("train-toy", help="train a toy rationalizer on synthetic planted-rationale data")
    p.add_argument("--task", choices=["highlight", "matching"], default="highlight")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=4)
    p.add_argument("--n", type=int, default=2000, help="training examples")
    p.add_argument("--n-test", type=int, default=500, help="held-out examples for the summary")
    p.add_argument("--vocab-size", type=int, default=50)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--length", type=int, default=20, help="highlight document length")
    p.add_argument("--budget-pct", type=float, default=20.0)
    p.add_argument("--transition", type=float, default=0.005)
    p.add_argument("--temperature", type=float, default=0.1, help="train-time temperature")
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--variant", default="XorAtMostOne")
    p.add_argument("--budget", type=int)
    p.add_argument("--faithful", action="store_true")
    p.add_argument("--premise-length", type=int, default=3)
    p.add_argument("--hypothesis-length", type=int, default=4)
    p.add_argument("--data", help="training examples JSON instead of synthetic data")
    p.add_argument("--save-data", help="write the training examples here")
    p.add_argument("--out", required=True, help="checkpoint path")

    p = sub.add_parser("eval", help="token-level F1 of masks against gold, or of a checkpoint on a dataset")
    p.add_argument("--pred")
    p.add_argument("--gold")
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--out")

    p = sub.add_parser("selfcheck", help="run the acceptance suites; exit 0 iff all pass")
    p.add_argument("--quick", action="store_true", help="about ten times fewer instances")
    p.add_argument("--no-training", action="store_true", help="skip the end-to-end training suite")
    return parser


# -- helpers ------------------------------------------------------------------


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _graph_and_scores(args):
    if args.graph:
        graph = io.load_graph(args.graph)
        s, shape = io.load_scores(args.scores, graph.num_variables)
        return graph, s, shape
    s, shape = io.load_scores(args.scores)
    if args.variant:
        if len(shape) != 2:
            raise io.InputError("--variant needs a score matrix (premise rows x hypothesis columns)")
        name, B = parse_variant(args.variant, args.budget)
        return build_matching_graph(shape[0], shape[1], name, B), s, shape
    if args.budget_pct is not None:
        if len(shape) != 1:
            raise io.InputError("--budget-pct needs a score vector")
        return build_highlight_graph(s.size, args.budget_pct, args.transition), s, shape
    raise io.InputError("give --graph, --variant (matchings) or --budget-pct (highlights)")


def _solver_config(args) -> SolverConfig:
    config = io.load_config(args.config) if args.config else SolverConfig()
    overrides = {
        "temperature": args.temperature,
        "max_iters": args.max_iters,
        "tol": args.tol,
        "rho": args.rho,
        "unroll": args.unroll,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return SolverConfig(**{**config.to_dict(), **overrides}) if overrides else config


def _shaped(values: np.ndarray, shape) -> list:
    return np.asarray(values).reshape(shape).tolist()


# -- commands -----------------------------------------------------------------


def cmd_map(args) -> int:
    graph, s, shape = _graph_and_scores(args)
    if len(graph.factors) == 1 and graph.factors[0].size == graph.num_variables:
        f = graph.factors[0]
        res = map_factor(f, s[list(f.members)])
        z = np.zeros(graph.num_variables)
        z[list(f.members)] = res.assignment
        method, score = "factor_oracle", res.score
    else:
        if graph.num_variables > BRUTE_FORCE_MAX_VARIABLES:
            raise io.InputError(
                f"exact MAP of a multi-factor graph is limited to {BRUTE_FORCE_MAX_VARIABLES} variables"
            )
        res = map_global_brute_force(graph, s)
        z, method, score = res.assignment, "brute_force", res.score
    _emit(io.dumps({"assignment": _shaped(z.astype(int), shape), "method": method, "score": score}), args.out)
    return EXIT_OK


def cmd_infer(args) -> int:
    graph, s, shape = _graph_and_scores(args)
    config = _solver_config(args)
    state = lp_sparsemap_solve(graph, s, config=config)
    out = {
        "config": config.to_dict(),
        "converged": state.converged,
        "dual_residual": state.dual_residual,
        "iterations": state.iterations,
        "max_residual": state.max_residual,
        "z": _shaped(state.u, shape),
    }
    _emit(io.dumps(out), args.out)
    if not state.converged:
        print(f"warning: not converged after {state.iterations} iterations", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _jsonl(record) -> str:
    return json.dumps(io.to_jsonable(record), sort_keys=True, separators=(",", ":"))


def cmd_sample(args) -> int:
    if args.n < 1:
        raise io.InputError("--n must be >= 1")
    lines = []
    if args.method == "gumbel-matching":
        s, shape = io.load_scores(args.scores)
        if len(shape) != 2:
            raise io.InputError("gumbel-matching needs a score matrix")
        S = s.reshape(shape)
        for k in range(args.n):
            # sample k is drawn with seed + k
            res = gumbel_matching(S, args.seed + k, args.mode, args.temperature)
            lines.append(
                _jsonl(
                    {
                        "hypothesis_to_premise": res.hypothesis_to_premise,
                        "index": k,
                        "mode": res.mode,
                        "premise_to_hypothesis": res.premise_to_hypothesis,
                        "seed": res.seed,
                    }
                )
            )
    else:
        graph, s, shape = _graph_and_scores(args)
        samples = perturb_and_map_sample(graph, s, args.seed, args.n)
        lines = [
            _jsonl({"assignment": _shaped(z.astype(int), shape), "index": k, "seed": args.seed})
            for k, z in enumerate(samples)
        ]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _load_examples(path):
    from .rationalizers.model import SyntheticExample

    d = io.read_json(path, "data")
    if not isinstance(d, list) or not d:
        raise io.InputError(f"data {path}: expected a non-empty array of examples")
    try:
        return [SyntheticExample.from_dict(ex) for ex in d]
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise io.InputError(f"data {path}: malformed example ({exc})") from None


def _evaluate_model(model, examples, threshold=0.0) -> dict:
    from .rationalizers.highlights import extract_highlight, predict_highlight
    from .rationalizers.matchings import extract_matching, predict_matching
    from .rationalizers.model import HIGHLIGHT

    preds, correct = [], 0
    for ex in examples:
        if model.kind == HIGHLIGHT:
            z = extract_highlight(model, ex.tokens)[0]
            label = int(predict_highlight(model, ex.tokens, z) > 0.5)
        else:
            z = extract_matching(model, *ex.tokens)[0]
            faithful = bool(model.hyperparams.get("faithful", False))
            label = int(np.argmax(predict_matching(model, *ex.tokens, z, faithful)))
        preds.append(z.reshape(-1))
        correct += label == ex.label
    result = corpus_token_f1(preds, [np.ravel(ex.rationale) for ex in examples], threshold).to_dict()
    result["accuracy"] = correct / len(examples)
    result["n_examples"] = len(examples)
    return result


def cmd_train_toy(args) -> int:
    from .rationalizers import model as toy
    from .rationalizers.training import train_toy

    if args.task == "highlight":
        hp = {
            "budget_pct": args.budget_pct,
            "transition": args.transition,
            "temperature": args.temperature,
            "learning_rate": args.learning_rate,
        }
        make = lambda n, seed: toy.make_highlight_data(n, args.vocab_size, args.length, args.budget_pct, seed)
        embeddings = toy.highlight_embeddings(args.vocab_size, args.dim, args.seed)
    else:
        name, B = parse_variant(args.variant, args.budget)
        hp = {
            "variant": name,
            "budget": B,
            "faithful": args.faithful,
            "temperature": args.temperature,
            "learning_rate": args.learning_rate,
        }
        make = lambda n, seed: toy.make_matching_data(
            n, args.vocab_size, args.premise_length, args.hypothesis_length, seed
        )
        embeddings = None
    train = _load_examples(args.data) if args.data else make(args.n, args.seed)
    test = make(args.n_test, 10_000 + args.seed) if args.n_test > 0 else []
    model = toy.init_model(args.task, args.vocab_size, args.dim, args.seed, hp, embeddings=embeddings)
    model, losses = train_toy(model, train, args.epochs)
    io.write_json(model.to_dict(), args.out)
    if args.save_data:
        io.write_json([ex.to_dict() for ex in train], args.save_data)
    summary = {"epoch_losses": losses, "checkpoint": str(args.out), "seed": args.seed, "task": args.task}
    if test:
        summary["test"] = _evaluate_model(model, test)
    sys.stdout.write(io.dumps(summary))
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.model or args.data:
        if not (args.model and args.data):
            raise io.InputError("--model and --data go together")
        from .rationalizers.model import ToyModel

        try:
            model = ToyModel.from_dict(io.read_json(args.model, "model"))
        except ValueError as exc:
            raise io.InputError(f"model {args.model}: {exc}") from None
        result = _evaluate_model(model, _load_examples(args.data), args.threshold)
    else:
        if not (args.pred and args.gold):
            raise io.InputError("give --pred and --gold, or --model and --data")
        preds, golds = io.load_masks(args.pred, "pred"), io.load_masks(args.gold, "gold")
        if len(preds) != len(golds):
            raise io.InputError(f"{len(preds)} predicted masks but {len(golds)} gold masks")
        for k, (p, g) in enumerate(zip(preds, golds)):
            if p.size != g.size:
                raise io.InputError(f"mask {k}: prediction has {p.size} entries, gold has {g.size}")
        result = corpus_token_f1(preds, golds, args.threshold).to_dict()
        result["n_examples"] = len(preds)
    _emit(io.dumps(result), args.out)
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    from .acceptance import run_all

    results = run_all(quick=args.quick, training=not args.no_training)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVALID


COMMANDS = {
    "map": cmd_map,
    "infer": cmd_infer,
    "sample": cmd_sample,
    "train-toy": cmd_train_toy,
    "eval": cmd_eval,
    "selfcheck": cmd_selfcheck,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except (io.InputError, GraphError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
