"""Command-line front end: ``simrel check`` and ``simrel preorder``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .flownet import BipartiteNetwork, build_network, to_dot
from .models import BOT, Kind, Model, ModelError, Relation, induced_distribution, parse_model
from .oracles import SizeBoundError, naive_simrel
from .probsim import combined_match, simrel_prob
from .stats import Stats
from .strongsim import simrel_basic, simrel_fps, simrel_pa, strong_rows
from .weaksim import simrel_w, weak_witness

EXIT_RELATED, EXIT_UNRELATED, EXIT_ERROR = 0, 1, 2

RELATIONS = ("strong", "strong-prob", "weak")
ENGINES = ("parametric", "basic", "oracle")


class UsageError(Exception):
    """Bad combination of model, relation and options."""


def check_compatible(model: Model, relation: str) -> None:
    if relation == "weak" and model.kind not in (Kind.DTMC, Kind.CTMC):
        raise UsageError(f"--rel weak needs a DTMC or CTMC, got {model.kind.value}")
    if relation == "strong-prob" and not model.kind.is_automaton:
        raise UsageError(f"--rel strong-prob needs a PA or CPA, got {model.kind.value}")


def compute(model: Model, relation: str, engine: str = "parametric", improved: bool = False,
            stats: Stats | None = None, workers: int = 1) -> Relation:
    """The requested preorder of ``model``."""
    check_compatible(model, relation)
    if engine == "oracle":
        return naive_simrel(model, relation)
    if relation == "weak":
        return simrel_w(model, improved=improved and engine != "basic", stats=stats, workers=workers)
    if relation == "strong-prob":
        return simrel_prob(model, stats, workers)
    if model.kind.is_automaton:
        return simrel_pa(model, stats, workers)
    if engine == "basic":
        return simrel_basic(model, stats, workers)
    return simrel_fps(model, stats, workers)


def _name(model: Model, s: int) -> str:
    return "bot" if s == BOT else model.name(s)


def _weights(model: Model, weights: dict) -> dict[str, str]:
    return {f"{_name(model, s)} -> {_name(model, t)}": str(v) for (s, t), v in sorted(weights.items())}


def witness(model: Model, relation: str, rel: Relation, s1: int, s2: int) -> tuple[dict, list]:
    """A JSON-ready witness for a related pair plus the networks behind it as (tag, network)."""
    networks: list[tuple[str, BipartiteNetwork]] = []
    if relation == "weak":
        found = weak_witness(model, s1, s2, rel)
        assert found is not None
        out = {"branch": found["branch"]}
        if found["branch"] == "c":
            out["gamma"] = str(found["gamma"])
            out["flow"] = _weights(model, found["flow"])
            networks.append(("", found["network"]))
        return out, networks
    if not model.kind.is_automaton:
        rows = strong_rows(model)
        bn = build_network(rows[s1], rows[s2], rel)
        bn.max_flow()
        networks.append(("", bn))
        return {"weights": _weights(model, bn.weight_function())}, networks
    steps = []
    for action in sorted(model.actions[s1]):
        for index in range(len(model.steps_of(s1, action))):
            entry: dict = {"action": action, "index": index}
            if relation == "strong-prob":
                found = combined_match(model, s1, action, index, s2, rel)
                assert found is not None
                entry["coefficients"] = [str(v) for k, v in sorted(found.items(), key=str) if k[0] == "c"]
                if "E" in found:
                    entry["exit_rate"] = str(found["E"])
            else:
                entry.update(_automaton_match(model, s1, s2, action, index, rel, networks))
            steps.append(entry)
    return {"steps": steps}, networks


def _automaton_match(model: Model, s1: int, s2: int, action: str, index: int, rel: Relation,
                     networks: list) -> dict:
    def target(step):
        return induced_distribution(step) if model.kind is Kind.CPA else step

    mine = model.steps_of(s1, action)[index]
    for j, theirs in enumerate(model.steps_of(s2, action)):
        if model.kind is Kind.CPA and theirs.exit_rate < mine.exit_rate:
            continue
        bn = build_network(target(mine), target(theirs), rel)
        if bn.max_flow() == 1:
            networks.append((f"_{action}_{index}", bn))
            return {"candidate": j, "weights": _weights(model, bn.weight_function())}
    raise AssertionError("related pair without a matching candidate")


def _dump(directory: Path, model: Model, s1: int, s2: int, networks: list) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for tag, bn in networks:
        title = f"{model.name(s1)}_{model.name(s2)}{tag}"
        (directory / f"{title}.dot").write_text(to_dot(bn, title, lambda s: model.name(s)))


def _model_info(model: Model) -> dict:
    return {"kind": model.kind.value, "n": model.n, "m": model.m}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simrel", description="Decide simulation preorders of Markov models.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("check", "decide one pair"), ("preorder", "list every related pair")):
        p = sub.add_parser(name, help=text)
        p.add_argument("model", type=Path, help="model file")
        p.add_argument("--rel", choices=RELATIONS, default="strong", help="relation to decide")
        p.add_argument("--engine", choices=ENGINES, default="parametric", help="decision procedure")
        p.add_argument("--stats", action="store_true", help="print algorithm counters")
        p.add_argument("--improved", action="store_true", help="use the class-based weak check")
        p.add_argument("--dump-networks", type=Path, metavar="DIR", help="write DOT files of witness networks")
        p.add_argument("--json", action="store_true", help="print a JSON report")
        p.add_argument("--threads", type=int, default=1, metavar="N", help="parallel pair checks per iteration")
        if name == "check":
            p.add_argument("--pair", nargs=2, required=True, metavar=("S", "T"), help="states to compare")
            p.add_argument("--witness", action="store_true", help="print why the pair is related")
    return parser


def run(args: argparse.Namespace, out) -> int:
    model = parse_model(args.model.read_bytes())
    check_compatible(model, args.rel)
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    pair = None
    if args.command == "check":
        try:
            pair = tuple(model.state(token) for token in args.pair)
        except ModelError as err:
            raise UsageError(str(err)) from None
    stats = Stats()
    rel = compute(model, args.rel, args.engine, args.improved, stats, args.threads)
    report: dict = {"model": _model_info(model), "relation": args.rel, "engine": args.engine}

    if args.command == "preorder":
        report["pairs"] = [[model.name(a), model.name(b)] for a, b in rel]
        if args.dump_networks:
            for a, b in rel:
                _dump(args.dump_networks, model, a, b, witness(model, args.rel, rel, a, b)[1])
        status = EXIT_RELATED
        lines = [f"{a} ⊑ {b}" for a, b in report["pairs"]]
    else:
        s1, s2 = pair
        related = (s1, s2) in rel
        report["pair"] = [model.name(s1), model.name(s2)]
        report["related"] = related
        status = EXIT_RELATED if related else EXIT_UNRELATED
        sign = "⊑" if related else "⋢"
        lines = [f"{model.name(s1)} {sign} {model.name(s2)}"]
        if related and (args.witness or args.dump_networks):
            found, networks = witness(model, args.rel, rel, s1, s2)
            if args.witness:
                report["witness"] = found
                lines += _witness_lines(found)
            if args.dump_networks:
                _dump(args.dump_networks, model, s1, s2, networks)
    report["stats"] = stats.as_dict()

    if args.json:
        out.write(json.dumps(report, indent=2, ensure_ascii=False) + "\n")
    else:
        if args.stats:
            lines += [f"# {key} {value}" for key, value in report["stats"].items()]
        out.write("".join(line + "\n" for line in lines))
    return status


def _witness_lines(found: dict) -> list[str]:
    lines = []
    for key, value in found.items():
        if key == "steps":
            for step in value:
                head = f"  {step['action']}[{step['index']}]"
                if "candidate" in step:
                    lines.append(f"{head} matched by candidate {step['candidate']}")
                    lines += [f"    {edge}: {w}" for edge, w in step["weights"].items()]
                else:
                    rate = f" at exit rate {step['exit_rate']}" if "exit_rate" in step else ""
                    lines.append(f"{head} matched by combination {' '.join(step['coefficients'])}{rate}")
        elif isinstance(value, dict):
            lines.append(f"  {key}:")
            lines += [f"    {edge}: {w}" for edge, w in value.items()]
        else:
            lines.append(f"  {key}: {value}")
    return lines


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args, sys.stdout)
    except (ModelError, SizeBoundError, UsageError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
