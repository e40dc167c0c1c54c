"""Command-line entry point: ``coldpromo <command> [flags]``.

Commands: stats, generate, reshuffle, recommend, promote, sweep.  Every
command writes its outputs plus a ``manifest.json`` into ``--output-dir``.
Outputs are staged as temporary files and renamed only once the command has
succeeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import secrets
import sys
import tempfile
import time
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import netstats, nullmodel, promotion, recsys, synthgen
from .network import BipartiteNetwork, read_edge_list, validate, write_edge_list, write_mapping

log = logging.getLogger("coldpromo")


class CommandError(Exception):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class StagedOutputs:
    """Collects output files as temporaries; ``commit`` renames them all."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._staged: dict[str, Path] = {}

    def open(self, name: str):
        fd, tmp = tempfile.mkstemp(prefix=f".{name}.", suffix=".tmp", dir=self.dir)
        self._staged[name] = Path(tmp)
        return os.fdopen(fd, "w", encoding="utf-8", newline="")

    def path(self, name: str) -> Path:
        """Stage a file that someone else writes by path."""
        fd, tmp = tempfile.mkstemp(prefix=f".{name}.", suffix=".tmp", dir=self.dir)
        os.close(fd)
        self._staged[name] = Path(tmp)
        return Path(tmp)

    def digests(self) -> dict[str, str]:
        return {name: sha256_file(tmp) for name, tmp in self._staged.items()}

    def commit(self) -> list[Path]:
        final = []
        for name, tmp in self._staged.items():
            dest = self.dir / name
            os.replace(tmp, dest)
            final.append(dest)
        self._staged.clear()
        return final

    def discard(self) -> None:
        for tmp in self._staged.values():
            tmp.unlink(missing_ok=True)
        self._staged.clear()


def read_config(path) -> dict[str, str]:
    """Plain ``key = value`` (or ``key: value``) lines; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            for sep in ("=", ":"):
                if sep in line:
                    key, value = line.split(sep, 1)
                    break
            else:
                raise CommandError(f"{path}:{lineno}: expected key = value")
            values[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return values


def _int_list(text: str) -> list[int]:
    text = text.strip()
    if text.startswith("log:"):
        return promotion.default_r_grid(int(text[4:]))
    if text == "default":
        return promotion.default_r_grid()
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    if text.strip() == "default":
        return promotion.default_tau_grid()
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", default=".", help="directory for outputs (default: cwd)")
    common.add_argument("--seed", type=int, default=None, help="master seed; generated and recorded if omitted")
    common.add_argument("--threads", type=_positive, default=1)
    common.add_argument("--config", default=None, help="key = value file supplying flag defaults")
    common.add_argument("-v", "--verbose", action="store_true")

    net_in = argparse.ArgumentParser(add_help=False)
    net_in.add_argument("--input", default=None, help="edge list (user item per line); required")
    net_in.add_argument("--user-map", default=None, help="optional index<TAB>id file pinning user indices")
    net_in.add_argument("--item-map", default=None, help="optional index<TAB>id file pinning item indices")

    cf = argparse.ArgumentParser(add_help=False)
    cf.add_argument("--L", type=_positive, default=promotion.DEFAULT_L, help="recommendation list length")
    cf.add_argument("--engine", choices=("icf", "ucf"), default="icf")
    cf.add_argument("--topk", type=_positive, default=None, help="prune item similarities to top-k neighbors")

    parser = argparse.ArgumentParser(prog="coldpromo", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)
    table = {}

    p = subs.add_parser("stats", parents=[common, net_in], help="summary, degree distributions, d_nn curves")
    p.add_argument("--k-min", type=_positive, default=1, help="lower cutoff for exponent fits")
    p.add_argument("--null-realizations", type=int, default=0, help="also average d_nn curves over this many reshuffles")
    table["stats"] = p

    p = subs.add_parser("generate", parents=[common], help="synthetic network")
    for f in synthgen.GeneratorConfig.__dataclass_fields__.values():
        if f.name == "seed":
            continue
        flag = "--" + f.name.replace("_", "-")
        p.add_argument(flag, type=type(f.default), default=f.default)
    table["generate"] = p

    p = subs.add_parser("reshuffle", parents=[common, net_in], help="degree-preserving null network")
    p.add_argument("--attempts", type=int, default=None, help="swap proposals (default 3w)")
    table["reshuffle"] = p

    p = subs.add_parser("recommend", parents=[common, net_in, cf], help="top-L lists as CSV")
    p.add_argument("--users", type=_str_list, default=None, help="comma-separated user ids (default: all)")
    table["recommend"] = p

    p = subs.add_parser("promote", parents=[common, net_in, cf], help="one strategy / R cell")
    p.add_argument("--strategy", default="MinD", help="MaxD, MinD, PA, RAN or tau=<x>")
    p.add_argument("--R", type=_positive, default=None, help="number of links (required)")
    p.add_argument("--realizations", type=_positive, default=50)
    table["promote"] = p

    p = subs.add_parser("sweep", parents=[common, net_in, cf], help="strategy/tau x R grid")
    p.add_argument("--strategies", type=_str_list, default=None, help="e.g. MaxD,MinD,PA,RAN")
    p.add_argument("--tau-grid", type=_float_list, default=None, help="comma list or 'default' (-4..4 step 0.5)")
    p.add_argument("--R-grid", type=_int_list, default=None, help="comma list, 'default' or log:<points>")
    p.add_argument("--realizations", type=_positive, default=50)
    table["sweep"] = p
    return parser, table


def parse_args(argv) -> argparse.Namespace:
    parser, table = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = read_config(args.config)
        except OSError as exc:
            parser.error(f"cannot read config {args.config}: {exc.strerror}")
        except CommandError as exc:
            parser.error(str(exc))
        sub = table[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            sub.error(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    _check_combinations(table[args.command], args)
    return args


def _check_combinations(sub, args) -> None:
    if hasattr(args, "input") and not args.input:
        sub.error("--input is required")
    if args.command == "promote" and args.R is None:
        sub.error("--R is required")
    if getattr(args, "engine", None) == "ucf" and getattr(args, "topk", None) is not None:
        sub.error("--topk applies to --engine icf only")
    if args.command == "sweep":
        if not args.strategies and not args.tau_grid:
            sub.error("sweep needs --strategies and/or --tau-grid")
        if not args.R_grid:
            sub.error("sweep needs --R-grid")
    if args.command == "stats" and args.null_realizations < 0:
        sub.error("--null-realizations must be >= 0")
    if args.command == "reshuffle" and args.attempts is not None and args.attempts < 0:
        sub.error("--attempts must be >= 0")


def _load(args) -> BipartiteNetwork:
    for path in (args.input, args.user_map, args.item_map):
        if path is not None and not os.path.isfile(path):
            raise CommandError(f"cannot read input file: {path}")
    try:
        net = read_edge_list(args.input, args.user_map, args.item_map)
    except OSError as exc:
        raise CommandError(f"cannot read input file: {args.input}: {exc.strerror}") from exc
    except ValueError as exc:
        raise CommandError(f"{args.input}: {exc}") from exc
    report = validate(net)
    if not report.ok:
        raise CommandError(f"{args.input}: invalid network: {report.summary()}")
    return net


def _write_network(out: StagedOutputs, net: BipartiteNetwork) -> None:
    with out.open("edges.tsv") as fh:
        write_edge_list(net, fh)
    with out.open("users.tsv") as fh:
        write_mapping(net.user_ids, fh)
    with out.open("items.tsv") as fh:
        write_mapping(net.item_ids, fh)


def _write_json(out: StagedOutputs, name: str, obj) -> None:
    with out.open(name) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def cmd_stats(args, out: StagedOutputs, manifest: dict) -> None:
    net = _load(args)
    summary = netstats.summarize(net).to_dict()
    for side in ("user", "item"):
        dist = netstats.degree_distribution(net, side, k_min=args.k_min)
        summary[f"{side}_exponent"] = dist.exponent
        netstats.write_curve_csv(dist.rows(), out.path(f"degree_{side}.csv"))
        prof = netstats.knn_by_degree(net, side)
        netstats.write_curve_csv(prof.rows(), out.path(f"knn_{side}.csv"))
    summary["degree_correlation"] = netstats.degree_correlation(net)
    summary["k_min"] = args.k_min

    if args.null_realizations:
        acc = {"user": {}, "item": {}}
        corr = []
        for r in range(args.null_realizations):
            null, _ = nullmodel.reshuffle(net, seed=np.random.SeedSequence(args.seed, spawn_key=(r,)))
            corr.append(netstats.degree_correlation(null))
            for side in ("user", "item"):
                prof = netstats.knn_by_degree(null, side)
                for k, v, c in prof.rows():
                    s = acc[side].setdefault(k, [0.0, 0])
                    s[0] += v
                    s[1] += c
        for side in ("user", "item"):
            rows = [(k, s[0] / args.null_realizations, s[1]) for k, s in sorted(acc[side].items())]
            netstats.write_curve_csv(rows, out.path(f"knn_{side}_null.csv"))
        summary["null_degree_correlations"] = corr
        manifest["parameters"]["null_attempts"] = 3 * net.link_count
    _write_json(out, "summary.json", summary)


def cmd_generate(args, out: StagedOutputs, manifest: dict) -> None:
    names = [f for f in synthgen.GeneratorConfig.__dataclass_fields__ if f != "seed"]
    try:
        cfg = synthgen.GeneratorConfig(**{k: getattr(args, k) for k in names}, seed=args.seed)
        cfg.check()
        net, report = synthgen.generate(cfg)
    except ValueError as exc:
        raise CommandError(str(exc)) from exc
    _write_network(out, net)
    _write_json(out, "report.json", report)


def cmd_reshuffle(args, out: StagedOutputs, manifest: dict) -> None:
    net = _load(args)
    attempts = 3 * net.link_count if args.attempts is None else args.attempts
    manifest["parameters"]["attempts"] = attempts
    null, report = nullmodel.reshuffle(net, attempts, args.seed)
    _write_network(out, null)
    rep = report.to_dict()
    rep["w"] = null.link_count
    rep["correlation_before"] = netstats.degree_correlation(net)
    rep["correlation_after"] = netstats.degree_correlation(null)
    _write_json(out, "report.json", rep)


def cmd_recommend(args, out: StagedOutputs, manifest: dict) -> None:
    net = _load(args)
    if args.users:
        index = {uid: k for k, uid in enumerate(net.user_ids)}
        missing = [u for u in args.users if u not in index]
        if missing:
            raise CommandError(f"unknown user ids: {', '.join(missing[:5])}")
        users = np.array([index[u] for u in args.users], dtype=np.int64)
    else:
        users = np.arange(net.user_count)
    if args.engine == "ucf":
        usim = recsys.user_similarity(net)
        a = net.matrix()
        scores = recsys.drop_purchased((usim[users] @ a.astype(np.float64)).tocsr(), a[users])
    else:
        sim = recsys.item_similarity(net)
        if args.topk is not None:
            sim = recsys.item_similarity_topk(sim, args.topk)
        scores = recsys.score_matrix(net, sim, users)
    with out.open("recommendations.csv") as fh:
        fh.write("user,rank,item,score\n")
        for row, u in enumerate(users.tolist()):
            lo, hi = scores.indptr[row], scores.indptr[row + 1]
            vec = recsys.ScoreVector(u, scores.indices[lo:hi], scores.data[lo:hi])
            rec = recsys.top_l(vec, args.L)
            for rank, (item, score) in enumerate(zip(rec.items.tolist(), rec.scores.tolist()), start=1):
                fh.write(f"{net.user_ids[u]},{rank},{net.item_ids[item]},{score!r}\n")


def _run_grid(args, net, strategies, R_values, out: StagedOutputs, manifest: dict) -> None:
    try:
        results = promotion.sweep(
            net,
            strategies,
            R_values,
            L=args.L,
            realizations=args.realizations,
            master_seed=args.seed,
            engine=args.engine,
            topk=args.topk,
            threads=args.threads,
        )
    except ValueError as exc:
        raise CommandError(str(exc)) from exc
    name = "sweep.csv" if args.command == "sweep" else "promote.csv"
    with out.open(name) as fh:
        promotion.write_sweep_csv(results, fh)
    _write_json(
        out,
        "samples.json",
        [{"strategy": r.strategy.label, "R": r.R, "L": r.L, "H": list(r.H)} for r in results],
    )


def cmd_promote(args, out: StagedOutputs, manifest: dict) -> None:
    net = _load(args)
    try:
        promotion.PromotionStrategy.parse(args.strategy, 1)
    except ValueError as exc:
        raise CommandError(str(exc)) from exc
    _run_grid(args, net, [args.strategy], [args.R], out, manifest)


def cmd_sweep(args, out: StagedOutputs, manifest: dict) -> None:
    net = _load(args)
    strategies = list(args.strategies or []) + list(args.tau_grid or [])
    try:
        for s in strategies:
            promotion.PromotionStrategy.parse(s, 1)
    except ValueError as exc:
        raise CommandError(str(exc)) from exc
    _run_grid(args, net, strategies, args.R_grid, out, manifest)


COMMANDS = {
    "stats": cmd_stats,
    "generate": cmd_generate,
    "reshuffle": cmd_reshuffle,
    "recommend": cmd_recommend,
    "promote": cmd_promote,
    "sweep": cmd_sweep,
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def main(argv=None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    seed_generated = False
    if args.seed is None:
        args.seed = secrets.randbits(63)
        seed_generated = True

    params = {k: v for k, v in vars(args).items() if k not in ("verbose",)}
    inputs = {}
    for key in ("input", "user_map", "item_map", "config"):
        path = getattr(args, key, None)
        if path and os.path.isfile(path):
            inputs[path] = sha256_file(path)
    manifest = {
        "command": args.command,
        "argv": list(sys.argv[1:] if argv is None else argv),
        "parameters": params,
        "seed": args.seed,
        "seed_generated": seed_generated,
        "inputs": inputs,
        "versions": {
            "tool": _version(),
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "started": _now(),
    }

    out = StagedOutputs(args.output_dir)
    t0 = time.perf_counter()
    try:
        COMMANDS[args.command](args, out, manifest)
        manifest["finished"] = _now()
        manifest["wall_time_s"] = time.perf_counter() - t0
        manifest["outputs"] = out.digests()
        _write_json(out, "manifest.json", manifest)
        out.commit()
    except CommandError as exc:
        out.discard()
        print(f"coldpromo {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except BaseException:
        out.discard()
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
