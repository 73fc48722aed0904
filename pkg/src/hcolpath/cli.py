"""Command-line front end.

Exit status: 0 success or pass, 1 failed check or sampler error,
2 bad input, I/O error or an instance too large to verify exactly.
"""

from __future__ import annotations

import argparse
import io
import json
import sys

import numpy as np

from . import __version__
from .analysis import ExactEvolver, predicted_mixing_bound, start_panel, two_path_obstruction
from .chains import KINDS, OVERRIDABLE, make_params, run_chain, schedule_for
from .coupling import disagreement_profile
from .errors import CapExceeded, EmptySupport, HColError
from .hgraph import BUILTIN_NAMES, ColourGraph, builtin, has_all_two_paths, load_graph
from .seeding import rng_for
from .segment import count_colourings, enumerate_state_space
from . import suites as S


def _parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--builtin", choices=BUILTIN_NAMES, help="named colour graph")
    g.add_argument("--file", help="colour graph file (JSON or 'q N' / 'edge i j' lines)")
    p.add_argument("--q", type=int, help="size parameter of the builtin graph")
    p.add_argument("--chain", choices=KINDS, default="anyorder")
    p.add_argument("--n", type=int, help="number of path sites")
    p.add_argument("--scans", type=int, help="number of scans (scan chains)")
    p.add_argument("--steps", type=int, help="number of block updates (rnd chain)")
    p.add_argument("--seed", type=int, default=0, help="64-bit run seed")
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--class", dest="cls", choices=("auto", "omega1", "omega2"), default="auto")
    for key in OVERRIDABLE:
        p.add_argument(f"--override-{key}", type=int, dest=f"ov_{key}", metavar="N")
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    return p


def build_parser() -> argparse.ArgumentParser:
    parent = _parent()
    ap = argparse.ArgumentParser(prog="hcolpath", description=__doc__.splitlines()[0] if __doc__ else None)
    ap.add_argument("--version", action="version", version=f"hcolpath {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    graph = sub.add_parser("graph", help="colour graph utilities")
    gsub = graph.add_subparsers(dest="graph_command", required=True)
    gsub.add_parser("inspect", parents=[parent], help="degree, bipartition, two-path condition and chain constants")

    sub.add_parser("sample", parents=[parent], help="run a chain").add_argument(
        "--record-every", type=int, default=0, help="record the state every K scans/steps")

    mix = sub.add_parser("mix", parents=[parent], help="exact TV-to-uniform curve from a panel of starts")
    mix.add_argument("--starts", type=int, default=10, help="random starts besides the two lexicographic extremes")
    mix.add_argument("--cap", type=int, default=20000, help="largest state space to enumerate")

    ver = sub.add_parser("verify", parents=[parent], help="run a verification suite")
    ver.add_argument("--suite", required=True, help=", ".join(S.SUITES))
    ver.add_argument("--pairs", type=int, default=20, help="adjacent pairs for rnd-contraction")
    ver.add_argument("--cap", type=int, default=20000)

    en = sub.add_parser("enumerate", parents=[parent], help="count (and optionally list) the colourings")
    en.add_argument("--list", action="store_true")
    en.add_argument("--cap", type=int, default=10**6)

    cp = sub.add_parser("couple", parents=[parent], help="exact disagreement profile of a block coupling")
    cp.add_argument("--length", type=int, required=True, help="block length l")
    cp.add_argument("--c1", type=int, required=True)
    cp.add_argument("--c2", type=int, required=True)
    cp.add_argument("--right", type=int, default=None, help="right boundary colour (omit for a free end)")
    cp.add_argument("--stride", type=int, default=None, help="1 = greedy; default s = 4q+1")
    return ap


class InputError(Exception):
    pass


def _graph(args, default: ColourGraph | None = None) -> ColourGraph:
    if args.file:
        try:
            with open(args.file, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read {args.file}: {exc.strerror}") from None
        return load_graph(text, name=args.file)
    if args.builtin:
        return builtin(args.builtin, args.q)
    if default is not None:
        return default
    raise InputError("give --builtin or --file")


def _overrides(args) -> dict:
    return {k: getattr(args, f"ov_{k}") for k in OVERRIDABLE if getattr(args, f"ov_{k}") is not None}


def _meta(h, params, args) -> dict:
    meta = {"version": __version__, "graph": h.name, "graph_digest": h.digest(), "seed": args.seed}
    if params is not None:
        meta["params"] = params.to_json()
    return meta


def _emit(args, text: str):
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(meta: dict, header: list[str], rows) -> str:
    buf = io.StringIO(newline="")
    for key, val in meta.items():
        buf.write(f"# {key}: {json.dumps(val, sort_keys=True)}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_cell(v) for v in row) + "\n")
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def cmd_graph_inspect(args) -> int:
    h = _graph(args)
    two, witness = has_all_two_paths(h)
    part = h.bipartition
    info = {
        "graph": h.name,
        "graph_digest": h.digest(),
        "q": h.q,
        "max_degree": h.max_degree,
        "connected": True,
        "bipartite": part.is_bipartite,
        "classes": [sorted(c) for c in part.classes()] if part.is_bipartite else None,
        "odd_cycle_witness": list(part.witness) if part.witness else None,
        "two_path": two,
        "two_path_witness": list(witness) if witness else None,
        "version": __version__,
    }
    obs = two_path_obstruction(h)
    if obs.found:
        info["obstruction_pair"] = list(obs.pair)
    ov = _overrides(args)
    info["params"] = {k: make_params(h, k, ov, args.cls).to_json() for k in KINDS}
    if args.format == "json":
        _emit(args, _dump_json(info))
        return 0
    p = info["params"]
    lines = [
        f"graph        {h.name}  ({h.digest()})",
        f"q            {h.q}",
        f"max degree   {h.max_degree}",
        "connected    yes",
        f"bipartite    {'yes ' + str(info['classes']) if part.is_bipartite else 'no'}",
        f"two-path     {'yes' if two else 'no, witness ' + str(tuple(witness))}",
        f"anyorder     l1={p['anyorder']['l1']}",
        f"fixedorder   s={p['fixedorder']['s']} beta={p['fixedorder']['beta']} u={p['fixedorder']['u']} "
        f"l2={p['fixedorder']['l2']}",
        f"rnd          s={p['rnd']['s']} gamma={p['rnd']['gamma']} w={p['rnd']['w']}",
    ]
    if ov:
        lines.append(f"overrides    {sorted(ov)}")
    _emit(args, "\n".join(lines) + "\n")
    return 0


def _need_n(args) -> int:
    if args.n is None or args.n < 1:
        raise InputError("--n must be a positive integer")
    return args.n


def cmd_sample(args) -> int:
    h = _graph(args)
    n = _need_n(args)
    params = make_params(h, args.chain, _overrides(args), args.cls)
    t = args.steps if args.chain == "rnd" else args.scans
    if t is None:
        t = args.scans if args.scans is not None else (args.steps or 1)
    rng = rng_for(args.seed)
    try:
        final, traj = run_chain(h, params, n, t, rng, record_every=args.record_every)
    except EmptySupport as exc:
        print(f"error: empty support: {exc}", file=sys.stderr)
        return 1
    if not traj:
        traj = [(t, final)]
    meta = _meta(h, params, args)
    if args.format == "json":
        meta.update({"n": n, "t": t, "final": list(final), "trajectory": [[s, list(x)] for s, x in traj]})
        _emit(args, _dump_json(meta))
    else:
        header = ["t"] + [f"site_{j}" for j in range(1, n + 1)]
        _emit(args, _csv(meta, header, [[s, *x] for s, x in traj]))
    return 0


def cmd_mix(args) -> int:
    h = _graph(args)
    n = _need_n(args)
    params = make_params(h, args.chain, _overrides(args), args.cls)
    bound = predicted_mixing_bound(args.chain, h, n, args.eps, params)
    t_max = args.steps if args.chain == "rnd" else args.scans
    t_max = t_max if t_max is not None else bound.value
    try:
        ev = ExactEvolver(h, params, n, args.cap)
    except CapExceeded as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    starts = start_panel(h, n, params.cls, rng_for(args.seed), args.starts)
    p = np.stack([ev.point_mass(x) for x in starts])
    rows = [(0, float(ev.tv(p).max()))]
    for t in range(1, t_max + 1):
        p = ev.step(p)
        rows.append((t, float(ev.tv(p).max())))
    hit = next((t for t, tv in rows if t > 0 and tv <= args.eps), None)
    meta = _meta(h, params, args)
    meta.update({"states": ev.size, "starts": len(starts), "predicted_bound": bound.value, "bound_unit": bound.unit,
                 "observed_mixing_time": hit, "eps": args.eps})
    if args.format == "json":
        meta["curve"] = [[t, tv] for t, tv in rows]
        _emit(args, _dump_json(meta))
    else:
        _emit(args, _csv(meta, ["t", "tv"], rows))
    return 0


def cmd_verify(args) -> int:
    name = args.suite
    if name not in S.SUITES:
        raise InputError(f"unknown suite {name!r}; choose from {', '.join(S.SUITES)}")
    ov = _overrides(args) or None
    rng = rng_for(args.seed)
    given = [_graph(args)] if (args.builtin or args.file) else None
    iset = builtin("independent_set")
    if name == "dobrushin":
        res = S.suite_dobrushin(given or S.builtin_panel())
    elif name == "obstruction":
        res = S.suite_obstruction(given or S.builtin_panel())
    elif name == "greedy":
        res = S.suite_greedy((given or [iset])[0])
    elif name == "linecoup":
        res = S.suite_linecoup(given or [builtin("clique", 3), iset])
    elif name == "smallcoup":
        res = S.suite_smallcoup((given or [iset])[0], (args.n or 18,))
    elif name == "rnd-contraction":
        res = S.suite_rnd_contraction((given or [iset])[0], args.n or 20000, rng, args.pairs, ov)
    elif name == "identities":
        res = S.suite_identities()
    elif name == "stationarity":
        res = S.suite_stationarity(given or [builtin("clique", 3), iset], args.n or 8, ov)
    else:
        h = (given or [builtin("clique", 3)])[0]
        res = S.suite_thm1_tv(h, args.n or 12, args.eps, rng, ov, args.cap)
    if args.format == "json":
        out = res.to_json()
        out.update({"version": __version__, "seed": args.seed, "overrides": sorted(ov or {})})
        _emit(args, _dump_json(out))
    else:
        _emit(args, res.table() + "\n")
    return res.status


def cmd_enumerate(args) -> int:
    h = _graph(args)
    n = _need_n(args)
    count = count_colourings(h, n, args.cls)
    meta = _meta(h, None, args)
    meta.update({"n": n, "class": args.cls, "count": count})
    if not args.list:
        if args.format == "json":
            _emit(args, _dump_json(meta))
        else:
            _emit(args, f"{count}\n")
        return 0
    try:
        states = enumerate_state_space(h, n, args.cls, args.cap)
    except CapExceeded as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    if args.format == "json":
        meta["states"] = states.tolist()
        _emit(args, _dump_json(meta))
    else:
        _emit(args, _csv(meta, [f"site_{j}" for j in range(1, n + 1)], states.tolist()))
    return 0


def cmd_couple(args) -> int:
    h = _graph(args)
    stride = args.stride or 4 * h.q + 1
    for c in (args.c1, args.c2, args.right):
        if c is not None and not 0 <= c < h.q:
            raise InputError(f"colour {c} outside 0..{h.q - 1}")
    try:
        prof = disagreement_profile(h, args.length, args.c1, args.c2, args.right, stride)
    except EmptySupport as exc:
        print(f"error: empty support: {exc}", file=sys.stderr)
        return 1
    l = args.length
    if stride == 1:
        r = 1.0 - 1.0 / h.max_degree**2
        bounds = [r ** min(j, l - 1) for j in range(1, l + 1)]
    else:
        r = 1.0 - 1.0 / h.q**stride
        bounds = [r ** (j // stride) for j in range(1, l + 1)]
    rows = [(j, p, b, b - p) for j, (p, b) in enumerate(zip(prof.probs, bounds), start=1)]
    meta = _meta(h, None, args)
    meta.update({"length": l, "c1": args.c1, "c2": args.c2, "right": args.right, "stride": stride})
    if args.format == "json":
        meta["profile"] = [list(r) for r in rows]
        _emit(args, _dump_json(meta))
    else:
        _emit(args, _csv(meta, ["j", "p_exact", "bound", "slack"], rows))
    return 0


COMMANDS = {
    "sample": cmd_sample,
    "mix": cmd_mix,
    "verify": cmd_verify,
    "enumerate": cmd_enumerate,
    "couple": cmd_couple,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = cmd_graph_inspect if args.command == "graph" else COMMANDS[args.command]
    try:
        return handler(args)
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HColError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
