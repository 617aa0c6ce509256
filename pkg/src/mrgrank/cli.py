"""Command line entry points.

    mrgrank build -c config.json --posts posts.jsonl --users users.jsonl -o session.bin
    mrgrank solve session.bin --method {exact|mc}
    mrgrank serve session.bin --port 8080
    mrgrank export-svg session.bin --flows src1,src2 -o flows.svg
    mrgrank synth -o data_dir

MRGRANK_SEED overrides the configured RNG seed for every subcommand.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

log = logging.getLogger("mrgrank")


def _apply_seed_override(session):
    seed = os.environ.get("MRGRANK_SEED")
    if seed is not None:
        session.cfg.rng_seed = int(seed)
    return session


def cmd_build(args) -> int:
    from .session import Session
    session = Session.from_corpus_files(args.posts, args.users, args.config)
    _apply_seed_override(session)
    session.save(args.output)
    log.info("built session with %d items -> %s",
             session.graph.n_items, args.output)
    return 0


def cmd_solve(args) -> int:
    from .session import Session
    session = _apply_seed_override(Session.load(args.session))
    state = session.solve(method=args.method)
    session.save(args.session)
    print("method=%s iterations=%s residual=%.3e"
          % (state.method, state.iteration_count, state.residual or 0.0))
    for kind in ("post", "user", "hashtag"):
        for row in session.rankings(kind, top=args.top):
            print("%-8s %-24s %.6e" % (kind, row["id"], row["score"]))
    return 0


def cmd_serve(args) -> int:
    import uvicorn
    from .service import create_app
    from .session import Session
    session = _apply_seed_override(Session.load(args.session))
    if session.state is None:
        session.solve(method="mc")
    uvicorn.run(create_app(session), host=args.host, port=args.port,
                log_level="warning")
    return 0


def cmd_export_svg(args) -> int:
    from .flows import flows_svg, bundle_paths, route_flows
    from .session import Session
    session = _apply_seed_override(Session.load(args.session))
    if session.state is None:
        session.solve(method="mc")
    sources = [s for s in args.flows.split(",") if s]
    doc = session.propagation_flows(sources, top_k=args.top)
    # re-route from raw flow values so the SVG writer gets FlowPath objects
    layout = session.layout(doc["kind"], doc["level"])
    centers = {session.cluster_id(doc["kind"], doc["level"], int(k)): v
               for k, v in layout.cluster_centers.items()}
    paths = bundle_paths(route_flows(doc["flows"], centers, top_k=args.top),
                         canvas=layout.canvas)
    with open(args.output, "w") as f:
        f.write(flows_svg(paths, canvas=layout.canvas))
    log.info("wrote %s (%d paths)", args.output, len(paths))
    return 0


def cmd_synth(args) -> int:
    from .synth import write_corpus
    planted = write_corpus(args.output, n_posts=args.posts, n_users=args.users,
                           n_hashtags=args.hashtags, seed=args.seed)
    print("wrote corpus to %s (%d planted per kind)"
          % (args.output, len(planted["post"])))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mrgrank")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build a session from corpus files")
    b.add_argument("-c", "--config", default=None)
    b.add_argument("--posts", required=True)
    b.add_argument("--users", required=True)
    b.add_argument("-o", "--output", required=True)
    b.set_defaults(func=cmd_build)

    s = sub.add_parser("solve", help="score a session and print top items")
    s.add_argument("session")
    s.add_argument("--method", choices=("exact", "mc"), default="mc")
    s.add_argument("--top", type=int, default=10)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("serve", help="serve the JSON API")
    v.add_argument("session")
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8080)
    v.set_defaults(func=cmd_serve)

    e = sub.add_parser("export-svg", help="render propagation flows to SVG")
    e.add_argument("session")
    e.add_argument("--flows", required=True,
                   help="comma-separated source cluster ids")
    e.add_argument("--top", type=int, default=10)
    e.add_argument("-o", "--output", required=True)
    e.set_defaults(func=cmd_export_svg)

    y = sub.add_parser("synth", help="generate the bundled synthetic corpus")
    y.add_argument("-o", "--output", required=True)
    y.add_argument("--posts", type=int, default=500)
    y.add_argument("--users", type=int, default=60)
    y.add_argument("--hashtags", type=int, default=40)
    y.add_argument("--seed", type=int, default=7)
    y.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
