"""Command-line client for the experiment pipeline.

The CLI is a thin client: every subcommand builds a request, sends it
to the service (an in-process instance by default, or a remote server
via --server), and prints the response summary. Artifacts are written
by the service into the output directory.

Exit codes: 0 ok, 1 transport or unexpected failure, 2 config error,
3 degenerate hull, 4 missing prior artifacts, 5 goal id outside the
cut goal space.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

from .experiment import ExperimentConfig

STAGE_ENDPOINTS = {
    "goalspace": "/goalspace",
    "learn": "/learn",
    "evaluate": "/evaluate",
    "abundance": "/abundance",
    "cma-bench": "/cma-bench",
}


def _set_by_path(doc: dict, dotted: str, raw: str) -> None:
    keys = dotted.split(".")
    node = doc
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ValueError(f"cannot override through non-object field {key!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node[keys[-1]] = value


def build_config(args) -> ExperimentConfig:
    doc: dict = {}
    if args.config:
        doc = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        doc["seed"] = args.seed
    if "seed" not in doc:
        raise ValueError("a seed is required: pass --seed or put one in the config file")
    for override in args.set or []:
        if "=" not in override:
            raise ValueError(f"--set expects key=value, got {override!r}")
        key, raw = override.split("=", 1)
        _set_by_path(doc, key, raw)
    return ExperimentConfig.model_validate(doc)


def make_client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # in-process service instance; same code path as a remote server
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _print_summary(stage: str, body: dict) -> None:
    print(f"{stage}: config_hash={body['config_hash']} seed={body['seed']}")
    summary = body.get("summary", {})
    for key in sorted(summary):
        value = summary[key]
        if isinstance(value, (list, dict)):
            continue
        print(f"  {key}: {value}")
    if stage == "learn":
        for snap in summary.get("snapshots", []):
            print(f"  samples {snap['samples']}: mean_error {snap['mean_error']:.6f}")
        cut_err = summary.get("error_cut_plain")
        if cut_err is not None:
            print(
                "  convex vs cut: "
                f"{summary['error_convex_plain']:.6f} vs {cut_err:.6f} (plain), "
                f"{summary['error_convex_feedback']:.6f} vs {summary['error_cut_feedback']:.6f} (feedback)"
            )
    if stage == "abundance":
        for goal in summary.get("goals", []):
            if goal.get("skipped"):
                print(f"  goal {goal['goal_id']}: skipped (too few samples)")
            else:
                print(
                    f"  goal {goal['goal_id']}: variance {goal['baseline_variance']:.3e} -> "
                    f"{goal['cma_variance']:.3e}, error {goal['baseline_error']:.4f} -> "
                    f"{goal['cma_error']:.4f}"
                )
    if stage == "cma-bench":
        for name, res in summary.get("results", {}).items():
            print(
                f"  {name}: best_f={res['best_f']:.3e} evals={res['evaluations']} "
                f"reached={res['reached']}"
            )
    for f in body.get("files", []):
        print(f"  wrote {f}")


def run_stage(args) -> int:
    try:
        config = build_config(args)
    except Exception as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    payload: dict = {"config": config.model_dump(mode="json"), "out_dir": str(args.out)}
    if args.command == "abundance" and args.goal_ids:
        payload["goal_ids"] = args.goal_ids
    if args.command == "evaluate":
        payload["use_feedback"] = bool(args.use_feedback)
    try:
        with make_client(args.server) as client:
            response = client.post(STAGE_ENDPOINTS[args.command], json=payload)
    except httpx.HTTPError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 1
    if response.status_code >= 400:
        try:
            detail = response.json()["detail"]
            code, message = int(detail["code"]), detail["message"]
        except Exception:
            code, message = 1, response.text
        print(f"error: {message}", file=sys.stderr)
        return code
    _print_summary(args.command, response.json())
    return 0


def run_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="musclearm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON experiment config file")
        p.add_argument("--seed", type=int, help="experiment seed (required if not in config)")
        p.add_argument("--out", required=True, help="artifact output directory")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config field, e.g. babble.total_samples=4000")
        p.add_argument("--server", help="base URL of a running service; default runs in-process")

    add_common(sub.add_parser("goalspace", help="sample postures, build hull and goal grid"))
    add_common(sub.add_parser("learn", help="run the goal babbling session and evaluations"))
    p_eval = sub.add_parser("evaluate", help="re-evaluate the stored model")
    add_common(p_eval)
    p_eval.add_argument("--use-feedback", action="store_true")
    p_ab = sub.add_parser("abundance", help="query motor abundance at selected goals")
    add_common(p_ab)
    p_ab.add_argument("--goal-ids", type=int, nargs="*", help="cut-space goal ids (default: auto 10)")
    add_common(sub.add_parser("cma-bench", help="optimizer benchmark on test functions"))

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8080)

    args = parser.parse_args(argv)
    if args.command == "serve":
        return run_serve(args)
    return run_stage(args)


if __name__ == "__main__":
    sys.exit(main())
