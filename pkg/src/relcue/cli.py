"""Command-line client.

Every subcommand is a thin wrapper around one service endpoint.  By default
the service app runs in-process; --server points the same requests at a
running instance instead.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from .service.app import create_app

DEFAULT_CACHE_DIR = "llm-cache"
REQUEST_TIMEOUT = 600.0


def _call(server: str | None, method: str, path: str,
          body: dict | None = None) -> httpx.Response:
    if server:
        with httpx.Client(base_url=server, timeout=REQUEST_TIMEOUT) as client:
            return client.request(method, path, json=body)

    async def in_process() -> httpx.Response:
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://relcue.internal",
                                     timeout=REQUEST_TIMEOUT) as client:
            return await client.request(method, path, json=body)

    return asyncio.run(in_process())


def _fail(response: httpx.Response) -> int:
    try:
        payload = response.json()
    except json.JSONDecodeError:
        print(f"error: HTTP {response.status_code}", file=sys.stderr)
        return 1
    if isinstance(payload, dict) and "key" in payload:
        print(f"missing embedding key: {payload['key']}", file=sys.stderr)
    detail = payload.get("detail") if isinstance(payload, dict) else payload
    print(f"error: {detail}", file=sys.stderr)
    return 1


def _read_lines(path: str) -> list[str]:
    return [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line.strip()]


def _print_table(report: dict) -> None:
    print(f"{'K':>6}  {'R@K':>8}  {'mR@K':>8}")
    for k in sorted(report["recall"], key=int):
        print(f"{int(k):>6}  {report['recall'][k]:>8.4f}  "
              f"{report['mean_recall'][k]:>8.4f}")


def _format_table(report: dict) -> str:
    lines = [f"{'K':>6}  {'R@K':>8}  {'mR@K':>8}"]
    for k in sorted(report["recall"], key=int):
        lines.append(f"{int(k):>6}  {report['recall'][k]:>8.4f}  "
                     f"{report['mean_recall'][k]:>8.4f}")
    return "\n".join(lines) + "\n"


def _write_json(payload: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2,
                               ensure_ascii=True) + "\n", encoding="utf-8")


def cmd_gen_cues(args: argparse.Namespace) -> int:
    body = {
        "out": args.out,
        "cache_dir": args.cache,
        "guided": not args.unguided,
        "offline": args.offline,
    }
    if args.dataset:
        body["dataset"] = args.dataset
    if args.predicates:
        body["predicates"] = _read_lines(args.predicates)
    if args.classes:
        body["object_classes"] = _read_lines(args.classes)
    if args.model:
        body["model"] = args.model
    if args.report:
        body["report_out"] = args.report
    response = _call(args.server, "POST", "/cues/generate", body)
    if response.status_code != 200:
        return _fail(response)
    result = response.json()
    print(f"wrote {result['out']} ({result['entries']} entries)")
    report = result["report"]
    for name in ("cue_parse_failures", "weight_fallbacks", "ambiguous_filters"):
        if report.get(name):
            print(f"{name.replace('_', ' ')}: {report[name]}")
    return 0


def cmd_atlas_export(args: argparse.Namespace) -> int:
    response = _call(args.server, "POST", "/atlas/export", {"out_dir": args.out})
    if response.status_code != 200:
        return _fail(response)
    result = response.json()
    print(f"wrote {result['keys']} images to {result['out_dir']} "
          f"({result['degraded']} distance-degraded)")
    return 0


def cmd_render_spatial(args: argparse.Namespace) -> int:
    response = _call(args.server, "GET", f"/atlas/render/{args.key}")
    if response.status_code != 200:
        return _fail(response)
    out = Path(args.out or f"{args.key}.png")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(response.content)
    print(f"wrote {out}")
    return 0


def cmd_build_manifest(args: argparse.Namespace) -> int:
    body = {
        "dataset": args.dataset,
        "pack": args.pack,
        "out": args.out,
        "class_template": args.class_template,
        "all_pairs": args.all_pairs,
        "image_name": args.image_name,
        "encoder": args.encoder,
        "dim": args.dim,
    }
    if args.atlas_manifest:
        body["atlas_manifest"] = args.atlas_manifest
    if args.class_descriptions:
        body["class_descriptions"] = args.class_descriptions
    response = _call(args.server, "POST", "/manifest/build", body)
    if response.status_code != 200:
        return _fail(response)
    result = response.json()
    print(f"wrote {result['out']} ({result['entries']} keys)")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    modes = ([m.strip() for m in args.compare.split(",") if m.strip()]
             if args.compare else [args.mode])
    ablate = set(args.ablate or [])
    body = {
        "dataset": args.dataset,
        "pack": args.pack,
        "provider": {"kind": args.provider, "dim": args.mock_dim,
                     "path": args.archive},
        "modes": modes,
        "filter_on": args.filter == "on",
        "cue_off": "cue" in ablate,
        "spatial_off": "spatial" in ablate,
        "weight_off": "weight" in ablate,
        "k_values": [int(k) for k in args.k.split(",") if k.strip()],
        "class_template": args.class_template,
        "temperature": args.temperature,
        "all_pairs": args.all_pairs,
        "jobs": args.jobs,
    }
    if args.class_descriptions:
        body["class_descriptions"] = args.class_descriptions
    response = _call(args.server, "POST", "/evaluate", body)
    if response.status_code != 200:
        return _fail(response)
    result = response.json()
    reports = result["reports"]

    if len(modes) == 1:
        out = Path(args.out)
        report = reports[modes[0]]
        if args.format == "table":
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(_format_table(report), encoding="utf-8")
        else:
            _write_json(report, out)
        print(f"mode {modes[0]}:")
        _print_table(report)
        print(f"wrote {out}")
        return 0

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for mode in modes:
        _write_json(reports[mode], out_dir / f"{mode}.json")
        print(f"mode {mode}:")
        _print_table(reports[mode])
    delta = result["delta"]
    _write_json(delta, out_dir / "delta.json")
    base = delta["baseline"]
    for mode, diffs in delta["against"].items():
        for k in sorted(diffs["recall"], key=int):
            print(f"delta {mode}-{base} @{k}: "
                  f"R {diffs['recall'][k]:+.4f}  mR {diffs['mean_recall'][k]:+.4f}")
    print(f"wrote {len(modes)} reports + delta to {out_dir}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relcue",
        description="Zero-shot visual relation scoring pipeline.")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service (default: in-process)")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-cues",
                              help="query the language model for cue packs")
    gen.add_argument("--dataset", help="dataset JSON supplying the vocabularies")
    gen.add_argument("--predicates", help="file with one predicate per line")
    gen.add_argument("--classes", help="file with one object class per line")
    gen.add_argument("--out", required=True, help="cue pack output path")
    gen.add_argument("--cache", default=DEFAULT_CACHE_DIR,
                     help="LLM response cache directory")
    gen.add_argument("--model", help="chat model name")
    gen.add_argument("--unguided", action="store_true",
                     help="one wildcard entry per predicate")
    gen.add_argument("--offline", action="store_true",
                     help="serve strictly from cache; fail on a miss")
    gen.add_argument("--report", help="build report output path")
    gen.set_defaults(func=cmd_gen_cues)

    atlas = commands.add_parser("atlas", help="spatial layout image tools")
    atlas_sub = atlas.add_subparsers(dest="atlas_command", required=True)
    atlas_export = atlas_sub.add_parser("export",
                                        help="render every layout key to PNG")
    atlas_export.add_argument("--out", required=True, help="output directory")
    atlas_export.set_defaults(func=cmd_atlas_export)

    render = commands.add_parser("render-spatial",
                                 help="render one layout key to PNG")
    render.add_argument("key", help="canonical key, e.g. QM-HL-N-S")
    render.add_argument("--out", help="output file (default: <key>.png)")
    render.set_defaults(func=cmd_render_spatial)

    manifest = commands.add_parser("build-manifest",
                                   help="list every embedding a run needs")
    manifest.add_argument("--dataset", required=True)
    manifest.add_argument("--pack", required=True, help="cue pack path")
    manifest.add_argument("--out", required=True)
    manifest.add_argument("--atlas-manifest",
                          help="atlas manifest for spatial PNG names")
    manifest.add_argument("--class-template", default="photo",
                          choices=("photo", "plain"))
    manifest.add_argument("--all-pairs", action="store_true",
                          help="cover all ordered object pairs, not just GT")
    manifest.add_argument("--image-name", default="{image_id}.jpg",
                          help="filename template for image sources")
    manifest.add_argument("--class-descriptions",
                          help="JSON file of per-predicate descriptions")
    manifest.add_argument("--encoder", default="ViT-B/32")
    manifest.add_argument("--dim", type=int, default=512)
    manifest.set_defaults(func=cmd_build_manifest)

    evaluate = commands.add_parser("evaluate", help="score a dataset")
    evaluate.add_argument("--dataset", required=True)
    evaluate.add_argument("--pack", required=True, help="cue pack path")
    evaluate.add_argument("--out", required=True,
                          help="report file, or directory with --compare")
    evaluate.add_argument("--mode", default="recode",
                          choices=("recode", "recode_unguided", "cls", "clsde"))
    evaluate.add_argument("--compare",
                          help="comma-separated modes; writes one report each")
    evaluate.add_argument("--provider", default="mock",
                          choices=("mock", "archive"))
    evaluate.add_argument("--archive", help="embedding archive directory")
    evaluate.add_argument("--mock-dim", type=int, default=64)
    evaluate.add_argument("--filter", default="off", choices=("on", "off"),
                          help="apply LLM-derived predicate deny lists")
    evaluate.add_argument("--ablate", action="append",
                          choices=("cue", "spatial", "weight"),
                          help="disable one scoring component (repeatable)")
    evaluate.add_argument("--k", default="20,50,100",
                          help="comma-separated recall cutoffs")
    evaluate.add_argument("--class-template", default="photo",
                          choices=("photo", "plain"))
    evaluate.add_argument("--temperature", type=float, default=1.0)
    evaluate.add_argument("--all-pairs", action="store_true")
    evaluate.add_argument("--class-descriptions",
                          help="JSON file of per-predicate descriptions (clsde)")
    evaluate.add_argument("--jobs", type=int, default=1,
                          help="worker threads for scene scoring")
    evaluate.add_argument("--format", default="json", choices=("json", "table"),
                          help="single-mode report file format")
    evaluate.set_defaults(func=cmd_evaluate)

    serve = commands.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except httpx.HTTPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
