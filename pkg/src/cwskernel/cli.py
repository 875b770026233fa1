"""Operator CLI. Every subcommand except ``serve`` is a thin HTTP client of a running kernel.

Exit status: 0 success, 1 application error (including an unreachable
server), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import uuid
from pathlib import Path
from typing import Any, Callable, Sequence, TextIO

import httpx

from .envelope import DocumentEnvelope, canonical_json

DEFAULT_URL = "http://127.0.0.1:8000"


class CommandError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cws", description="Composite web-service kernel client")
    parser.add_argument("--url", default=os.environ.get("CWS_URL", DEFAULT_URL), help="kernel base URL")
    parser.add_argument("--token", default=os.environ.get("CWS_TOKEN"), help="bearer token for mutating calls")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("serve", help="start the kernel and builtin services")
    p.add_argument("--config", "-c", help="JSON configuration file")
    p.add_argument("--host")
    p.add_argument("--port", type=int)

    p = sub.add_parser("register", help="register a service descriptor")
    p.add_argument("-f", "--file", required=True)

    p = sub.add_parser("compose", help="define a composition")
    p.add_argument("-f", "--file", required=True)

    p = sub.add_parser("run", help="execute a composition on a text file")
    p.add_argument("composition")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile")

    p = sub.add_parser("search", help="full-text search")
    p.add_argument("query")
    p.add_argument("--limit", type=int, default=10)

    p = sub.add_parser("sim", help="similarity of two terms")
    p.add_argument("t1")
    p.add_argument("t2")

    p = sub.add_parser("near", help="nearest associates of a term")
    p.add_argument("term")
    p.add_argument("-k", type=int, default=10)

    p = sub.add_parser("sync", help="two-way snapshot sync with a peer kernel")
    p.add_argument("--peer", required=True)
    return parser


def _check(response: httpx.Response) -> Any:
    if response.is_success:
        return response.json() if response.content else None
    try:
        body = response.json()
        message = f"{body.get('code', response.status_code)}: {body.get('message', response.text)}"
    except ValueError:
        message = f"HTTP {response.status_code}: {response.text}"
    raise CommandError(message)


def _load_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, ValueError) as exc:
        raise CommandError(f"cannot read {path}: {exc}") from None


def _render_run(envelope: dict, out: TextIO) -> None:
    if envelope.get("summary") is not None:
        for sentence in envelope["summary"]:
            print(sentence, file=out)
    elif envelope.get("keywords") is not None:
        for term, score in envelope["keywords"]:
            print(f"{term}\t{score:.6f}", file=out)
    else:
        print(canonical_json(envelope).decode("utf-8"), file=out)


def run_command(args: argparse.Namespace, client: httpx.Client, peer_factory: Callable[[str], httpx.Client], out: TextIO) -> None:
    headers = {"Authorization": f"Bearer {args.token}"} if args.token else {}

    if args.command == "register":
        print(_check(client.post("/services", json=_load_json(args.file), headers=headers))["name"], file=out)
    elif args.command == "compose":
        print(_check(client.post("/compositions", json=_load_json(args.file), headers=headers))["name"], file=out)
    elif args.command == "run":
        try:
            text = Path(args.infile).read_text(encoding="utf-8")
        except OSError as exc:
            raise CommandError(f"cannot read {args.infile}: {exc}") from None
        envelope = DocumentEnvelope(id=f"{Path(args.infile).stem}-{uuid.uuid4().hex[:8]}", text=text)
        result = _check(client.post(f"/compositions/{args.composition}/execute", content=canonical_json(envelope.to_dict())))
        if args.outfile:
            Path(args.outfile).write_bytes(canonical_json(result["envelope"]))
        _render_run(result["envelope"], out)
    elif args.command == "search":
        for hit in _check(client.get("/search", params={"q": args.query, "limit": args.limit}))["hits"]:
            print(f"{hit['doc_id']}\t{hit['score']:.6f}", file=out)
    elif args.command == "sim":
        print(f"{_check(client.get('/vectors/similarity', params={'t1': args.t1, 't2': args.t2}))['similarity']:.8f}", file=out)
    elif args.command == "near":
        for n in _check(client.get("/vectors/nearest", params={"t": args.term, "k": args.k}))["neighbours"]:
            print(f"{n['term']}\t{n['similarity']:.8f}", file=out)
    elif args.command == "sync":
        peer = peer_factory(args.peer)
        try:
            pulled = _check(client.post("/sync/import", content=peer.get("/sync/export").content, headers=headers))
            pushed = _check(peer.post("/sync/import", content=client.get("/sync/export").content, headers=headers))
        finally:
            if peer is not client:
                peer.close()
        print(f"pulled applied={pulled['applied']} skipped={pulled['skipped']} conflicts={pulled['conflicts']}", file=out)
        print(f"pushed applied={pushed['applied']} skipped={pushed['skipped']} conflicts={pushed['conflicts']}", file=out)


def serve(args: argparse.Namespace) -> None:
    import uvicorn

    from .api.app import create_app
    from .kernel import Kernel, KernelConfig

    config = KernelConfig.from_file(args.config) if args.config else KernelConfig()
    config.with_env()
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    uvicorn.run(create_app(Kernel(config)), host=config.host, port=config.port)


def main(
    argv: Sequence[str] | None = None,
    client: httpx.Client | None = None,
    peer_factory: Callable[[str], httpx.Client] | None = None,
    out: TextIO | None = None,
) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "serve":
        serve(args)
        return 0

    own = client is None
    client = client or httpx.Client(base_url=args.url, timeout=60.0)
    peer_factory = peer_factory or (lambda url: httpx.Client(base_url=url, timeout=60.0))
    try:
        run_command(args, client, peer_factory, out)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except httpx.HTTPError as exc:
        print(f"error: cannot reach {args.url}: {exc}", file=sys.stderr)
        return 1
    finally:
        if own:
            client.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
