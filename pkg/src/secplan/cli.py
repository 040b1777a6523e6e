"""Command-line interface.

Every pipeline reachable over HTTP is reachable here headlessly with
identical resulting artifacts; `--answers` files make interactive flows
scriptable. Engine errors print as ``error[code]: message`` on stderr with
exit code 1; usage errors exit 2 (argparse).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from secplan import __version__
from secplan.corpus import DocumentKind
from secplan.engine import Engine, load_config
from secplan.errors import EngineError, UsageError
from secplan.session_store import Session
from secplan.threat_agent import InteractiveAnswerSource, ScriptedAnswerSource

DEFAULT_ROOT = "secplan_data"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="secplan",
        description="Hardware security threat modeling and test plan generation engine.",
    )
    parser.add_argument("--version", action="version", version=f"secplan {__version__}")
    parser.add_argument(
        "--root",
        default=os.environ.get("SECPLAN_ROOT", DEFAULT_ROOT),
        help="engine data directory (default: %(default)s or $SECPLAN_ROOT)",
    )
    parser.add_argument(
        "--config",
        default=os.environ.get("SECPLAN_CONFIG"),
        help="engine config JSON (default: $SECPLAN_CONFIG, else <root>/config.json if present)",
    )
    parser.add_argument("--session", help="session id (default: the most recently created)")

    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="ingest a plain-text document into the session")
    p_ingest.add_argument("file", type=Path)
    p_ingest.add_argument(
        "--kind", required=True, choices=[k.value for k in DocumentKind]
    )
    p_ingest.add_argument("--title", help="document title (default: file name)")

    p_index = sub.add_parser("index", help="retrieval index operations")
    index_sub = p_index.add_subparsers(dest="index_command", required=True)
    index_sub.add_parser("build", help="embed all chunks and persist the index artifact")

    p_session = sub.add_parser("session", help="session lifecycle and interactive Q&A")
    session_sub = p_session.add_subparsers(dest="session_command", required=True)
    p_new = session_sub.add_parser("new", help="create a session")
    p_new.add_argument(
        "--flow", required=True, choices=["physical_supply_chain", "software_exploitable"]
    )
    session_sub.add_parser("list", help="list session ids")
    session_sub.add_parser("show", help="show session phase and progress")
    session_sub.add_parser("ask", help="print the next query to answer")
    p_answer = session_sub.add_parser("answer", help="answer the pending query")
    p_answer.add_argument("text", help="the answer text")

    p_run = sub.add_parser("run", help="run a flow headlessly or interactively")
    p_run.add_argument("flow", choices=["flow1", "flow2"])
    p_run.add_argument("--answers", type=Path, help="scripted answers file (JSON lines)")

    p_plan = sub.add_parser("plan", help="test plan operations")
    plan_sub = p_plan.add_subparsers(dest="plan_command", required=True)
    p_generate = plan_sub.add_parser("generate", help="gather capabilities and generate the plan")
    p_generate.add_argument("--answers", type=Path, help="scripted capability answers (JSON lines)")

    p_export = sub.add_parser("export", help="export an artifact")
    p_export.add_argument("artifact", choices=["threats", "policies", "plan"])
    p_export.add_argument(
        "--format",
        default="json",
        choices=["json", "structured_json", "markdown", "markdown_report"],
    )
    p_export.add_argument("--out", type=Path, help="write to file instead of stdout")

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8741)

    return parser


def _engine_for(args) -> Engine:
    config_path = args.config
    if config_path is None:
        candidate = Path(args.root) / "config.json"
        if candidate.exists():
            config_path = candidate
    return Engine(args.root, load_config(config_path))


def _current_session_file(root: str) -> Path:
    return Path(root) / "current_session"


def _resolve_session(args, engine: Engine) -> Session:
    session_id = args.session
    if session_id is None:
        pointer = _current_session_file(args.root)
        if pointer.exists():
            session_id = pointer.read_text(encoding="utf-8").strip()
    if not session_id:
        raise UsageError("no session selected; create one with `session new` or pass --session")
    return engine.load_session(session_id)


def _answer_source(answers: Path | None):
    if answers is not None:
        return ScriptedAnswerSource.from_file(answers)
    return InteractiveAnswerSource()


def _emit(data: bytes, out: Path | None) -> None:
    if out is not None:
        out.write_bytes(data)
        print(f"wrote {out} ({len(data)} bytes)")
    else:
        sys.stdout.write(data.decode("utf-8"))


def _cmd_ingest(args, engine: Engine) -> int:
    session = _resolve_session(args, engine)
    title = args.title or args.file.name
    doc = engine.ingest(session, args.file.read_bytes(), args.kind, title)
    print(f"ingested {doc.doc_id} kind={doc.kind.value} title={doc.title!r} chars={doc.byte_length}")
    return 0


def _cmd_index(args, engine: Engine) -> int:
    session = _resolve_session(args, engine)
    path, count = engine.build_index_artifact(session)
    print(f"index built: {count} chunks -> {path}")
    return 0


def _cmd_session(args, engine: Engine) -> int:
    if args.session_command == "new":
        session = engine.create_session(args.flow)
        Path(args.root).mkdir(parents=True, exist_ok=True)
        _current_session_file(args.root).write_text(session.session_id, encoding="utf-8")
        print(session.session_id)
        return 0
    if args.session_command == "list":
        for session_id in engine.store.list_sessions():
            print(session_id)
        return 0
    session = _resolve_session(args, engine)
    if args.session_command == "show":
        pending = engine.pending(session)
        print(f"session   {session.session_id}")
        print(f"flow      {session.flow}")
        print(f"phase     {session.phase}")
        print(f"events    {len(session.events)}")
        if pending:
            print(f"pending   [{pending['query'].query_id}] {pending['query'].text}")
        return 0
    if args.session_command == "ask":
        result = engine.ask(session)
        query = result["query"]
        if query is None:
            print("done: no further queries")
        else:
            print(f"[{query.query_id}] {query.text}")
        return 0
    if args.session_command == "answer":
        pending = engine.pending(session)
        if pending is None:
            engine.answer(session, "", args.text)  # surfaces NotPresented
            return 0
        result = engine.answer(session, pending["query"].query_id, args.text)
        print(f"recorded answer to {result['recorded']}")
        if result["queries_removed"]:
            print(f"queries removed as redundant: {', '.join(result['queries_removed'])}")
        return 0
    raise UsageError(f"unknown session command {args.session_command!r}")


def _cmd_run(args, engine: Engine) -> int:
    session = _resolve_session(args, engine)
    if args.flow == "flow1":
        artifact = engine.run_flow1(session, _answer_source(args.answers))
        summary = artifact["summary"]
        print(
            f"flow1 finished in {summary['iterations']} iterations: "
            + ", ".join(f"{v} {k}" for k, v in sorted(summary["by_status"].items()))
        )
        return 0
    artifact = engine.run_flow2(session)
    print(
        f"flow2 finished: {artifact['summary']['total_policies']} policies from "
        f"{artifact['summary']['elements_total']} design elements"
        + (" (degraded)" if artifact["degraded"] else "")
    )
    return 0


def _cmd_plan(args, engine: Engine) -> int:
    session = _resolve_session(args, engine)
    plan = engine.generate_plan(session, _answer_source(args.answers))
    print(f"plan {plan.plan_id}: {len(plan.cases)} cases, {len(plan.skipped)} skipped")
    return 0


def _cmd_export(args, engine: Engine) -> int:
    session = _resolve_session(args, engine)
    _emit(engine.export(session, args.artifact, args.format), args.out)
    return 0


def _cmd_serve(args, engine: Engine) -> int:
    import uvicorn

    from secplan.service import create_app

    app = create_app(args.root, engine.config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "index": _cmd_index,
    "session": _cmd_session,
    "run": _cmd_run,
    "plan": _cmd_plan,
    "export": _cmd_export,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        engine = _engine_for(args)
        return _COMMANDS[args.command](args, engine)
    except EngineError as err:
        print(f"error[{err.code}]: {err.message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
