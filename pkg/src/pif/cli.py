"""Command-line front end: one verb per pipeline stage.

Each verb fronts a library operation, so anything the CLI can do a test
can do in-process. Exit codes are uniform across verbs: 0 on success, 1
when the inputs are at fault, 2 when the world is (a damaged recording
counts as the world: by the time corruption is detected, output is
already flowing). Results go to stdout, diagnostics to stderr, and
``--format json`` makes both machine-readable where it is offered.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import threading
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .classify import (
    Dataset,
    PipelineError,
    fit,
    load_model,
    loso_cv,
    predict,
    predict_subject,
    render_weight_figure,
    save_model,
)
from .features import (
    FEATURE_NAMES,
    SegmentStream,
    extract_features,
    feature_rows,
    read_feature_csv,
    read_signals,
    write_feature_csv,
)
from .session import ConfigError, SessionError, load_config, serve, serve_ui
from .session.estimators import MIN_CONTEXT
from .sim import CONSTRUCTS, Scenario, SimError, SubjectProfile, generate, story_pair
from .story import ParseErrors, lint, parse_file
from .story.runtime import Choose, IllegalEvent, NextPage, advance, render_page, start
from .transport import (
    CorruptRecording,
    Hub,
    NetInlet,
    Recorder,
    RecordingReader,
    TransportError,
    registry,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


class CliError(ValueError):
    """Bad arguments or inputs; maps to exit code 1."""


def _print_error(args, message: str) -> None:
    if getattr(args, "format", "text") == "json":
        print(json.dumps({"error": message}), file=sys.stderr)
    else:
        print(f"pif: {message}", file=sys.stderr)


def _emit(args, text: str, payload: dict) -> None:
    if getattr(args, "format", "text") == "json":
        print(json.dumps(payload, indent=1))
    else:
        print(text)


# lint


def cmd_lint(args) -> int:
    diagnostics = []
    for path in args.stories:
        try:
            graph = parse_file(path)
        except ParseErrors as exc:
            diagnostics.extend(exc.errors)
            continue
        diagnostics.extend(lint(graph))
    if args.format == "json":
        print(json.dumps({"diagnostics": [asdict(d) for d in diagnostics]}, indent=1))
    else:
        for diag in diagnostics:
            print(diag)
    # a clean story is silent; any finding at all fails the check
    return EXIT_INVALID if diagnostics else EXIT_OK


# play


def _parse_sets(pairs: list[str]) -> dict[str, float]:
    out = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep or not name:
            raise CliError(f"--set wants name=value, got {pair!r}")
        try:
            out[name] = float(value)
        except ValueError:
            raise CliError(f"--set {name}: {value!r} is not a number") from None
    return out


def cmd_play(args) -> int:
    """Terminal story session: enter advances, a number chooses, q quits.

    No director runs here, so automatic branches read whatever --set
    seeded (unset names fall back to 0). That is the point: authors can
    pin the physiology and step their branch logic by hand.
    """
    graph = parse_file(args.story)
    state, events = start(graph)
    if args.set:
        state = state.with_variables(_parse_sets(args.set))
    prompt = "> " if sys.stdin.isatty() else ""
    while True:
        if args.trace:
            for event in events:
                print(f"  .. {event}", file=sys.stderr)
        if state.ended:
            print("(the end)")
            return EXIT_OK
        print()
        print(render_page(state))
        for i, label in enumerate(state.choice_labels(), start=1):
            print(f"  [{i}] {label}")
        while True:  # reprompt until the state moves
            try:
                line = input(prompt).strip()
            except EOFError:
                return EXIT_OK
            if line in ("q", "quit"):
                return EXIT_OK
            if line == "":
                event = NextPage()
            elif line.isdigit():
                event = Choose(int(line) - 1)
            else:
                print("(enter advances, a choice number chooses, q quits)")
                continue
            try:
                state, events = advance(state, event)
                break
            except IllegalEvent as exc:
                print(f"({exc})")


# simulate


def cmd_simulate(args) -> int:
    if args.scenario:
        scenario = Scenario.load(args.scenario)
    else:
        scenario = story_pair(args.construct, duration=args.duration)
    if args.windows > 1:
        scenario = scenario.windowed(args.windows)
    scenario = scenario.spread(args.separability)
    profile = SubjectProfile.draw(args.subject, args.seed)
    summary = generate(profile, scenario).write(args.out)
    _emit(
        args,
        f"wrote {summary.n_samples} samples, {len(summary.per_stream)} streams, "
        f"{summary.duration:.1f} s to {args.out}",
        {
            "path": str(args.out),
            "scenario": scenario.name,
            "subject": args.subject,
            "seed": args.seed,
            "n_samples": summary.n_samples,
            "n_streams": len(summary.per_stream),
            "duration": summary.duration,
        },
    )
    return EXIT_OK


# features


def cmd_features(args) -> int:
    if "-" in args.recordings and len(args.recordings) > 1:
        raise CliError("stdin mixes poorly with file inputs; one at a time")
    if args.subject and len(args.recordings) > 1:
        raise CliError(
            "--subject applies to a single recording; with several, each file's name is its subject"
        )
    rows = []
    for path in args.recordings:
        if path == "-":
            if not args.subject:
                raise CliError("reading from stdin needs --subject")
            signals = read_signals(sys.stdin, "<stdin>")
            subject = args.subject
        else:
            with open(path, encoding="utf-8") as fh:
                signals = read_signals(fh, str(path))
            subject = args.subject or Path(path).stem
        rows.extend(feature_rows(signals, subject))
    if not rows:
        raise CliError("no SEGMENT markers found; nothing to extract")
    write_feature_csv(args.out, rows)
    subjects = sorted({row.subject for row in rows})
    _emit(
        args,
        f"wrote {len(rows)} rows x {len(FEATURE_NAMES)} features "
        f"({len(subjects)} subjects) to {args.out}",
        {
            "path": str(args.out),
            "n_rows": len(rows),
            "n_features": len(FEATURE_NAMES),
            "subjects": subjects,
        },
    )
    return EXIT_OK


# train


def cmd_train(args) -> int:
    table = read_feature_csv(args.features)
    dataset = Dataset(
        names=table.names,
        matrix=table.matrix,
        subjects=table.subjects,
        labels=table.labels,
        construct=args.construct,
    )
    result = loso_cv(dataset, keep_variance=args.keep_variance)
    model = fit(dataset, keep_variance=args.keep_variance)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "model": out / f"{args.construct}-model.json",
        "loso": out / f"{args.construct}-loso.csv",
        "weights": out / f"{args.construct}-weights.csv",
        "figure": out / f"{args.construct}-weights.png",
    }
    save_model(model, paths["model"])
    result.write_subject_csv(paths["loso"])
    result.report.write_csv(paths["weights"])
    render_weight_figure(result.report, paths["figure"])

    top = result.report.ordered()[:3]
    worst = min(result.per_subject, key=lambda r: r.accuracy)
    text = "\n".join(
        [
            f"construct: {result.construct} ({result.classes[0]} vs {result.classes[1]})",
            f"data: {len(table.matrix)} observations, {len(set(table.subjects))} subjects",
            f"loso accuracy: {result.accuracy:.3f} "
            f"(worst subject {worst.subject}: {worst.accuracy:.2f})",
            "top features: "
            + ", ".join(f"{name} {weight:+.2f}" for name, weight in top),
            "wrote " + ", ".join(str(p) for p in paths.values()),
        ]
    )
    _emit(
        args,
        text,
        {
            "construct": result.construct,
            "classes": list(result.classes),
            "accuracy": result.accuracy,
            "per_subject": {r.subject: r.accuracy for r in result.per_subject},
            "top_features": [{"name": n, "weight": w} for n, w in top],
            "artifacts": {k: str(p) for k, p in paths.items()},
        },
    )
    return EXIT_OK


# classify


def _confidence(model, prediction) -> float:
    # posterior is P(classes[0]); report belief in the printed label
    if prediction.label == model.classes[0]:
        return prediction.posterior
    return 1.0 - prediction.posterior


def _classify_line(args, model, subject, t_start, t_end, prediction) -> None:
    conf = _confidence(model, prediction)
    if args.format == "json":
        payload = {"t_start": t_start, "t_end": t_end, "label": prediction.label, "p": conf}
        if subject is not None:
            payload = {"subject": subject, **payload}
        print(json.dumps(payload), flush=True)
    else:
        head = f"{subject}\t" if subject is not None else ""
        print(f"{head}{t_end:.3f}\t{prediction.label}\t{conf:.3f}", flush=True)


def _classify_table(args, model) -> int:
    table = read_feature_csv(args.features)
    order: dict[str, list[int]] = {}
    for i, subject in enumerate(table.subjects):
        order.setdefault(subject, []).append(i)
    for subject, indices in order.items():
        predictions = predict_subject(model, table.matrix[indices])
        for i, prediction in zip(indices, predictions):
            t_start, t_end = table.spans[i]
            _classify_line(args, model, subject, t_start, t_end, prediction)
    return EXIT_OK


def _classify_stream(args, model, lines, name: str) -> int:
    """One label per window boundary, emitted as the boundary arrives.

    Early windows are placed on the training distribution; once enough
    context accumulates, windows rank against the ones already seen,
    the same policy the live session estimator follows.
    """
    stream = SegmentStream(name)
    context: list[np.ndarray] = []

    def classify_window(piece) -> None:
        vector = extract_features(piece.window).as_array()
        if len(context) >= MIN_CONTEXT:
            prediction = predict(
                model, vector, subject_context=np.array(context), normalize="subject"
            )
        else:
            prediction = predict(model, vector, normalize="train-quantiles")
        context.append(vector)
        _classify_line(args, model, None, piece.t_start, piece.t_end, prediction)

    for line in lines:
        piece = stream.feed(line)
        if piece is not None:
            classify_window(piece)
    piece = stream.finish()
    if piece is not None:
        classify_window(piece)
    if not context:
        print("pif: no SEGMENT markers; nothing classified", file=sys.stderr)
    return EXIT_OK


def cmd_classify(args) -> int:
    model = load_model(args.model)
    if args.features:
        if args.recording != "-":
            raise CliError("classify reads either --features or a recording, not both")
        return _classify_table(args, model)
    if args.recording == "-":
        return _classify_stream(args, model, sys.stdin, "<stdin>")
    with open(args.recording, encoding="utf-8") as fh:
        return _classify_stream(args, model, fh, args.recording)


# replay


def cmd_replay(args) -> int:
    """Validated copy of a recording to stdout, optionally paced.

    Lines pass through byte for byte, so downstream consumers see the
    exact file; pacing sleeps out the recorded gaps like a live source.
    """
    reader = RecordingReader(str(args.recording))
    prev_t = None
    with open(args.recording, encoding="utf-8") as fh:
        for line in fh:
            event = reader.feed(line)
            if (
                args.speed == "realtime"
                and event is not None
                and event[0] == "sample"
            ):
                t = event[1][1].timestamp
                if prev_t is not None and t > prev_t:
                    time.sleep(t - prev_t)
                prev_t = t
            sys.stdout.write(line)
    sys.stdout.flush()
    if not reader.started:
        raise CorruptRecording(str(args.recording), 0, "empty file: missing recording header")
    return EXIT_OK


# record


def _pump_inlet(inlet, outlet, stop: threading.Event) -> None:
    try:
        while not stop.is_set():
            for sample in inlet.pull(timeout=0.1):
                outlet.push(sample)
            if inlet.closed:
                return
    except TransportError:
        pass  # producer vanished; the recording keeps what arrived
    finally:
        outlet.close()
        inlet.close()


def cmd_record(args) -> int:
    try:
        infos = registry(args.host, args.port)
    except OSError as exc:
        raise TransportError(
            f"cannot reach stream broker at {args.host}:{args.port}: {exc}"
        ) from exc
    if not infos:
        raise TransportError(f"broker at {args.host}:{args.port} offers no streams")
    hub = Hub()
    stop = threading.Event()
    pumps = []
    for info in infos:
        inlet = NetInlet(args.host, args.port, source_id=info.source_id)
        outlet = hub.open_outlet(info)
        pumps.append(
            threading.Thread(
                target=_pump_inlet,
                args=(inlet, outlet, stop),
                name=f"record-{info.name}",
                daemon=True,
            )
        )
    recorder = Recorder(hub, args.out)  # streams known upfront: snapshot mode
    for pump in pumps:
        pump.start()
    deadline = None if args.duration is None else time.monotonic() + args.duration
    try:
        while any(pump.is_alive() for pump in pumps):
            if deadline is not None and time.monotonic() >= deadline:
                break
            recorder.poll(timeout=0.1)
    except KeyboardInterrupt:
        pass
    stop.set()
    for pump in pumps:
        pump.join(timeout=2.0)
    summary = recorder.close()
    _emit(
        args,
        f"recorded {summary.n_samples} samples from {len(infos)} streams "
        f"({summary.duration:.1f} s) to {summary.path}",
        {
            "path": summary.path,
            "n_samples": summary.n_samples,
            "n_dropped": summary.n_dropped,
            "per_stream": summary.per_stream,
            "duration": summary.duration,
        },
    )
    return EXIT_OK


# serve


def _source_brief(source) -> str:
    kind = type(source).__name__
    if kind == "LiveSource":
        return f"live broker {source.host}:{source.port}"
    if kind == "ReplaySource":
        return f"replay {source.path} ({source.speed})"
    scenario = source.scenario_path or "constant midpoint"
    return f"simulator ({scenario}, cadence {source.cadence:g} Hz)"


def cmd_serve(args) -> int:
    config = load_config(args.config)
    session = serve(config)
    try:
        ui = serve_ui(session)
    except BaseException:
        session.stop()
        raise
    print(f"story: {config.story_path}")
    print(f"input: {_source_brief(config.source)}")
    print(f"ui: ws://{ui.host}:{ui.port}")
    print(f"recording: {config.record_path or 'off'}", flush=True)
    seen = 0
    try:
        while True:
            time.sleep(0.25)
            faults = list(session.faults)
            for fault in faults[seen:]:
                print(f"pif: {fault}", file=sys.stderr)
            seen = len(faults)
    except KeyboardInterrupt:
        pass
    finally:
        ui.stop()
        summary = session.stop()
    if summary is not None:
        print(f"recording: {summary.n_samples} samples, {summary.duration:.1f} s, {summary.path}")
    return EXIT_OK


# wiring


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; 2 means runtime error here, so remap
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument(
        "--format", choices=("text", "json"), default="text", help="output format"
    )

    parser = _Parser(
        prog="pif", description="physiological interactive fiction toolset"
    )
    sub = parser.add_subparsers(dest="verb", required=True, metavar="verb")

    p = sub.add_parser("lint", parents=[fmt], help="check stories for defects")
    p.add_argument("stories", nargs="+", metavar="STORY")
    p.set_defaults(run=cmd_lint)

    p = sub.add_parser("play", help="step a story in the terminal")
    p.add_argument("story", metavar="STORY")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="seed a variable before the first page (repeatable)",
    )
    p.add_argument("--trace", action="store_true", help="engine events to stderr")
    p.set_defaults(run=cmd_play)

    p = sub.add_parser("simulate", parents=[fmt], help="synthesize a subject recording")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--construct", choices=CONSTRUCTS, help="built-in contrast pair")
    source.add_argument("--scenario", metavar="FILE", help="scenario JSON timeline")
    p.add_argument("--subject", default="s01")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--separability",
        type=float,
        default=1.0,
        help="scale the class contrast; 0 collapses it entirely",
    )
    p.add_argument(
        "--windows",
        type=int,
        default=1,
        metavar="N",
        help="split each segment into N labeled windows",
    )
    p.add_argument(
        "--duration",
        type=float,
        default=70.0,
        help="seconds per segment (with --construct)",
    )
    p.add_argument("-o", "--out", required=True, metavar="FILE.pifrec")
    p.set_defaults(run=cmd_simulate)

    p = sub.add_parser(
        "features", parents=[fmt], help="extract a feature table from recordings"
    )
    p.add_argument(
        "recordings",
        nargs="+",
        metavar="RECORDING",
        help=".pifrec files, or - for stdin; several files take their names as subjects",
    )
    p.add_argument("--subject", help="subject id (single recording only)")
    p.add_argument("-o", "--out", required=True, metavar="FILE.csv")
    p.set_defaults(run=cmd_features)

    p = sub.add_parser("train", parents=[fmt], help="fit and evaluate a construct model")
    p.add_argument("--features", required=True, metavar="FILE.csv")
    p.add_argument("--construct", required=True)
    p.add_argument("--keep-variance", type=float, default=0.95)
    p.add_argument("-o", "--out", default=".", metavar="DIR")
    p.set_defaults(run=cmd_train)

    p = sub.add_parser(
        "classify",
        parents=[fmt],
        help="label recorded windows with a trained model",
    )
    p.add_argument("--model", required=True, metavar="FILE.json")
    p.add_argument(
        "recording",
        nargs="?",
        default="-",
        metavar="RECORDING",
        help=".pifrec file or - for stdin (default)",
    )
    p.add_argument("--features", metavar="FILE.csv", help="classify a feature table instead")
    p.set_defaults(run=cmd_classify)

    p = sub.add_parser("replay", help="copy a recording to stdout, validated")
    p.add_argument("recording", metavar="FILE.pifrec")
    p.add_argument(
        "--speed",
        choices=("max", "realtime"),
        default="max",
        help="realtime sleeps out the recorded gaps",
    )
    p.set_defaults(run=cmd_replay)

    p = sub.add_parser("record", parents=[fmt], help="record live broker streams to a file")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=16571)
    p.add_argument(
        "--duration", type=float, default=None, help="stop after this many seconds"
    )
    p.add_argument("-o", "--out", required=True, metavar="FILE.pifrec")
    p.set_defaults(run=cmd_record)

    p = sub.add_parser("serve", help="run a reader session from a config file")
    p.add_argument("config", metavar="CONFIG.json")
    p.set_defaults(run=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"pif: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.run(args)
    except BrokenPipeError:
        # a closed pager or an early-exiting pipe consumer is not an error;
        # park stdout so the interpreter's exit flush stays quiet
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except ParseErrors as exc:
        if getattr(args, "format", "text") == "json":
            print(
                json.dumps({"diagnostics": [asdict(d) for d in exc.errors]}),
                file=sys.stderr,
            )
        else:
            for diag in exc.errors:
                print(diag, file=sys.stderr)
        return EXIT_INVALID
    except (CliError, ConfigError, SimError, PipelineError) as exc:
        _print_error(args, str(exc))
        return EXIT_INVALID
    except FileNotFoundError as exc:
        _print_error(args, f"{exc.filename or exc}: no such file")
        return EXIT_INVALID
    except IsADirectoryError as exc:
        _print_error(args, f"{exc.filename}: is a directory")
        return EXIT_INVALID
    except ValueError as exc:
        _print_error(args, str(exc))
        return EXIT_INVALID
    except (TransportError, SessionError) as exc:
        _print_error(args, str(exc))
        return EXIT_RUNTIME
    except OSError as exc:
        _print_error(args, str(exc))
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
