"""Command-line interface: create/update datasets, classify sidecars, validate, serve.

Structured output (reports, classifications, violation lists) is JSON on
stdout; errors are JSON on stderr in the same shape the service returns.

Exit codes: 0 success, 2 request/validation problems, 3 classification
failure, 4 converter or I/O failure, 5 conflict or busy dataset.

Environment variables mirror the service configuration and act as flag
defaults: BIDSBUILDER_CONVERTER, BIDSBUILDER_MOCK_FIXTURES,
BIDSBUILDER_PARALLELISM, BIDSBUILDER_TIMEOUT, BIDSBUILDER_BIND,
BIDSBUILDER_UI_ORIGIN, BIDSBUILDER_MAX_BODY.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from ._version import __version__
from .classify import classify_params, load_decision_table
from .convert import ConverterHandle, parse_sidecar
from .dataset import create_dataset, update_dataset
from .errors import (
    Busy,
    ClassificationFailed,
    LabelError,
    NotADirectory,
    OutputNotEmpty,
    RequestError,
    SessionConflict,
    SidecarError,
    StateFileMissing,
    error_body,
)
from .model import Classification
from .request import parse_request
from .validate import validate_layout
from .service import (
    DEFAULT_BIND,
    DEFAULT_MAX_BODY_BYTES,
    DEFAULT_REQUEST_TIMEOUT_S,
    ServiceConfig,
    create_app,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CLASSIFICATION = 3
EXIT_CONVERSION = 4
EXIT_CONFLICT = 5

DEFAULT_CONVERTER = "dcm2niix"


def exit_code_for(err: Exception) -> int:
    if isinstance(err, ClassificationFailed):
        return EXIT_CLASSIFICATION
    if isinstance(err, (OutputNotEmpty, SessionConflict, Busy)):
        return EXIT_CONFLICT
    if isinstance(err, (RequestError, LabelError, SidecarError, StateFileMissing, NotADirectory)):
        return EXIT_VALIDATION
    return EXIT_CONVERSION


def _emit(data: object) -> None:
    print(json.dumps(data, indent=2, ensure_ascii=False))


def _fail(err: Exception) -> int:
    print(json.dumps(error_body(err), indent=2, ensure_ascii=False), file=sys.stderr)
    return exit_code_for(err)


def _env(name: str, fallback: str | None = None) -> str | None:
    return os.environ.get(name, fallback)


def _add_converter_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--converter",
        default=_env("BIDSBUILDER_CONVERTER"),
        help=f"path to the external DICOM-to-NIfTI converter (default: {DEFAULT_CONVERTER})",
    )
    parser.add_argument(
        "--mock-fixtures",
        default=_env("BIDSBUILDER_MOCK_FIXTURES"),
        help="use the mock converter, resolving session paths under this fixture root",
    )
    parser.add_argument(
        "--converter-arg",
        action="append",
        default=[],
        help="extra argument passed to the external converter (repeatable)",
    )
    parser.add_argument(
        "--parallelism",
        type=int,
        default=int(_env("BIDSBUILDER_PARALLELISM", "1")),
        help="how many sessions may convert concurrently",
    )
    parser.add_argument(
        "--timeout",
        type=float,
        default=float(_env("BIDSBUILDER_TIMEOUT", str(DEFAULT_REQUEST_TIMEOUT_S))),
        help="overall operation timeout in seconds",
    )


def _build_converter(args: argparse.Namespace) -> ConverterHandle:
    if args.mock_fixtures:
        return ConverterHandle.mock(args.mock_fixtures)
    executable = args.converter or DEFAULT_CONVERTER
    return ConverterHandle.external(executable, extra_args=tuple(args.converter_arg))


def _run_conversion(args: argparse.Namespace, operation) -> int:
    request_path = Path(args.request)
    try:
        text = request_path.read_bytes()
    except OSError as err:
        return _fail(RequestError(f"cannot read request file {request_path}: {err}"))
    try:
        req = parse_request(text)
        report = operation(
            req,
            _build_converter(args),
            parallelism=args.parallelism,
            timeout_s=args.timeout,
        )
    except Exception as err:
        return _fail(err)
    _emit(report.to_dict())
    return EXIT_OK


def _cmd_create(args: argparse.Namespace) -> int:
    return _run_conversion(args, create_dataset)


def _cmd_update(args: argparse.Namespace) -> int:
    return _run_conversion(args, update_dataset)


def _cmd_classify(args: argparse.Namespace) -> int:
    sidecar_path = Path(args.sidecar)
    try:
        text = sidecar_path.read_text(encoding="utf-8")
    except OSError as err:
        return _fail(RequestError(f"cannot read sidecar file {sidecar_path}: {err}"))
    try:
        rules = load_decision_table(args.rules) if args.rules else None
        params = parse_sidecar(text)
        outcome = classify_params(
            params, args.has_gradients, series_name=sidecar_path.stem, rules=rules
        )
    except ValueError as err:
        return _fail(RequestError(str(err)))
    except Exception as err:
        return _fail(err)
    if isinstance(outcome, Classification):
        _emit(
            {
                "modality": outcome.modality.value,
                "suffix": outcome.suffix.value,
                "rule_id": outcome.rule_id,
            }
        )
        return EXIT_OK
    _emit({"unclassifiable": {"series_name": outcome.series_name, "reason": outcome.reason}})
    return EXIT_CLASSIFICATION


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        violations = validate_layout(args.dataset)
    except Exception as err:
        return _fail(err)
    _emit([v.to_dict() for v in violations])
    return EXIT_OK if not violations else EXIT_VALIDATION


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    host, _, port = args.bind.rpartition(":")
    if not host or not port.isdigit():
        return _fail(RequestError(f"--bind must look like host:port, got {args.bind!r}"))
    config = ServiceConfig(
        converter=_build_converter(args),
        parallelism=args.parallelism,
        request_timeout_s=args.timeout,
        max_body_bytes=args.max_body,
        ui_origin=args.ui_origin,
    )
    uvicorn.run(create_app(config), host=host, port=int(port))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bidsbuilder",
        description="Build and update BIDS datasets from raw DICOM series.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    create = commands.add_parser("create", help="create a new dataset from a request file")
    create.add_argument("--request", required=True, help="path to the JSON request document")
    _add_converter_args(create)
    create.set_defaults(handler=_cmd_create)

    update = commands.add_parser("update", help="merge new sessions or metadata into a dataset")
    update.add_argument("--request", required=True, help="path to the JSON request document")
    _add_converter_args(update)
    update.set_defaults(handler=_cmd_update)

    classify = commands.add_parser("classify", help="classify one sidecar document")
    classify.add_argument("--sidecar", required=True, help="path to a converter sidecar JSON file")
    classify.add_argument(
        "--has-gradients",
        action="store_true",
        help="the series came with .bval/.bvec gradient files",
    )
    classify.add_argument("--rules", help="path to an alternative decision-table JSON file")
    classify.set_defaults(handler=_cmd_classify)

    validate = commands.add_parser("validate", help="run the layout checks over a dataset")
    validate.add_argument("dataset", help="dataset root directory")
    validate.set_defaults(handler=_cmd_validate)

    serve = commands.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--bind", default=_env("BIDSBUILDER_BIND", DEFAULT_BIND))
    serve.add_argument("--ui-origin", default=_env("BIDSBUILDER_UI_ORIGIN"))
    serve.add_argument(
        "--max-body",
        type=int,
        default=int(_env("BIDSBUILDER_MAX_BODY", str(DEFAULT_MAX_BODY_BYTES))),
    )
    _add_converter_args(serve)
    serve.set_defaults(handler=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)


def entrypoint() -> None:
    sys.exit(main())
