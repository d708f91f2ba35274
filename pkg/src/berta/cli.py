"""Command line entry point: serve the API, export archives, report metrics,
and import/export note templates."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import List, Optional

from . import api, metrics as metrics_mod, model, templates as tmpl
from .config import load_config
from .store import Store


def _add_config_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to the JSON config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="berta", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    _add_config_arg(p_serve)

    p_export = sub.add_parser("export", help="write a portable archive of the store")
    _add_config_arg(p_export)
    p_export.add_argument("--dest", required=True, help="destination directory")

    p_metrics = sub.add_parser("metrics", help="print usage metrics for a period")
    _add_config_arg(p_metrics)
    p_metrics.add_argument("--period", default="all", help="YYYY-MM, or 'all'")
    p_metrics.add_argument("--series", nargs=2, metavar=("START", "END"),
                           help="also print a monthly session series")
    p_metrics.add_argument("--csv", action="store_true",
                           help="emit the monthly series as CSV")

    p_tpl = sub.add_parser("templates", help="import/export template JSON")
    tpl_sub = p_tpl.add_subparsers(dest="tpl_command", required=True)
    p_tpl_export = tpl_sub.add_parser("export", help="dump all templates as JSON")
    _add_config_arg(p_tpl_export)
    p_tpl_export.add_argument("--out", help="output file (default stdout)")
    p_tpl_import = tpl_sub.add_parser("import", help="load custom templates from JSON")
    _add_config_arg(p_tpl_import)
    p_tpl_import.add_argument("path", help="JSON file with a list of templates")
    return parser


def cmd_serve(args) -> int:
    config = load_config(args.config)
    api.serve(config, wait=True)
    return 0


def cmd_export(args) -> int:
    config = load_config(args.config)
    store = Store(config.storage_root)
    dest = store.export_archive(args.dest)
    print(f"archive written to {dest}")
    return 0


def cmd_metrics(args) -> int:
    config = load_config(args.config)
    store = Store(config.storage_root)
    m = metrics_mod.aggregate(args.period, store)
    rows = [
        ("period", m.period),
        ("sessions", m.session_count),
        ("unique users", m.unique_users),
        ("unique facilities", m.unique_facilities),
        ("total audio (h)", f"{m.total_audio_s / 3600:.1f}"),
        ("mean session audio (s)", f"{m.mean_session_audio_s:.1f}"),
        ("prompt tokens", m.total_prompt_tokens),
        ("completion tokens", m.total_completion_tokens),
        ("users with custom templates", m.users_with_custom_templates),
        ("customization rate", f"{m.customization_rate:.2f}"),
    ]
    width = max(len(label) for label, _ in rows)
    for label, value in rows:
        print(f"{label:<{width}}  {value}")
    if args.series:
        series = metrics_mod.monthly_series(args.series[0], args.series[1], store)
        if args.csv:
            writer = csv.writer(sys.stdout)
            writer.writerow(["month", "session_count"])
            writer.writerows(series)
        else:
            print()
            for month, count in series:
                print(f"{month}  {count}")
    return 0


def cmd_templates(args) -> int:
    config = load_config(args.config)
    store = Store(config.storage_root)
    if args.tpl_command == "export":
        payload = [tmpl.template_to_dict(t) for t in store.list_templates()]
        text = json.dumps(payload, indent=2)
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            print(text)
        return 0
    data = json.loads(Path(args.path).read_text(encoding="utf-8"))
    imported = 0
    for entry in data:
        template = tmpl.template_from_dict(entry)
        if template.kind == "builtin":
            continue  # builtins ship with the code
        store.save_template(template)
        imported += 1
    print(f"imported {imported} template(s)")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "serve": cmd_serve,
        "export": cmd_export,
        "metrics": cmd_metrics,
        "templates": cmd_templates,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
