"""Command-line interface: run, batch, validate, replay, export-csv, serve."""

from __future__ import annotations

import csv
import json
import os
import sys
from pathlib import Path

import click

from .kernel import ClockMode, derive_stream
from .runner import Runner, RunProfile, ScenarioValidationError, apply_overrides
from .scenario import (
    ScenarioParseError,
    family_scenarios,
    list_scenarios,
    load_bundled,
    load_scenario,
    validate as validate_spec,
)
from .telemetry import aggregate, metrics_from_log_text


def _parse_overrides(pairs: tuple[str, ...]) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.BadParameter(f"override must be key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _load(scenario: str):
    path = Path(scenario)
    if path.exists():
        return load_scenario(path)
    return load_bundled(scenario)


def _write_run_artifacts(out_dir: Path, result) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "log.jsonl").write_text(result.log_text, encoding="utf-8")
    (out_dir / "metrics.json").write_text(
        json.dumps(result.metrics.as_dict(), indent=2) + "\n", encoding="utf-8"
    )


@click.group()
def main() -> None:
    """Deterministic ATC conflict-detection testbed."""


@main.command("list")
def list_cmd() -> None:
    """List bundled scenarios."""
    for sid in list_scenarios():
        click.echo(sid)


@main.command()
@click.argument("scenario")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--mode", default="fast_time", show_default=True,
              type=click.Choice(["fast_time", "real_time"]))
@click.option("--pace", default=1.0, show_default=True, type=float,
              help="Real-time pacing multiplier.")
@click.option("--override", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Profile override, e.g. channel.snr_db=10.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None,
              help="Artifact directory (log.jsonl, metrics.json).")
def run(scenario, seed, mode, pace, overrides, out_dir) -> None:
    """Run one scenario and print its metrics."""
    try:
        spec = _load(scenario)
    except (KeyError, ScenarioParseError) as exc:
        raise click.ClickException(str(exc))
    clock_mode = ClockMode.FAST_TIME if mode == "fast_time" else ClockMode.REAL_TIME
    try:
        runner = Runner(spec, seed=seed, mode=clock_mode, pace=pace,
                        overrides=_parse_overrides(overrides))
    except (ScenarioValidationError, ValueError) as exc:
        raise click.ClickException(str(exc))
    result = runner.run()
    if out_dir is not None:
        _write_run_artifacts(out_dir, result)
    click.echo(json.dumps(result.metrics.as_dict(), indent=2))


@main.command()
@click.argument("family")
@click.option("--runs", "n_runs", default=10, show_default=True, type=int,
              help="Runs per conflict type.")
@click.option("--seed-base", default=0, show_default=True, type=int)
@click.option("--visibility-range", default="200,2000", show_default=True,
              help="Randomized visibility range in meters (lo,hi).")
@click.option("--snr-range", default="0,20", show_default=True,
              help="Randomized channel SNR range in dB (lo,hi).")
@click.option("--override", "overrides", multiple=True, metavar="KEY=VALUE")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--include-nominal/--no-include-nominal", default=False, show_default=True)
def batch(family, n_runs, seed_base, visibility_range, snr_range, overrides, out_dir,
          include_nominal) -> None:
    """Run N seeds per conflict type of a scenario family, write a report."""
    specs = family_scenarios(family)
    if not include_nominal:
        specs = [s for s in specs if "nominal" not in s.scenario_id]
    if not specs:
        raise click.ClickException(f"no scenarios in family {family!r}")
    vis_lo, vis_hi = (float(v) for v in visibility_range.split(","))
    snr_lo, snr_hi = (float(v) for v in snr_range.split(","))
    base_overrides = _parse_overrides(overrides)
    try:
        # Fail fast on bad keys before any run starts.
        apply_overrides(RunProfile(), base_overrides)
    except ValueError as exc:
        raise click.ClickException(str(exc))

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    all_metrics = []
    failures = []
    for spec in specs:
        for i in range(n_runs):
            seed = seed_base + i
            stream = derive_stream(seed, "batch")
            run_overrides = dict(base_overrides)
            run_overrides.setdefault("scene.visibility_m", round(stream.uniform(vis_lo, vis_hi), 1))
            run_overrides.setdefault("channel.snr_db", round(stream.uniform(snr_lo, snr_hi), 2))
            try:
                result = Runner(spec, seed=seed, overrides=run_overrides).run()
            except Exception as exc:  # noqa: BLE001 - collected into the manifest
                failures.append({"scenario_id": spec.scenario_id, "seed": seed, "error": str(exc)})
                continue
            _write_run_artifacts(out_dir / spec.scenario_id / f"seed-{seed}", result)
            all_metrics.append(result.metrics)

    if all_metrics:
        report = aggregate(all_metrics)
        report["per_run"] = [m.as_dict() for m in all_metrics]
        (out_dir / "batch_report.json").write_text(
            json.dumps(report, indent=2) + "\n", encoding="utf-8"
        )
        summary = {k: v for k, v in report["overall"].items()}
        click.echo(json.dumps({"families": report["families"], "overall": summary}, indent=2))
    if failures:
        (out_dir / "failures.json").write_text(
            json.dumps(failures, indent=2) + "\n", encoding="utf-8"
        )
        click.echo(f"{len(failures)} run(s) failed; see failures.json", err=True)
        sys.exit(1)


@main.command("validate")
@click.argument("files", nargs=-1, required=True, type=click.Path(exists=True, path_type=Path))
def validate_cmd(files) -> None:
    """Validate scenario files; nonzero exit on any violation."""
    bad = 0
    for f in files:
        try:
            spec = load_scenario(f)
        except ScenarioParseError as exc:
            click.echo(f"{f}: PARSE ERROR: {exc}")
            bad += 1
            continue
        violations = validate_spec(spec)
        if violations:
            bad += 1
            for v in violations:
                click.echo(f"{f}: {v}")
        else:
            click.echo(f"{f}: ok")
    if bad:
        sys.exit(1)


@main.command()
@click.argument("log_file", type=click.Path(exists=True, path_type=Path))
def replay(log_file) -> None:
    """Recompute run metrics offline from a JSONL event log."""
    metrics = metrics_from_log_text(Path(log_file).read_text("utf-8"))
    click.echo(json.dumps(metrics.as_dict(), indent=2))
    if any(d.startswith("missing terminal") for d in metrics.diagnostics):
        sys.exit(1)


@main.command("export-csv")
@click.argument("batch_dir", type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_file", type=click.Path(path_type=Path), required=True)
def export_csv(batch_dir, out_file) -> None:
    """Flatten a batch directory's per-run metrics into one CSV."""
    rows = []
    for metrics_file in sorted(Path(batch_dir).rglob("metrics.json")):
        m = json.loads(metrics_file.read_text("utf-8"))
        rows.append(
            {
                "scenario_id": m["scenario_id"],
                "family": m["family"],
                "seed": m["seed"],
                "warned": m["warned"],
                "ttfw_ms": m["ttfw_ms"],
                "t_conflict_ms": m["t_conflict_ms"],
                "asr_latency_mean_ms": m["asr_latency_ms"]["mean"],
                "vision_latency_mean_ms": m["vision_latency_ms"]["mean"],
                "adsb_latency_mean_ms": m["adsb_latency_ms"]["mean"],
                "tts_latency_mean_ms": m["tts_latency_ms"]["mean"],
                "decision_latency_mean_ms": m["decision_latency_ms"]["mean"],
                "first_detection_range_m": m["first_detection_range_m"],
            }
        )
    if not rows:
        raise click.ClickException(f"no metrics.json files under {batch_dir}")
    out_file = Path(out_file)
    out_file.parent.mkdir(parents=True, exist_ok=True)
    with out_file.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    click.echo(f"wrote {len(rows)} rows to {out_file}")


@main.command()
@click.option("--host", default=None, help="Bind host (env SKYLOOP_HOST).")
@click.option("--port", default=None, type=int, help="Bind port (env SKYLOOP_PORT).")
@click.option("--scenario-dir", default=None, type=click.Path(path_type=Path),
              help="Extra scenario directory searched before the bundled suite.")
def serve(host, port, scenario_dir) -> None:
    """Start the HTTP/JSON gateway."""
    import uvicorn

    from .gateway import create_app

    host = host or os.environ.get("SKYLOOP_HOST", "127.0.0.1")
    port = port or int(os.environ.get("SKYLOOP_PORT", "8313"))
    app = create_app(scenario_dir=str(scenario_dir) if scenario_dir else None)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
