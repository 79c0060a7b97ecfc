"""Command-line entry points.

Exit codes (stable, machine-parseable):

* 0 success
* 2 validation / usage errors
* 3 media and I/O errors
* 4 backend errors
* 1 anything else

On failure a single line ``error code=<CODE> msg="..."`` goes to stderr;
stdout stays clean so Y4M output can be piped into external encoders.
"""

from __future__ import annotations

import json
import sys
from fractions import Fraction
from pathlib import Path

import click

from . import bench as bench_mod
from . import dataset as dataset_mod
from .backends import create_backend, interpolate as backend_interpolate
from .config import load_config_file, resolve
from .errors import (
    BackendError,
    MediaError,
    SlomoError,
    ValidationError,
)
from .interp import recursive_interpolate
from .media import emit_y4m, load_media, write_frame_dir


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, ValidationError):
        return 2
    if isinstance(exc, (MediaError, OSError)):
        return 3
    if isinstance(exc, BackendError):
        return 4
    return 1


def _fail(exc: Exception):
    code = getattr(exc, "code", "E_IO" if isinstance(exc, OSError) else "E_GENERIC")
    msg = str(exc).replace('"', "'")
    click.echo(f'error code={code} msg="{msg}"', err=True)
    sys.exit(_exit_code(exc))


def _run(fn):
    try:
        fn()
    except SlomoError as exc:
        _fail(exc)
    except OSError as exc:
        _fail(exc)


def _make_backend(config, name, command, sigma=2.0):
    name = resolve(config, "backend", "name", name, "classical")
    command = resolve(config, "backend", "command", command)
    return create_backend(name, command=command, sigma=sigma)


def _parse_ratios(text: str) -> tuple:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValidationError(f"ratios must be three comma-separated numbers: {text!r}")
    return tuple(parts)


@click.group()
@click.option("--config", "config_path", default=None,
              help="Path to the INI config file (default ./slomokit.ini).")
@click.pass_context
def main(ctx, config_path):
    """Slow-motion synthesis and evaluation toolkit."""
    ctx.obj = load_config_file(config_path)


@main.command()
@click.argument("input_path")
@click.argument("output_path")
@click.option("--exponent", "-e", default=2, show_default=True,
              help="Midpoint passes; yields 2^e x slow motion.")
@click.option("--backend", default=None, help="classical | blend | external")
@click.option("--backend-cmd", default=None,
              help="Command template for the external backend.")
@click.option("--decoder-cmd", default=None,
              help="Decoder template for container inputs ({input} placeholder).")
@click.option("--chroma", default="420jpeg", show_default=True,
              help="Chroma tag for Y4M output (444 or a 420 variant).")
@click.pass_obj
def slomo(config, input_path, output_path, exponent, backend, backend_cmd,
          decoder_cmd, chroma):
    """Synthesize slow motion: Y4M/frame-dir/container in, Y4M or frame dir out.

    OUTPUT_PATH of '-' writes Y4M to stdout.
    """
    def run():
        if not isinstance(exponent, int) or not (1 <= exponent <= 5):
            raise ValidationError(f"exponent must be in [1, 5], got {exponent}")
        decoder = resolve(config, "media", "decoder_cmd", decoder_cmd)
        seq = load_media(input_path, decoder)
        with _make_backend(config, backend, backend_cmd) as be:
            result = recursive_interpolate(
                seq, exponent, lambda a, b: backend_interpolate(be, a, b, 0.5)
            )
        if output_path == "-":
            sys.stdout.buffer.write(emit_y4m(result, chroma))
        elif output_path.endswith(".y4m"):
            Path(output_path).write_bytes(emit_y4m(result, chroma))
        else:
            write_frame_dir(result, output_path)
        click.echo(
            f"frames {len(seq)} -> {len(result)} at "
            f"{result.fps.numerator}/{result.fps.denominator} fps "
            f"(duration x{1 << exponent})",
            err=True,
        )
    _run(run)


@main.command()
@click.argument("corpus_dir")
@click.option("--seed", default=0, show_default=True)
@click.option("--ratios", default="0.8,0.1,0.1", show_default=True)
@click.option("--stride", default=1, show_default=True)
@click.option("--out", "out_dir", default=None,
              help="Output directory (default: the corpus dir).")
@click.pass_obj
def dataset(config, corpus_dir, seed, ratios, stride, out_dir):
    """Write a deterministic split file and triplet index for a corpus.

    CORPUS_DIR holds one frame directory (with manifest.json) per clip.
    """
    def run():
        corpus = Path(corpus_dir)
        out = Path(out_dir) if out_dir else corpus
        out.mkdir(parents=True, exist_ok=True)
        clips = []
        for clip_dir in sorted(p for p in corpus.iterdir() if p.is_dir()):
            mpath = clip_dir / "manifest.json"
            if not mpath.exists():
                continue
            m = json.loads(mpath.read_text())
            clips.append(dataset_mod.ClipManifest(
                clip_id=clip_dir.name,
                frame_count=int(m["count"]),
                fps_num=int(m.get("fps_num", 30)),
                fps_den=int(m.get("fps_den", 1)),
                source=str(clip_dir),
            ))
        if not clips:
            raise ValidationError(f"no clip directories with manifests in {corpus}")
        split = dataset_mod.split_clips(clips, _parse_ratios(ratios), seed)
        (out / "split.json").write_text(split.to_json())
        warnings = []
        with open(out / "triplets.jsonl", "w") as fh:
            for clip in clips:
                trips = dataset_mod.extract_triplets(
                    clip.clip_id, clip.frame_count, stride
                )
                if not trips:
                    warnings.append(clip.clip_id)
                for trip in trips:
                    fh.write(json.dumps(
                        {
                            "clip_id": trip.clip_id,
                            "start": trip.start,
                            "split": split.assignments[trip.clip_id],
                        },
                        sort_keys=True,
                    ) + "\n")
        counts = {name: len(split.clips_in(name)) for name in dataset_mod.SPLIT_NAMES}
        click.echo(f"split: {counts}", err=True)
        if warnings:
            click.echo(f"warning: clips with <3 frames, no triplets: {warnings}",
                       err=True)
    _run(run)


@main.command()
@click.option("--corpus", "corpus_dir", required=True)
@click.option("--split", "split_path", default=None,
              help="Existing split file; created from --seed/--ratios if absent.")
@click.option("--seed", default=0, show_default=True)
@click.option("--ratios", default="0.8,0.1,0.1", show_default=True)
@click.option("--backend", default=None)
@click.option("--backend-cmd", default=None)
@click.option("--report", "report_path", default="-",
              help="Report output path ('-' for stdout).")
@click.option("--format", "fmt", default="json", show_default=True,
              type=click.Choice(["json", "csv", "markdown"]))
@click.pass_obj
def eval(config, corpus_dir, split_path, seed, ratios, backend, backend_cmd,
         report_path, fmt):
    """Evaluate a backend over the test split of a corpus."""
    def run():
        corpus = Path(corpus_dir)
        if split_path and Path(split_path).exists():
            split = dataset_mod.SplitAssignment.from_json(
                Path(split_path).read_text()
            )
        else:
            clip_ids = sorted(
                p.name for p in corpus.iterdir()
                if p.is_dir() and (p / "manifest.json").exists()
            )
            split = dataset_mod.split_clips(clip_ids, _parse_ratios(ratios), seed)
            if split_path:
                Path(split_path).write_text(split.to_json())
        items = bench_mod.triplet_items_from_corpus(corpus, split, "test")
        name = resolve(config, "backend", "name", backend, "classical")
        if name == "oracle":
            be = create_backend("oracle")
        else:
            be = _make_backend(config, backend, backend_cmd)
        with be:
            report = bench_mod.evaluate_backend(be, items)
        text = bench_mod.write_report(report, fmt)
        if report_path == "-":
            click.echo(text, nl=False)
        else:
            Path(report_path).write_text(text)
    _run(run)


@main.command(name="bench")
@click.option("--backend", default=None)
@click.option("--backend-cmd", default=None)
@click.option("--resolution", default="448x256", show_default=True)
@click.option("--pairs", default=4, show_default=True)
@click.option("--warmup", default=1, show_default=True)
@click.pass_obj
def bench(config, backend, backend_cmd, resolution, pairs, warmup):
    """Measure synthesis throughput on synthetic frames."""
    def run():
        try:
            w, h = (int(p) for p in resolution.lower().split("x"))
        except ValueError:
            raise ValidationError(f"bad resolution {resolution!r}, want WxH") from None
        with _make_backend(config, backend, backend_cmd) as be:
            stat = bench_mod.throughput_bench(be, (w, h), pairs, warmup)
        click.echo(bench_mod.write_throughput(stat))
    _run(run)


@main.command()
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
@click.option("--workers", default=None, type=int)
@click.option("--upload-limit", default=None, type=int)
@click.option("--data-dir", default=None)
@click.option("--frontend-dir", default=None,
              help="Static web UI directory to serve at /.")
@click.pass_obj
def serve(config, host, port, workers, upload_limit, data_dir, frontend_dir):
    """Run the HTTP job service backing the web UI."""
    def run():
        import uvicorn

        from .service import ServiceConfig, create_app

        svc = ServiceConfig(
            data_dir=resolve(config, "service", "data_dir", data_dir, "./slomokit-jobs"),
            workers=int(resolve(config, "service", "workers", workers, 2)),
            upload_limit_bytes=int(
                resolve(config, "service", "upload_limit_bytes", upload_limit,
                        256 * 1024 * 1024)
            ),
            decoder_cmd=resolve(config, "media", "decoder_cmd", None),
            encoder_cmd=resolve(config, "media", "encoder_cmd", None),
            frontend_dir=resolve(config, "service", "frontend_dir", frontend_dir),
        )
        uvicorn.run(
            create_app(svc),
            host=resolve(config, "service", "host", host, "127.0.0.1"),
            port=int(resolve(config, "service", "port", port, 8650)),
        )
    _run(run)


if __name__ == "__main__":
    main()
