"""avloc command line: synth, train, eval, visualize, vote.

Exit codes: 0 success, 1 usage or config error, 2 runtime failure.
"""
from __future__ import annotations

import json
import logging
import sys

import click

from . import evaluate, pipeline
from .config import ConfigError, load_config
from .train import NonFiniteLoss

EXIT_USAGE, EXIT_RUNTIME = 1, 2


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _config(path, overrides):
    try:
        return load_config(path, overrides)
    except ConfigError as e:
        _fail(EXIT_USAGE, str(e))


config_option = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                             default=None, help="YAML run config.")
set_option = click.option("--set", "overrides", multiple=True, metavar="SECTION.FIELD=VALUE",
                          help="Override a config field (YAML value); repeatable.")


class _Group(click.Group):
    def main(self, *args, **kwargs):
        # click uses exit code 2 for usage errors; remap to 1
        try:
            return super().main(*args, standalone_mode=False, **kwargs)
        except click.exceptions.Abort:
            _fail(EXIT_USAGE, "aborted")
        except click.UsageError as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.exceptions.Exit as e:
            sys.exit(e.exit_code)


@click.group(cls=_Group)
@click.option("-v", "--verbose", is_flag=True)
def main(verbose):
    """Egocentric audio-visual sounding-object localization toolkit."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@config_option
@set_option
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def synth(config_path, overrides, out_dir):
    """Generate a synthetic dataset with exact ground truth."""
    cfg = _config(config_path, overrides)
    try:
        info = pipeline.synth(cfg, out_dir)
    except (OSError, RuntimeError, ValueError) as e:
        _fail(EXIT_RUNTIME, str(e))
    s = info["splits"]
    click.echo(f"wrote {info['clips']} clips to {out_dir} "
               f"(train {s['train']} / val {s['val']} / test {s['test']}); manifest {info['hash'][:16]}")


@main.command()
@config_option
@set_option
@click.option("--data", "data_dir", required=True, type=click.Path(file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def train(config_path, overrides, data_dir, out_dir):
    """Train on the dataset's train split."""
    cfg = _config(config_path, overrides)
    try:
        summary = pipeline.train(cfg, data_dir, out_dir)
    except NonFiniteLoss as e:
        _fail(EXIT_RUNTIME, f"{e}; last good checkpoint kept in {out_dir}")
    except (OSError, RuntimeError, ValueError, KeyError) as e:
        _fail(EXIT_RUNTIME, str(e))
    f = summary["final"]
    click.echo(f"trained {summary['epochs']} epochs / {summary['steps']} steps in {summary['seconds']}s: "
               f"L_loc {f['L_loc']:.4f}  L_dis {f['L_dis']:.4f}  total {f['total']:.4f}")


@main.command("eval")
@click.option("--checkpoint", required=True, type=click.Path(dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(file_okay=False))
@click.option("--split", default="test", type=click.Choice(["train", "val", "test"]))
@click.option("--audio", "audio_mode", default="recorded",
              type=click.Choice(["recorded", "clean", "distractor"]),
              help="Audio fed at test time: as recorded, object only, or object plus distractor.")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False),
              help="Write the metrics report as JSON.")
def eval_cmd(checkpoint, data_dir, split, audio_mode, out_path):
    """Evaluate a checkpoint (and the center baseline) on a split."""
    try:
        report = pipeline.evaluate_checkpoint(checkpoint, data_dir, split, audio_mode, out_path)
    except (OSError, RuntimeError, ValueError, KeyError) as e:
        _fail(EXIT_RUNTIME, str(e))
    click.echo(evaluate.format_table({"model": report["model"], "center": report["center_baseline"]},
                                     f"{split} split, {report['clips']} clips, audio={audio_mode}"))
    click.echo(f"ciou@0.5: model {report['model']['ciou@0.5']:.4f}  "
               f"center {report['center_baseline']['ciou@0.5']:.4f}")


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(file_okay=False))
@click.option("--clip", "video_id", required=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--alpha", default=0.5, type=click.FloatRange(0, 1))
def visualize(checkpoint, data_dir, video_id, out_dir, alpha):
    """Write heatmap overlays with ground-truth boxes for one clip."""
    try:
        paths = pipeline.visualize(checkpoint, data_dir, video_id, out_dir, alpha)
    except (OSError, RuntimeError, ValueError, KeyError) as e:
        _fail(EXIT_RUNTIME, str(e))
    click.echo(f"wrote {len(paths)} images to {out_dir}")


@main.command()
@click.option("--records", "records_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def vote(records_path, out_path):
    """Majority-vote crowd annotations into consensus boxes."""
    try:
        stats = pipeline.vote_file(records_path, out_path)
    except pipeline.MalformedRecords as e:
        _fail(EXIT_USAGE, str(e))
    except OSError as e:
        _fail(EXIT_RUNTIME, str(e))
    click.echo(json.dumps(stats, indent=1))


if __name__ == "__main__":
    main()
