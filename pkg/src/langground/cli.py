"""Command-line entry points: train, eval, plan, gen, serve."""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from . import corpus, evaluate, grounding, ibm2, neural, planners, reports
from .config import Config, load_config
from .world import resolve_env

MODEL_CHOICES = ("ibm2", "multi-nn", "multi-rnn", "single-rnn")


def _load_grounder(path: str, env):
    """Load a serialized model of either family, tagged by its format."""
    data = json.loads(Path(path).read_text())
    tag = data.get("format", "")
    if tag == ibm2.FORMAT_TAG:
        model = ibm2.model_from_dict(data)
        return evaluate.Ibm2Grounder(model, evaluate.reward_spaces(env))
    if tag == neural.FORMAT_TAG:
        return neural.model_from_dict(data)
    raise click.ClickException(f"unrecognized model format {tag!r} in {path}")


def _default_grounder(env, config: Config):
    """Deterministic quick-start model: IBM2 on a generated corpus.

    The fit is cheap but cached under ~/.cache/langground anyway, keyed by
    the exact environment and training knobs, so repeat invocations skip it.
    """
    import hashlib

    from .world import env_to_dict

    key = hashlib.sha256(
        json.dumps(
            [env_to_dict(env), config.n_per_task, config.seed,
             config.em_bakein_iters, config.em_full_iters],
            sort_keys=True,
        ).encode()
    ).hexdigest()[:16]
    cache = Path.home() / ".cache" / "langground" / f"ibm2_{key}.json"
    if cache.exists():
        try:
            model = ibm2.load_model(cache)
            return evaluate.Ibm2Grounder(model, evaluate.reward_spaces(env))
        except (ValueError, KeyError):
            cache.unlink()
    entries = corpus.gen_synthetic_corpus(env, config.n_per_task, config.seed)
    model = ibm2.train_em(entries, config.em_bakein_iters, config.em_full_iters)
    try:
        cache.parent.mkdir(parents=True, exist_ok=True)
        ibm2.save_model(model, cache)
    except OSError:
        pass
    return evaluate.Ibm2Grounder(model, evaluate.reward_spaces(env))


@click.group()
def main():
    """Ground natural-language commands to reward functions across a
    planning-abstraction hierarchy and execute them in a gridworld."""


@main.command()
@click.option("--model", "model_kind", type=click.Choice(MODEL_CHOICES),
              required=True)
@click.option("--corpus", "corpus_path", required=True,
              type=click.Path(exists=True), help="JSONL training corpus.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--env", "env_spec", default="regular", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--epochs", type=int, default=None,
              help="Override the configured epoch count (neural models).")
def train(model_kind, corpus_path, out_path, env_spec, seed, config_path, epochs):
    """Train a grounding model and write it to a JSON model file."""
    config = load_config(config_path, seed=seed, epochs=epochs)
    env = resolve_env(env_spec)
    entries = corpus.load_corpus(corpus_path)
    click.echo(f"training {model_kind} on {len(entries)} commands "
               f"(levels {corpus.level_counts(entries)})")
    started = time.perf_counter()
    if model_kind == "ibm2":
        model = ibm2.train_em(entries, config.em_bakein_iters,
                              config.em_full_iters)
        ibm2.save_model(model, out_path)
    else:
        model = neural.train_neural(
            model_kind, entries, evaluate.reward_space_strings(env),
            epochs=config.epochs, seed=config.seed,
            batch_size=config.batch_size, lr=config.lr,
            embed_dim=config.embed_dim, hidden_dim=config.hidden_dim,
            head_dim=config.head_dim, dropout_p=config.dropout_p,
        )
        neural.save_model(model, out_path)
    click.echo(f"saved {out_path} ({time.perf_counter() - started:.1f}s)")


@main.command()
@click.option("--env", "env_spec", default="regular", show_default=True)
@click.option("--n", "n_per_task", default=30, show_default=True,
              help="Commands generated per task.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", default="corpus.jsonl", show_default=True)
def gen(env_spec, n_per_task, seed, out_path):
    """Generate a synthetic command corpus for an environment."""
    env = resolve_env(env_spec)
    entries = corpus.gen_synthetic_corpus(env, n_per_task, seed)
    corpus.save_corpus(entries, out_path)
    click.echo(f"wrote {len(entries)} commands to {out_path} "
               f"(levels {corpus.level_counts(entries)})")


@main.command()
@click.option("--command", "text", required=True)
@click.option("--env", "env_spec", default="regular", show_default=True)
@click.option("--planner", type=click.Choice(planners.PLANNER_TOKENS),
              default="amdp", show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=True),
              help="Trained model file; defaults to a quick IBM2 fit.")
@click.option("--config", "config_path", type=click.Path(exists=True))
def plan(text, env_spec, planner, model_path, config_path):
    """Ground one command, plan it, and print the executed trace."""
    config = load_config(config_path)
    env = resolve_env(env_spec)
    grounder = (
        _load_grounder(model_path, env) if model_path
        else _default_grounder(env, config)
    )
    started = time.perf_counter()
    tokens = corpus.tokenize(text)
    level, reward, _ = grounder.infer(tokens)
    lifted = grounding.parse_machine_string(reward, level)
    try:
        grounded = grounding.bind(lifted, env)
        trace = planners.plan_command(
            env, grounded, planner, alpha=config.brtdp_alpha,
            tau=config.brtdp_tau, max_trials=config.brtdp_max_trials,
            gamma=config.gamma,
        )
    except (grounding.NoMatchError, grounding.AmbiguousError,
            planners.UnreachableError) as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    final_env, steps = planners.execute_trace(env, trace)
    satisfied = grounded.satisfied_l0(final_env, final_env.to_l0())
    elapsed = time.perf_counter() - started
    click.echo(f"level:    {level}")
    click.echo(f"lifted:   {reward}")
    click.echo(f"grounded: {grounded.render()}")
    click.echo(f"planner:  {planner}")
    click.echo(f"steps:    {len(steps)} {' '.join(steps) if steps else '(none)'}")
    click.echo(f"satisfied:{satisfied}  total_s:{elapsed:.2f}")
    if not satisfied:
        raise click.ClickException("executed trace does not satisfy the goal")


@main.command("eval")
@click.option("--mode", type=click.Choice(("cv", "cross-level", "timing")),
              required=True)
@click.option("--env", "env_spec", default="regular", show_default=True)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True),
              help="JSONL corpus; generated fresh when omitted.")
@click.option("--models", default="ibm2,multi-nn,multi-rnn,single-rnn",
              show_default=True, help="Comma-separated model kinds.")
@click.option("--outdir", default="reports", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--epochs", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--timing-env", default=None,
              help="Environment for --mode timing (defaults to --env).")
def eval_cmd(mode, env_spec, corpus_path, models, outdir, seed, config_path,
             epochs, workers, timing_env):
    """Run an evaluation harness and write JSON/CSV/PNG reports."""
    config = load_config(config_path, seed=seed, epochs=epochs, workers=workers)
    env = resolve_env(env_spec)
    kinds = [m.strip() for m in models.split(",") if m.strip()]
    for kind in kinds:
        if kind not in MODEL_CHOICES:
            raise click.ClickException(f"unknown model kind {kind!r}")
    entries = (
        corpus.load_corpus(corpus_path)
        if corpus_path
        else corpus.gen_synthetic_corpus(env, config.n_per_task, config.seed)
    )
    if mode == "cv":
        results = []
        for kind in kinds:
            click.echo(f"cross-validating {kind} ...")
            report = evaluate.kfold_cv(
                entries, kind, k=config.cv_folds, seed=config.seed, env=env,
                workers=config.workers, epochs=config.epochs,
            )
            click.echo(f"  level={report.level_accuracy:.3f} "
                       f"reward={report.reward_accuracy:.3f}")
            results.append(report)
        paths = reports.write_cv_report(results, outdir)
    elif mode == "cross-level":
        paths = []
        for kind in kinds:
            click.echo(f"cross-level matrix for {kind} ...")
            report = evaluate.cross_level_matrix(
                entries, kind, env, trials=config.cross_level_trials,
                seed=config.seed, epochs=config.epochs,
            )
            for row in report.matrix:
                click.echo("  " + "  ".join(f"{v:.3f}" for v in row))
            paths.extend(reports.write_cross_level_report(report, outdir))
    else:
        plan_env = resolve_env(timing_env) if timing_env else env
        grounder = _default_grounder(env, config)
        composite = [e for e in entries if evaluate.is_composite(e, plan_env)]
        usable = evaluate.correctly_grounded(grounder, composite)
        click.echo(f"timing {len(usable)} correctly grounded composite "
                   f"commands on {timing_env or env_spec}")
        report = evaluate.timing_harness(
            usable, grounder, plan_env, repeats=config.timing_repeats,
            timeout_seconds=config.timing_timeout_seconds, seed=config.seed,
        )
        for pair, (q1, med, q3) in report.quartiles.items():
            click.echo(f"  {pair}: q1={q1:.3f} median={med:.3f} q3={q3:.3f}")
        paths = reports.write_timing_report(report, outdir)
    for path in paths:
        click.echo(f"wrote {path}")


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--env", "env_spec", default="regular", show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=True))
@click.option("--planner", type=click.Choice(planners.PLANNER_TOKENS),
              default="amdp", show_default=True)
@click.option("--ui-dir", type=click.Path(exists=True, file_okay=False),
              help="Static frontend assets to serve at /.")
@click.option("--config", "config_path", type=click.Path(exists=True))
def serve(port, host, env_spec, model_path, planner, ui_dir, config_path):
    """Start the HTTP session service (and optionally the web console)."""
    import uvicorn

    from .server import create_app

    config = load_config(config_path)
    env = resolve_env(env_spec)
    grounder = (
        _load_grounder(model_path, env) if model_path
        else _default_grounder(env, config)
    )
    if ui_dir is None:
        candidate = Path.cwd() / "frontend" / "dist"
        if candidate.is_dir():
            ui_dir = str(candidate)
    app = create_app(env, grounder, default_planner=planner, ui_dir=ui_dir)
    click.echo(f"serving on http://{host}:{port}/v1 "
               f"(ui: {ui_dir or 'disabled'})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    sys.exit(main())
