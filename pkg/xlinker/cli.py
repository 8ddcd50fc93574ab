"""
Command line: `xlinker build-kb | gen-train | train | link | evaluate`.
"""
import contextlib
import functools
import itertools
import logging
import sys

import click

from . import __version__
from .config import Config, load_config
from .corpus import (
    ENTITY_CHEMICAL,
    ENTITY_DISEASE,
    filter_nil_mentions,
    generate_training_set,
    iter_annotations,
    iter_pubtator,
    kos_training_instances,
    merge_training_sets,
    open_text,
    parse_bioconcepts,
    parse_pubtator,
    read_exclusions,
    read_training_set,
    write_training_set,
)
from .evaluation import evaluate_predictions, format_report
from .exceptions import XLinkerError
from .kos import KnowledgeBase, load_kos
from .pipeline import (
    MODE_FULL,
    MODES,
    Linker,
    PipelineConfig,
    link_corpus,
    read_predictions,
    write_predictions,
    write_report,
)
from .xmr import TrainConfig, XmrModel, train_model

logger = logging.getLogger(__name__)

FORMAT_PUBTATOR = "pubtator"
FORMAT_BIOCONCEPTS = "bioconcepts"
ENTITY_TYPES = click.Choice([ENTITY_DISEASE, ENTITY_CHEMICAL])

_defaults = PipelineConfig()


def reports_errors(func):
    """Turns library and I/O failures into a one-line diagnostic, exit 1."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (XLinkerError, OSError) as error:
            raise click.ClickException(str(error)) from error

    return wrapper


def _parse_ks(ctx, param, value):
    try:
        ks = sorted({int(part) for part in str(value).split(",") if part.strip()})
    except ValueError:
        raise click.BadParameter("expected comma-separated integers, e.g. 1,5")
    if not ks or ks[0] < 1:
        raise click.BadParameter("every k must be at least 1")
    return ks


def _load_config(ctx, param, value):
    if value is None:
        return None
    try:
        config = load_config(value)
    except (XLinkerError, OSError) as error:
        raise click.BadParameter(str(error))
    options = config.option_map()
    ctx.default_map = {name: dict(options) for name in ctx.command.commands}
    return config


@click.group()
@click.version_option(__version__, prog_name="xlinker")
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    callback=_load_config,
    is_eager=True,
    expose_value=False,
    help="key = value file supplying option defaults.",
)
@click.option("--verbose", "-v", is_flag=True, help="Log at DEBUG level.")
def cli(verbose):
    """Biomedical entity linking with XMR candidates and PageRank disambiguation."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@cli.command("build-kb")
@click.option("--kos", required=True, type=click.Path(dir_okay=False), help="CTD-style vocabulary TSV.")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="KB directory to write.")
@reports_errors
def build_kb(kos, out):
    """Validate a vocabulary and write a KB directory."""
    kb = load_kos(kos)
    kb.save(out, source=kos)
    click.echo("Wrote {} concepts to {}".format(len(kb), out))


@cli.command("gen-train")
@click.option(
    "--annotations",
    required=True,
    multiple=True,
    type=click.Path(dir_okay=False),
    help="Annotation file (repeatable; .gz accepted).",
)
@click.option(
    "--format",
    "annotation_format",
    type=click.Choice([FORMAT_PUBTATOR, FORMAT_BIOCONCEPTS]),
    default=FORMAT_PUBTATOR,
    show_default=True,
    help="Layout of the annotation files.",
)
@click.option("--kb", required=True, type=click.Path(), help="KB directory.")
@click.option(
    "--exclude-docs",
    multiple=True,
    type=click.Path(dir_okay=False),
    help="Document ids (or a PubTator file) whose annotations are dropped; repeatable.",
)
@click.option("--cap", type=click.IntRange(min=1), default=None, help="Maximum instances per label.")
@click.option("--entity-type", type=ENTITY_TYPES, default=None, help="Keep only this annotation type.")
@click.option("--with-kos", is_flag=True, help="Add the KOS names and synonyms.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Training file to write.")
@reports_errors
def gen_train(annotations, annotation_format, kb, exclude_docs, cap, entity_type, with_kos, out):
    """Generate a label_index<TAB>text training file."""
    kb = KnowledgeBase.load(kb)
    excluded = set()
    for path in exclude_docs:
        excluded |= read_exclusions(path)

    with contextlib.ExitStack() as stack:
        streams = [stack.enter_context(open_text(path)) for path in annotations]
        if annotation_format == FORMAT_PUBTATOR:
            triples = (
                iter_annotations(iter_pubtator(stream), entity_type) for stream in streams
            )
        else:
            triples = (parse_bioconcepts(stream, entity_type) for stream in streams)
        training_set = generate_training_set(
            itertools.chain.from_iterable(triples), kb, excluded, cap
        )
    if with_kos:
        training_set = merge_training_sets(kos_training_instances(kb), training_set)
    write_training_set(training_set, out)
    click.echo(
        "Wrote {} instances for {} labels to {}".format(
            len(training_set), len(training_set.label_counts()), out
        )
    )


@cli.command()
@click.option("--train", "train_path", required=True, type=click.Path(dir_okay=False), help="Training file.")
@click.option("--kb", required=True, type=click.Path(), help="KB directory.")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Model directory to write.")
@click.option("--seed", type=int, default=42, show_default=True, envvar="XLINKER_SEED", help="Tree construction seed.")
@click.option("--max-leaf", type=click.IntRange(min=1), default=100, show_default=True, help="Largest label-tree leaf.")
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True, help="Parallel solver workers.")
@reports_errors
def train(train_path, kb, out, seed, max_leaf, jobs):
    """Train an XMR model."""
    kb = KnowledgeBase.load(kb)
    training_set = read_training_set(train_path, kb)
    config = TrainConfig(max_leaf_size=max_leaf, seed=seed, n_jobs=jobs)
    model = train_model(training_set, config, label_ids=kb.ids)
    model.save(out)
    click.echo(
        "Trained on {} instances ({} tree nodes); model in {}".format(
            len(training_set), model.tree.num_nodes, out
        )
    )


@cli.command()
@click.option("--model", required=True, type=click.Path(file_okay=False), help="Model directory.")
@click.option("--kb", required=True, type=click.Path(), help="KB directory.")
@click.option("--input", "input_path", required=True, type=click.Path(dir_okay=False), help="PubTator mentions.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Predictions file to write.")
@click.option(
    "--threshold",
    type=click.FloatRange(0.0, 1.0),
    default=_defaults.threshold,
    show_default=True,
    help="XMR score needed to skip the string-match fallback.",
)
@click.option("--beam", type=click.IntRange(min=1), default=_defaults.beam, show_default=True, help="XMR beam width.")
@click.option(
    "--top-k", type=click.IntRange(min=1), default=_defaults.top_k, show_default=True, help="Ranked ids kept."
)
@click.option(
    "--string-top-n",
    type=click.IntRange(min=1),
    default=_defaults.string_top_n,
    show_default=True,
    help="String-match candidates per mention.",
)
@click.option("--teleport", type=float, default=_defaults.teleport, show_default=True, help="PageRank restart probability.")
@click.option("--tol", type=float, default=_defaults.tol, show_default=True, help="PageRank tolerance.")
@click.option("--max-iters", type=click.IntRange(min=1), default=_defaults.max_iters, show_default=True, help="PageRank iteration limit.")
@click.option("--mode", type=click.Choice(list(MODES)), default=MODE_FULL, show_default=True, help="Pipeline variant.")
@click.option("--entity-type", type=ENTITY_TYPES, default=None, help="Link only mentions of this type.")
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True, help="Documents linked in parallel.")
@click.option("--report", type=click.Path(dir_okay=False), default=None, help="Also write a JSON-lines report.")
@reports_errors
def link(
    model,
    kb,
    input_path,
    out,
    threshold,
    beam,
    top_k,
    string_top_n,
    teleport,
    tol,
    max_iters,
    mode,
    entity_type,
    jobs,
    report,
):
    """Link the mentions of a PubTator file."""
    try:
        config = PipelineConfig.from_config(
            Config(
                mode=mode,
                threshold=threshold,
                beam=beam,
                top_k=top_k,
                string_top_n=string_top_n,
                teleport=teleport,
                tol=tol,
                max_iters=max_iters,
            )
        )
    except ValueError as error:
        raise click.BadParameter(str(error))
    kb = KnowledgeBase.load(kb)
    linker = Linker(XmrModel.load(model), kb, config=config, entity_type=entity_type)

    errors = []
    with open_text(input_path) as f:
        documents = parse_pubtator(f, errors)
    result = link_corpus(documents, linker, n_jobs=jobs, errors=errors)
    with open_text(out, "wt") as f:
        write_predictions(documents, result.linked, f)
    if report:
        with open_text(report, "wt") as f:
            write_report(result.linked, f)
    for doc_id, message in result.errors:
        logger.warning("%s: %s", doc_id, message)
    click.echo(
        "Linked {} mentions in {} documents ({} errors)".format(
            len(result.linked), len(documents), len(result.errors)
        )
    )


@cli.command()
@click.option("--pred", required=True, type=click.Path(dir_okay=False), help="Predictions from `link`.")
@click.option("--gold", required=True, type=click.Path(dir_okay=False), help="Gold PubTator file.")
@click.option("--k", default="1,5", show_default=True, callback=_parse_ks, help="Comma-separated cut-offs.")
@click.option("--kb", default=None, type=click.Path(), help="KB directory; drops obsolete gold ids when given.")
@click.option("--entity-type", type=ENTITY_TYPES, default=None, help="Evaluate only this type.")
@click.option("--name", default=None, help="Dataset name in the report (default: the gold file).")
@reports_errors
def evaluate(pred, gold, k, kb, entity_type, name):
    """Top-k accuracy of a predictions file."""
    kb = KnowledgeBase.load(kb) if kb else None
    with open_text(pred) as f:
        predictions = read_predictions(f)
    with open_text(gold) as f:
        documents, nil_counts = filter_nil_mentions(parse_pubtator(f), kb, entity_type)
    report = evaluate_predictions(predictions, documents, k, name or gold, nil_counts)
    click.echo(format_report(report), nl=False)


def run(argv=None) -> int:
    """Runs the command line on `argv` and returns the exit status."""
    try:
        cli.main(args=argv, prog_name="xlinker", standalone_mode=True)
    except SystemExit as exit_:
        if exit_.code is None:
            return 0
        return exit_.code if isinstance(exit_.code, int) else 1
    return 0


def main():
    sys.exit(run())
