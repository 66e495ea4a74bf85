"""End-to-end experiment pipeline with per-stage artifacts on disk.

Every stage reads its inputs from the artifact directory and writes its
outputs back there, so each stage can be re-run individually and the whole
run is reproducible byte-for-byte from the config and seed.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import corpus as corpus_mod
from . import counterfactual as cf
from . import lattice as lattice_mod
from .corpus import Lexicon, ParallelCorpus, read_challenge, read_corpus, \
    read_lexicon, write_challenge, write_corpus, write_lexicon
from .errors import InvalidArgument, InvalidState, StageFailure
from .evaluation import MetricsReport, challenge_metrics, classify_gender, \
    corpus_bleu, read_metrics, write_metrics
from .model import ModelConfig, Params, Translator, load_adam_state, \
    load_params, save_adam_state, save_params
from .training import EvalSuite, StopRule, TrainSettings, ewc_lambda_grid, \
    estimate_fisher, fine_tune, select_lambda, train_baseline
from .vocab import EOS_ID, Vocab

COUNTERFACTUAL_SETS = ("original", "ftrans_original", "ftrans_swapped", "balanced")
DIRECT_SYSTEMS = (
    "baseline",
    "adapt_original",
    "adapt_ftrans_original",
    "adapt_ftrans_swapped",
    "adapt_balanced",
    "handcrafted_no_overlap",
    "handcrafted",
    "handcrafted_converged",
    "handcrafted_ewc",
)
RESCORE_SYSTEMS = {
    "rescore_no_overlap": "handcrafted_no_overlap",
    "rescore_handcrafted": "handcrafted",
    "rescore_converged": "handcrafted_converged",
}
REPORT_ORDER = DIRECT_SYSTEMS + tuple(RESCORE_SYSTEMS)

STAGES = (
    "lexicon", "corpus", "challenge", "train", "counterfactual", "adapt",
    "fisher", "ewc", "translate", "rescore", "evaluate", "report",
)


@dataclass
class PipelineConfig:
    seed: int = 42
    train_seed: int | None = None  # defaults to seed + 3
    n_professions: int = 32
    train_size: int = 20000
    valid_size: int = 500
    test_size: int = 500
    bias_ratio: float = 0.9
    challenge_size: int = 400
    embed_dim: int = 32
    hidden_dim: int = 64
    lr: float = 3e-3
    batch_size: int = 32
    eval_every: int = 500
    patience: int = 3
    min_delta: float = 0.1
    max_steps: int = 6000
    ft_max_epochs: int = 60
    bleu_stop_pct: float = 5.0
    converged_epochs: int = 200
    converged_train_loss: float = 0.01
    fisher_samples: int = 1000
    ewc_lambdas: list[float] = field(default_factory=lambda: [0.1, 1.0, 10.0, 100.0])
    ewc_max_epochs: int = 30
    beam_width: int = 4

    def __post_init__(self):
        if not 0.5 <= self.bias_ratio <= 1.0:
            raise InvalidArgument("bias_ratio must lie in [0.5, 1]")
        if self.challenge_size % 4:
            raise InvalidArgument("challenge_size must be divisible by 4")

    @property
    def effective_train_seed(self) -> int:
        return self.seed + 3 if self.train_seed is None else self.train_seed

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidArgument(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidArgument("config must be a JSON object")
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8"
        )


class Workspace:
    """Artifact paths and lazily loaded shared inputs for one run directory."""

    def __init__(self, out: str | Path, config: PipelineConfig):
        self.root = Path(out)
        self.config = config
        self._lexicon: Lexicon | None = None
        self._vocabs: tuple[Vocab, Vocab] | None = None

    def dir(self, name: str) -> Path:
        path = self.root / name
        path.mkdir(parents=True, exist_ok=True)
        return path

    @property
    def lexicon_path(self) -> Path:
        return self.root / "lexicon.tsv"

    @property
    def lexicon(self) -> Lexicon:
        if self._lexicon is None:
            self._lexicon = read_lexicon(self.lexicon_path)
        return self._lexicon

    @property
    def vocabs(self) -> tuple[Vocab, Vocab]:
        if self._vocabs is None:
            lex = self.lexicon
            self._vocabs = (lex.source_vocab(), lex.target_vocab())
        return self._vocabs

    def model_config(self) -> ModelConfig:
        sv, tv = self.vocabs
        return ModelConfig(
            src_vocab_size=len(sv),
            tgt_vocab_size=len(tv),
            embed_dim=self.config.embed_dim,
            hidden_dim=self.config.hidden_dim,
            seed=self.config.effective_train_seed,
        )

    def settings(self, seed_offset: int = 0) -> TrainSettings:
        c = self.config
        return TrainSettings(
            lr=c.lr, batch_size=c.batch_size, eval_every=c.eval_every,
            patience=c.patience, min_delta=c.min_delta, max_steps=c.max_steps,
            seed=c.effective_train_seed + seed_offset,
        )

    def corpus_base(self, name: str) -> Path:
        return self.dir("corpus") / name

    def checkpoint(self, name: str) -> Path:
        return self.dir("checkpoints") / f"{name}.ckpt"

    def opt_state_path(self, name: str) -> Path:
        return self.dir("checkpoints") / f"{name}.opt"

    def log_path(self, name: str) -> Path:
        return self.dir("logs") / f"{name}.log"

    def hyp_path(self, system: str, split: str) -> Path:
        return self.dir("hyps") / f"{system}.{split}.tgt"

    def metrics_path(self, system: str) -> Path:
        return self.dir("metrics") / f"{system}.json"

    def encode_pairs(self, corpus: ParallelCorpus) -> list:
        sv, tv = self.vocabs
        return [(sv.ids(s), tv.ids(t)) for s, t in corpus]

    def valid_suite(self) -> EvalSuite:
        valid = read_corpus(self.corpus_base("valid"))
        sv, tv = self.vocabs
        return EvalSuite(valid.sources(), valid.targets(), sv, tv)

    def translator(self, system: str) -> Translator:
        params = load_params(self.checkpoint(system), self.model_config())
        sv, tv = self.vocabs
        return Translator(params, self.model_config(), sv, tv,
                          beam_width=self.config.beam_width)

    def challenge_accuracy_fn(self) -> Callable[[Params], float]:
        items = read_challenge(self.root / "challenge.jsonl")
        sv, tv = self.vocabs
        lexicon = self.lexicon
        config = self.model_config()
        beam = self.config.beam_width

        def accuracy(params: Params) -> float:
            translator = Translator(params, config, sv, tv, beam_width=beam)
            hyps, _ = translator.translate_corpus([i.source for i in items])
            preds = [classify_gender(h, i, lexicon) for h, i in zip(hyps, items)]
            return challenge_metrics(preds, items).accuracy

        return accuracy


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def stage_lexicon(ws: Workspace) -> None:
    cfg = ws.config
    lexicon = corpus_mod.generate_lexicon(cfg.n_professions, cfg.seed)
    write_lexicon(lexicon, ws.lexicon_path)
    ws._lexicon, ws._vocabs = None, None
    cf.write_stopwords(cf.default_stopword_map(lexicon), ws.root / "stopwords.tsv")
    _, tv = ws.vocabs
    table = lattice_mod.inflection_table_from_lexicon(ws.lexicon, tv)
    flower = lattice_mod.build_flower_transducer(table, len(tv))
    lattice_mod.write_fst_text(flower, ws.root / "flower.fst", tv)
    print(f"[lexicon] {cfg.n_professions} professions, "
          f"{len(ws.lexicon.challenge_professions())} reserved for the challenge set")


def stage_corpus(ws: Workspace) -> None:
    cfg = ws.config
    train, valid, test = corpus_mod.generate_splits(
        ws.lexicon, cfg.train_size, cfg.valid_size, cfg.test_size,
        cfg.bias_ratio, cfg.seed + 1,
    )
    write_corpus(train, ws.corpus_base("train"))
    write_corpus(valid, ws.corpus_base("valid"))
    write_corpus(test, ws.corpus_base("test"))
    handcrafted = corpus_mod.generate_handcrafted(ws.lexicon, no_overlap=False)
    write_corpus(handcrafted, ws.corpus_base("handcrafted"))
    no_overlap = corpus_mod.generate_handcrafted(ws.lexicon, no_overlap=True)
    write_corpus(no_overlap, ws.corpus_base("handcrafted_no_overlap"))
    print(f"[corpus] train/valid/test = {len(train)}/{len(valid)}/{len(test)}, "
          f"handcrafted = {len(handcrafted)}")


def stage_challenge(ws: Workspace) -> None:
    cfg = ws.config
    items = corpus_mod.generate_challenge_set(
        ws.lexicon, cfg.challenge_size, cfg.seed + 2
    )
    write_challenge(items, ws.root / "challenge.jsonl")
    print(f"[challenge] {len(items)} items, balanced over gender and stereotype")


def stage_train(ws: Workspace) -> None:
    train = read_corpus(ws.corpus_base("train"))
    pairs = ws.encode_pairs(train)
    result = train_baseline(
        pairs, ws.valid_suite(), ws.model_config(), ws.settings()
    )
    save_params(ws.checkpoint("baseline"), result.params)
    save_adam_state(ws.opt_state_path("baseline"), result.opt_state)
    result.log.write(ws.log_path("baseline"))
    print(f"[train] baseline: {result.steps} steps kept, "
          f"valid BLEU {result.valid_bleu:.2f} ({result.log.stop_reason})")


def stage_counterfactual(ws: Workspace) -> None:
    train = read_corpus(ws.corpus_base("train"))
    swaps = cf.read_stopwords(ws.root / "stopwords.tsv")
    translator = ws.translator("baseline")
    sets = cf.build_adaptation_sets(train, swaps, translator)
    for name, data in sets.named():
        write_corpus(data, ws.dir("counterfactual") / f"adapt.{name}")
    fraction = len(sets.original) / len(train)
    print(f"[counterfactual] gendered fraction {fraction:.3f}, "
          f"|original| = {len(sets.original)}, truncated = {sets.truncated}")


def _load_baseline(ws: Workspace):
    params = load_params(ws.checkpoint("baseline"), ws.model_config())
    state = load_adam_state(ws.opt_state_path("baseline"))
    return params, state


def _adapt_run(ws: Workspace, name: str, adaptation: ParallelCorpus,
               stop: StopRule, seed_offset: int) -> None:
    params, state = _load_baseline(ws)
    result = fine_tune(
        params, state, ws.encode_pairs(adaptation), ws.valid_suite(), stop,
        ws.model_config(), ws.settings(seed_offset),
    )
    save_params(ws.checkpoint(name), result.params)
    save_adam_state(ws.opt_state_path(name), result.opt_state)
    result.log.write(ws.log_path(name))
    print(f"[adapt] {name}: {result.steps} steps kept, "
          f"valid BLEU {result.valid_bleu:.2f} ({result.log.stop_reason})")


def stage_adapt(ws: Workspace, only: str | None = None) -> None:
    cfg = ws.config
    runs: list[tuple[str, StopRule, int]] = [
        ("adapt_original", StopRule(epochs=1), 11),
        ("adapt_ftrans_original", StopRule(epochs=1), 12),
        ("adapt_ftrans_swapped", StopRule(epochs=1), 13),
        ("adapt_balanced", StopRule(epochs=1), 14),
        ("handcrafted",
         StopRule(bleu_degradation_pct=cfg.bleu_stop_pct,
                  max_epochs=cfg.ft_max_epochs), 15),
        ("handcrafted_no_overlap",
         StopRule(bleu_degradation_pct=cfg.bleu_stop_pct,
                  max_epochs=cfg.ft_max_epochs), 16),
        ("handcrafted_converged",
         StopRule(epochs=cfg.converged_epochs,
                  train_loss=cfg.converged_train_loss), 17),
    ]
    for name, stop, offset in runs:
        if only is not None and name != only:
            continue
        if name.startswith("adapt_"):
            base = ws.dir("counterfactual") / f"adapt.{name[len('adapt_'):]}"
        elif name == "handcrafted_converged":
            base = ws.corpus_base("handcrafted")
        else:
            base = ws.corpus_base(name)
        _adapt_run(ws, name, read_corpus(base), stop, offset)


def stage_fisher(ws: Workspace) -> None:
    cfg = ws.config
    params, _ = _load_baseline(ws)
    train = read_corpus(ws.corpus_base("train"))
    fisher = estimate_fisher(
        params, ws.encode_pairs(train), n_samples=cfg.fisher_samples,
        seed=cfg.seed + 4,
    )
    save_params(ws.checkpoint("fisher"), fisher)
    print(f"[fisher] estimated from {min(cfg.fisher_samples, len(train))} samples")


def stage_ewc(ws: Workspace) -> None:
    cfg = ws.config
    anchor, state = _load_baseline(ws)
    fisher = load_params(ws.checkpoint("fisher"), ws.model_config())
    adaptation = ws.encode_pairs(read_corpus(ws.corpus_base("handcrafted")))
    accuracy_fn = ws.challenge_accuracy_fn()
    stop = StopRule(bleu_degradation_pct=cfg.bleu_stop_pct,
                    max_epochs=cfg.ewc_max_epochs)
    runs = ewc_lambda_grid(
        anchor, state, fisher, adaptation, ws.valid_suite(), cfg.ewc_lambdas,
        stop, ws.model_config(), ws.settings(18), accuracy_fn,
    )
    reference = accuracy_fn(
        load_params(ws.checkpoint("handcrafted"), ws.model_config())
    )
    chosen = select_lambda(runs, reference)
    save_params(ws.checkpoint("handcrafted_ewc"), chosen.result.params)
    save_adam_state(ws.opt_state_path("handcrafted_ewc"), chosen.result.opt_state)
    chosen.result.log.write(ws.log_path("handcrafted_ewc"))
    grid = {
        "reference_accuracy": reference,
        "selected_lambda": chosen.lam,
        "runs": [
            {
                "lambda": r.lam,
                "bleu": r.result.valid_bleu,
                "accuracy": r.accuracy,
                "displacement": r.displacement,
            }
            for r in runs
        ],
    }
    (ws.dir("logs") / "ewc_grid.json").write_text(
        json.dumps(grid, indent=2) + "\n", encoding="utf-8"
    )
    print(f"[ewc] lambda grid {cfg.ewc_lambdas} -> selected {chosen.lam} "
          f"(reference accuracy {reference:.1f})")


def stage_translate(ws: Workspace, beam_width: int | None = None,
                    only: str | None = None) -> None:
    items = read_challenge(ws.root / "challenge.jsonl")
    test = read_corpus(ws.corpus_base("test"))
    for system in DIRECT_SYSTEMS:
        if only is not None and system != only:
            continue
        translator = ws.translator(system)
        width = beam_width if beam_width is not None else ws.config.beam_width
        chall_hyps, _ = translator.translate_corpus(
            [i.source for i in items], beam_width=width
        )
        corpus_mod.write_sentences(chall_hyps, ws.hyp_path(system, "challenge"))
        test_hyps, _ = translator.translate_corpus(test.sources(), beam_width=width)
        corpus_mod.write_sentences(test_hyps, ws.hyp_path(system, "test"))
        print(f"[translate] {system}: challenge + test decoded (beam {width})")


def stage_rescore(ws: Workspace) -> None:
    sv, tv = ws.vocabs
    flower, unknown = lattice_mod.read_fst_text(ws.root / "flower.fst", tv)
    if unknown:
        print(f"[rescore] warning: {unknown} unknown tokens in flower.fst")
    items = read_challenge(ws.root / "challenge.jsonl")
    test = read_corpus(ws.corpus_base("test"))
    for system, model_name in RESCORE_SYSTEMS.items():
        params = load_params(ws.checkpoint(model_name), ws.model_config())
        for split, sources in (
            ("challenge", [list(i.source) for i in items]),
            ("test", test.sources()),
        ):
            hyp_tokens = corpus_mod.read_sentences(ws.hyp_path("baseline", split))
            rescored = lattice_mod.rescore_hypotheses(
                params,
                [sv.ids(s) for s in sources],
                [tv.ids(h) + [EOS_ID] for h in hyp_tokens],
                flower,
            )
            corpus_mod.write_sentences(
                [tv.words(h.tokens) for h in rescored],
                ws.hyp_path(system, split),
            )
        print(f"[rescore] {system}: baseline hypotheses rescored with {model_name}")


def rescore_external(ws: Workspace, name: str, challenge_hyps: str | Path,
                     model_name: str = "handcrafted_converged") -> None:
    """Black-box mode: rescore challenge hypotheses produced by any system,
    using only the hypothesis file."""
    sv, tv = ws.vocabs
    flower, _ = lattice_mod.read_fst_text(ws.root / "flower.fst", tv)
    items = read_challenge(ws.root / "challenge.jsonl")
    hyp_tokens = corpus_mod.read_sentences(challenge_hyps)
    if len(hyp_tokens) != len(items):
        raise InvalidArgument(
            f"{challenge_hyps}: expected {len(items)} hypotheses, "
            f"got {len(hyp_tokens)}"
        )
    params = load_params(ws.checkpoint(model_name), ws.model_config())
    rescored = lattice_mod.rescore_hypotheses(
        params,
        [sv.ids(i.source) for i in items],
        [tv.ids(h) + [EOS_ID] for h in hyp_tokens],
        flower,
    )
    corpus_mod.write_sentences(
        [tv.words(h.tokens) for h in rescored], ws.hyp_path(name, "challenge")
    )
    print(f"[rescore] {name}: external hypotheses rescored with {model_name}")


def evaluate_system(ws: Workspace, system: str) -> MetricsReport:
    items = read_challenge(ws.root / "challenge.jsonl")
    lexicon = ws.lexicon
    chall_hyps = corpus_mod.read_sentences(ws.hyp_path(system, "challenge"))
    if len(chall_hyps) != len(items):
        raise InvalidState(f"{system}: challenge hypothesis count mismatch")
    preds = [classify_gender(h, i, lexicon) for h, i in zip(chall_hyps, items)]
    report = challenge_metrics(preds, items)
    test_path = ws.hyp_path(system, "test")
    if test_path.exists():
        test = read_corpus(ws.corpus_base("test"))
        report.bleu = corpus_bleu(
            corpus_mod.read_sentences(test_path), test.targets()
        )
    return report


def stage_evaluate(ws: Workspace) -> None:
    systems = list(REPORT_ORDER)
    known = set(systems)
    extra = sorted(
        p.name[: -len(".challenge.tgt")]
        for p in ws.dir("hyps").glob("*.challenge.tgt")
        if p.name[: -len(".challenge.tgt")] not in known
    )
    for system in systems + extra:
        if not ws.hyp_path(system, "challenge").exists():
            raise InvalidState(
                f"missing hypotheses for {system}; run translate/rescore first"
            )
        report = evaluate_system(ws, system)
        write_metrics(report, ws.metrics_path(system))
        bleu = "-" if report.bleu is None else f"{report.bleu:.2f}"
        print(f"[evaluate] {system}: BLEU {bleu}, accuracy {report.accuracy:.1f}")


def _format_value(value, width: int, decimals: int = 1) -> str:
    if value is None:
        return "-".rjust(width)
    if isinstance(value, str):  # "inf"
        return value.rjust(width)
    return f"{value:.{decimals}f}".rjust(width)


def render_report(ws: Workspace) -> str:
    rows = []
    extra = sorted(
        p.stem for p in ws.dir("metrics").glob("*.json")
        if p.stem not in REPORT_ORDER
    )
    for system in list(REPORT_ORDER) + extra:
        path = ws.metrics_path(system)
        if path.exists():
            rows.append((system, read_metrics(path)))
    name_w = max(len("system"), max((len(s) for s, _ in rows), default=0))
    lines = [
        f"{'system'.ljust(name_w)}  {'BLEU':>7} {'Acc':>7} {'dG':>7} "
        f"{'dS':>7} {'M:F':>7}",
        "-" * (name_w + 2 + 5 * 8),
    ]
    for system, m in rows:
        lines.append(
            f"{system.ljust(name_w)}  "
            f"{_format_value(m['bleu'], 7, 2)} "
            f"{_format_value(m['accuracy'], 7)} "
            f"{_format_value(m['delta_g'], 7)} "
            f"{_format_value(m['delta_s'], 7)} "
            f"{_format_value(m['m_f'], 7, 2)}"
        )
    return "\n".join(lines) + "\n"


def stage_report(ws: Workspace) -> None:
    text = render_report(ws)
    (ws.root / "report.md").write_text(text, encoding="utf-8")
    print(text, end="")


_STAGE_FUNCS = {
    "lexicon": stage_lexicon,
    "corpus": stage_corpus,
    "challenge": stage_challenge,
    "train": stage_train,
    "counterfactual": stage_counterfactual,
    "adapt": stage_adapt,
    "fisher": stage_fisher,
    "ewc": stage_ewc,
    "translate": stage_translate,
    "rescore": stage_rescore,
    "evaluate": stage_evaluate,
    "report": stage_report,
}


def run_pipeline(config: PipelineConfig, out: str | Path,
                 stages: Sequence[str] | None = None) -> Workspace:
    """Run the listed stages (default: all) in order against `out`."""
    ws = Workspace(out, config)
    ws.root.mkdir(parents=True, exist_ok=True)
    config.save(ws.root / "config.json")
    todo = list(STAGES) if stages is None else list(stages)
    for stage in todo:
        if stage not in _STAGE_FUNCS:
            raise InvalidArgument(f"unknown stage {stage!r}")
    started = time.time()
    for stage in todo:
        try:
            _STAGE_FUNCS[stage](ws)
        except Exception as exc:
            raise StageFailure(stage, exc) from exc
    print(f"[pipeline] {len(todo)} stage(s) finished in "
          f"{time.time() - started:.1f}s")
    return ws
