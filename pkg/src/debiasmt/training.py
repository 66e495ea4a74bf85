"""Training loops: baseline to validation-BLEU convergence, continued
fine-tuning without optimizer reset, Fisher estimation, and fine-tuning with
a quadratic anchor penalty (elastic weight consolidation)."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgument
from .evaluation import corpus_bleu
from .model import (IdPair, ModelConfig, Params, Translator, adam_init,
                    adam_step, copy_adam_state, copy_params, init_params,
                    loss_and_grad)
from .vocab import Vocab


@dataclass
class TrainRecord:
    step: int
    loss: float
    bleu: float
    accuracy: float | None = None


@dataclass
class TrainLog:
    records: list[TrainRecord] = field(default_factory=list)
    stop_reason: str = ""

    def append(self, record: TrainRecord) -> None:
        if self.records and record.step <= self.records[-1].step:
            raise InvalidArgument("train log steps must increase strictly")
        self.records.append(record)

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(json.dumps({
                    "step": r.step, "loss": r.loss, "bleu": r.bleu,
                    "accuracy": r.accuracy,
                }) + "\n")
            fh.write(json.dumps({"stop_reason": self.stop_reason}) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "TrainLog":
        log = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            if "stop_reason" in obj:
                log.stop_reason = obj["stop_reason"]
            else:
                log.append(TrainRecord(
                    obj["step"], obj["loss"], obj["bleu"], obj.get("accuracy")
                ))
        return log


@dataclass
class TrainSettings:
    lr: float = 3e-3
    batch_size: int = 32
    eval_every: int = 500
    patience: int = 3          # evaluations without BLEU gain before stopping
    min_delta: float = 0.1     # BLEU gain that counts as an improvement
    max_steps: int = 6000
    seed: int = 0


@dataclass
class StopRule:
    """Fine-tuning stop criterion; whichever configured bound hits first."""

    epochs: int | None = None
    bleu_degradation_pct: float | None = None
    train_loss: float | None = None
    max_epochs: int = 200

    @classmethod
    def parse(cls, text: str) -> "StopRule":
        kind, _, value = text.partition(":")
        if kind == "epochs":
            return cls(epochs=int(value))
        if kind == "bleu":
            return cls(bleu_degradation_pct=float(value))
        if kind == "converged":
            return cls(epochs=200, train_loss=0.01)
        raise InvalidArgument(f"unknown stop rule {text!r}")


@dataclass
class TrainResult:
    params: Params
    opt_state: dict
    log: TrainLog
    valid_bleu: float
    steps: int


@dataclass
class EvalSuite:
    """Validation data used for BLEU-based stopping decisions."""

    sources: list[list[str]]
    references: list[list[str]]
    src_vocab: Vocab
    tgt_vocab: Vocab

    def bleu(self, params: Params, config: ModelConfig) -> float:
        translator = Translator(params, config, self.src_vocab, self.tgt_vocab)
        hyps, _ = translator.translate_corpus(self.sources, beam_width=1)
        return corpus_bleu(hyps, self.references)


def _epoch_order(n: int, rng: np.random.RandomState) -> np.ndarray:
    return rng.permutation(n)


def train_baseline(
    train_pairs: Sequence[IdPair],
    valid: EvalSuite,
    config: ModelConfig,
    settings: TrainSettings,
) -> TrainResult:
    """Train fresh parameters until validation BLEU stops improving by more
    than `min_delta` for `patience` consecutive evaluations (or `max_steps`),
    returning the best-BLEU checkpoint."""
    if not train_pairs or not valid.sources:
        raise InvalidArgument("training and validation data must be nonempty")
    params = init_params(config)
    state = adam_init(params)
    rng = np.random.RandomState(settings.seed)
    log = TrainLog()
    best = {
        "bleu": -1.0,
        "params": copy_params(params),
        "state": copy_adam_state(state),
        "steps": 0,
    }
    stale = 0
    step = 0
    loss_acc, loss_n = 0.0, 0
    stop_reason = ""
    while not stop_reason:
        order = _epoch_order(len(train_pairs), rng)
        for i in range(0, len(order), settings.batch_size):
            batch = [train_pairs[j] for j in order[i:i + settings.batch_size]]
            loss, grads = loss_and_grad(params, batch)
            adam_step(params, grads, state, settings.lr)
            step += 1
            loss_acc += loss
            loss_n += 1
            if step % settings.eval_every == 0:
                bleu = valid.bleu(params, config)
                log.append(TrainRecord(step, loss_acc / loss_n, bleu))
                loss_acc, loss_n = 0.0, 0
                if bleu > best["bleu"] + settings.min_delta:
                    stale = 0
                else:
                    stale += 1
                if bleu > best["bleu"]:
                    best = {
                        "bleu": bleu,
                        "params": copy_params(params),
                        "state": copy_adam_state(state),
                        "steps": step,
                    }
                if stale >= settings.patience:
                    stop_reason = "bleu_converged"
                    break
            if step >= settings.max_steps:
                stop_reason = "max_steps"
                break
    log.stop_reason = stop_reason
    return TrainResult(
        params=best["params"],
        opt_state=best["state"],
        log=log,
        valid_bleu=best["bleu"],
        steps=best["steps"],
    )


def _ewc_grad_update(grads, params, anchor, fisher, lam):
    for name in grads:
        grads[name] += 2.0 * lam * fisher[name] * (params[name] - anchor[name])


def fine_tune(
    params: Params,
    opt_state: dict,
    adaptation: Sequence[IdPair],
    valid: EvalSuite,
    stop: StopRule,
    config: ModelConfig,
    settings: TrainSettings,
    fisher: Params | None = None,
    anchor: Params | None = None,
    lam: float = 0.0,
    accuracy_fn: Callable[[Params], float] | None = None,
) -> TrainResult:
    """Continue optimization on an adaptation set without resetting the
    optimizer state or learning rate.

    Evaluates validation BLEU after every epoch. Under a BLEU-degradation
    stop, the last checkpoint at or above the threshold (a fraction of the
    entry model's validation BLEU) is returned once an evaluation crosses
    below it. With `fisher`/`anchor`/`lam` set, the quadratic anchor penalty
    gradient ``2*lam*F*(theta - anchor)`` is added to every update.
    """
    if not adaptation:
        raise InvalidArgument("adaptation set must be nonempty")
    use_penalty = lam > 0.0
    if use_penalty and (fisher is None or anchor is None):
        raise InvalidArgument("penalty requires fisher and anchor parameters")
    params = copy_params(params)
    state = copy_adam_state(opt_state)
    rng = np.random.RandomState(settings.seed)
    log = TrainLog()
    entry_bleu = valid.bleu(params, config)
    threshold = None
    if stop.bleu_degradation_pct is not None:
        threshold = entry_bleu * (1.0 - stop.bleu_degradation_pct / 100.0)
    kept = {
        "params": copy_params(params),
        "state": copy_adam_state(state),
        "bleu": entry_bleu,
        "steps": 0,
    }
    step = 0
    stop_reason = ""
    max_epochs = stop.epochs if stop.epochs is not None else stop.max_epochs
    for epoch in range(max_epochs):
        order = _epoch_order(len(adaptation), rng)
        epoch_loss, n_batches = 0.0, 0
        for i in range(0, len(order), settings.batch_size):
            batch = [adaptation[j] for j in order[i:i + settings.batch_size]]
            loss, grads = loss_and_grad(params, batch)
            if use_penalty:
                _ewc_grad_update(grads, params, anchor, fisher, lam)
            adam_step(params, grads, state, settings.lr)
            step += 1
            epoch_loss += loss
            n_batches += 1
        bleu = valid.bleu(params, config)
        acc = accuracy_fn(params) if accuracy_fn is not None else None
        log.append(TrainRecord(step, epoch_loss / n_batches, bleu, acc))
        if threshold is not None and bleu < threshold:
            stop_reason = "bleu_degraded"
            break
        kept = {
            "params": copy_params(params),
            "state": copy_adam_state(state),
            "bleu": bleu,
            "steps": step,
        }
        if stop.train_loss is not None and epoch_loss / n_batches < stop.train_loss:
            stop_reason = "train_loss"
            break
    if not stop_reason:
        stop_reason = "epochs" if stop.epochs is not None else "max_epochs"
    log.stop_reason = stop_reason
    return TrainResult(
        params=kept["params"],
        opt_state=kept["state"],
        log=log,
        valid_bleu=kept["bleu"],
        steps=kept["steps"],
    )


def estimate_fisher(
    params: Params,
    pairs: Sequence[IdPair],
    n_samples: int | None = None,
    seed: int = 0,
) -> Params:
    """Per-parameter mean of squared per-sentence loss gradients (empirical
    Fisher) at the given parameters."""
    if n_samples is not None and n_samples < 1:
        raise InvalidArgument("n_samples must be >= 1")
    sample = list(pairs)
    if n_samples is not None and n_samples < len(sample):
        rng = random.Random(seed)
        sample = [sample[i] for i in sorted(rng.sample(range(len(sample)), n_samples))]
    if not sample:
        raise InvalidArgument("need at least one sample pair")
    fisher = {k: np.zeros_like(v) for k, v in params.items()}
    for pair in sample:
        _, grads = loss_and_grad(params, [pair])
        for name, g in grads.items():
            fisher[name] += g * g
    for name in fisher:
        fisher[name] /= len(sample)
    return fisher


def ewc_penalty(params: Params, anchor: Params, fisher: Params, lam: float) -> float:
    """lam * sum_j F_j (theta_j - anchor_j)^2."""
    if lam < 0:
        raise InvalidArgument("lambda must be >= 0")
    keys = set(params)
    if keys != set(anchor) or keys != set(fisher):
        raise InvalidArgument("parameter/anchor/fisher tensors must align")
    total = 0.0
    for name in params:
        if params[name].shape != anchor[name].shape or \
                params[name].shape != fisher[name].shape:
            raise InvalidArgument(f"shape mismatch for tensor {name!r}")
        diff = params[name] - anchor[name]
        total += float((fisher[name] * diff * diff).sum())
    return lam * total


def weighted_displacement(params: Params, anchor: Params, fisher: Params) -> float:
    """sqrt(sum_j F_j (theta_j - anchor_j)^2), the penalty at lam=1."""
    return math.sqrt(ewc_penalty(params, anchor, fisher, 1.0))


@dataclass
class LambdaRun:
    lam: float
    result: TrainResult
    accuracy: float
    displacement: float


def ewc_lambda_grid(
    anchor: Params,
    opt_state: dict,
    fisher: Params,
    adaptation: Sequence[IdPair],
    valid: EvalSuite,
    lambdas: Sequence[float],
    stop: StopRule,
    config: ModelConfig,
    settings: TrainSettings,
    accuracy_fn: Callable[[Params], float],
) -> list[LambdaRun]:
    """Fine-tune once per penalty weight; returns per-lambda BLEU/accuracy for
    selection."""
    runs = []
    for lam in lambdas:
        result = fine_tune(
            anchor, opt_state, adaptation, valid, stop, config, settings,
            fisher=fisher, anchor=anchor, lam=lam,
        )
        runs.append(LambdaRun(
            lam=lam,
            result=result,
            accuracy=accuracy_fn(result.params),
            displacement=weighted_displacement(result.params, anchor, fisher),
        ))
    return runs


def select_lambda(runs: Sequence[LambdaRun], reference_accuracy: float,
                  tolerance: float = 2.0) -> LambdaRun:
    """Largest lambda whose challenge accuracy stays within `tolerance` points
    of the unregularized fine-tune; falls back to the most accurate run."""
    eligible = [r for r in runs if r.accuracy >= reference_accuracy - tolerance]
    if eligible:
        return max(eligible, key=lambda r: r.lam)
    return max(runs, key=lambda r: (r.accuracy, r.lam))
