"""Desk-scale toolkit for inducing, measuring, and reducing gender bias in a
synthetic neural MT setting: biased data generation, counterfactual and
handcrafted adaptation, regularized fine-tuning, gender-inflected lattice
rescoring, and challenge-set evaluation."""

from .corpus import (ChallengeItem, Lexicon, LexiconEntry, ParallelCorpus,
                     generate_challenge_set, generate_handcrafted,
                     generate_lexicon, generate_splits,
                     generate_training_corpus)
from .counterfactual import (AdaptationSets, StopwordMap,
                             build_adaptation_sets, default_stopword_map,
                             filter_gendered, forward_translate, swap_gender)
from .evaluation import (MetricsReport, challenge_metrics, classify_gender,
                         corpus_bleu)
from .lattice import (Fst, Lattice, build_flower_transducer, compose_project,
                      constrained_decode, inflection_table_from_lexicon,
                      linear_acceptor, rescore_hypotheses)
from .model import (Hypothesis, ModelConfig, Translator, adam_init, adam_step,
                    beam_search, init_params, load_params, loss_and_grad,
                    save_params, score_sequence)
from .pipeline import PipelineConfig, Workspace, run_pipeline
from .training import (EvalSuite, StopRule, TrainLog, TrainSettings,
                       estimate_fisher, ewc_lambda_grid, ewc_penalty,
                       fine_tune, select_lambda, train_baseline)

__version__ = "0.1.0"

__all__ = [
    "AdaptationSets", "ChallengeItem", "EvalSuite", "Fst", "Hypothesis",
    "Lattice", "Lexicon", "LexiconEntry", "MetricsReport", "ModelConfig",
    "ParallelCorpus", "PipelineConfig", "StopRule", "StopwordMap", "TrainLog",
    "TrainSettings", "Translator", "Workspace", "adam_init", "adam_step",
    "beam_search", "build_adaptation_sets", "build_flower_transducer",
    "challenge_metrics", "classify_gender", "compose_project",
    "constrained_decode", "corpus_bleu", "default_stopword_map",
    "estimate_fisher", "ewc_lambda_grid", "ewc_penalty", "filter_gendered",
    "fine_tune", "forward_translate", "generate_challenge_set",
    "generate_handcrafted", "generate_lexicon", "generate_splits",
    "generate_training_corpus", "inflection_table_from_lexicon", "init_params",
    "linear_acceptor", "load_params", "loss_and_grad", "rescore_hypotheses",
    "run_pipeline", "save_params", "score_sequence", "select_lambda",
    "swap_gender", "train_baseline",
]
