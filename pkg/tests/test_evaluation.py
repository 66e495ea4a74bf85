import math
import random

import pytest

from debiasmt.corpus import ChallengeItem, generate_lexicon
from debiasmt.errors import InvalidArgument
from debiasmt.evaluation import (UNKNOWN, challenge_metrics, classify_gender,
                                 corpus_bleu)


def _item(profession, gold, cls, source=("x",), reference=("y",)):
    return ChallengeItem(
        source=tuple(source), primary_index=0, profession=profession,
        gold=gold, stereotype_class=cls, reference=tuple(reference),
    )


@pytest.fixture(scope="module")
def lex():
    return generate_lexicon(8, seed=0)


def test_classify_gender_forms(lex):
    prof = lex.professions[0]
    item = _item(prof.source, "F", "anti")
    assert classify_gender(["la", prof.fem, "worku"], item, lex) == "F"
    assert classify_gender(["le", prof.masc, "worku"], item, lex) == "M"
    assert classify_gender(["le", "worku"], item, lex) == UNKNOWN
    assert classify_gender([prof.masc, prof.fem], item, lex) == UNKNOWN


def test_challenge_metrics_hand_confusion(lex):
    p = lex.professions[0].source
    items = [
        _item(p, "M", "pro"), _item(p, "F", "pro"),
        _item(p, "M", "anti"), _item(p, "F", "anti"),
    ]
    preds = ["M", "M", "F", "F"]
    # hand-computed: acc 50; acc(pro)=50, acc(anti)=50 -> dS 0;
    # F1(M)=0.5, F1(F)=0.5 -> dG 0; M:F = 2/2 = 1
    rep = challenge_metrics(preds, items)
    assert rep.accuracy == 50.0
    assert rep.delta_s == 0.0
    assert rep.delta_g == 0.0
    assert rep.m_f == 1.0 and not rep.m_f_infinite
    assert rep.n == 4 and rep.unknown == 0
    assert sum(sum(c.values()) for c in rep.cells.values()) == 4


def test_challenge_metrics_all_correct_identities(lex):
    p = lex.professions[0].source
    items = [
        _item(p, "M", "pro"), _item(p, "F", "pro"),
        _item(p, "M", "anti"), _item(p, "F", "anti"),
    ]
    rep = challenge_metrics([i.gold for i in items], items)
    assert rep.accuracy == 100.0
    assert rep.delta_g == 0.0
    assert rep.delta_s == 0.0
    assert rep.m_f == 1.0


def test_challenge_metrics_all_male_predictor(lex):
    p = lex.professions[0].source
    items = [
        _item(p, "M", "pro"), _item(p, "F", "pro"),
        _item(p, "M", "anti"), _item(p, "F", "anti"),
    ]
    rep = challenge_metrics(["M"] * 4, items)
    assert rep.accuracy == 50.0
    assert rep.delta_s == 0.0
    assert rep.m_f_infinite and rep.m_f == math.inf
    assert rep.to_dict()["m_f"] == "inf"


def test_delta_g_sign(lex):
    """Correct on all gold-M, predicting M on all gold-F: F1(M) < 1,
    F1(F) = 0, so the gap is positive."""
    p = lex.professions[0].source
    items = [_item(p, "M", "pro")] * 3 + [_item(p, "F", "anti")] * 3
    rep = challenge_metrics(["M"] * 6, items)
    assert rep.delta_g > 0.0


def test_metrics_unknowns_counted(lex):
    p = lex.professions[0].source
    items = [_item(p, "M", "pro"), _item(p, "F", "anti")]
    rep = challenge_metrics(["M", UNKNOWN], items)
    assert rep.unknown == 1
    assert rep.accuracy == 50.0


def test_metrics_permutation_invariance(lex):
    rng = random.Random(3)
    p = lex.professions[0].source
    items = []
    preds = []
    for _ in range(60):
        gold = rng.choice("MF")
        cls = rng.choice(["pro", "anti"])
        items.append(_item(p, gold, cls))
        preds.append(rng.choice(["M", "F", UNKNOWN]))
    base = challenge_metrics(preds, items)
    order = list(range(60))
    rng.shuffle(order)
    shuffled = challenge_metrics([preds[i] for i in order], [items[i] for i in order])
    assert shuffled.accuracy == base.accuracy
    assert shuffled.delta_g == base.delta_g
    assert shuffled.delta_s == base.delta_s
    assert shuffled.m_f == base.m_f


def test_metrics_length_mismatch(lex):
    with pytest.raises(InvalidArgument):
        challenge_metrics(["M"], [])


def test_bleu_identity():
    hyps = [["le", "doctoro", "finishu"], ["la", "nursea", "." ]]
    assert corpus_bleu(hyps, hyps) == 100.0


def test_bleu_clipped_unigrams_zero_higher_orders():
    # hand count: p1 = 2/7 clipped, p2 = 0 -> BLEU 0
    hyp = ["the"] * 7
    ref = ["the", "cat", "is", "on", "the", "mat"]
    assert corpus_bleu([hyp], [ref]) == 0.0


def test_bleu_brevity_penalty_hand_case():
    # p1..p4 all 1, BP = e^(1 - 6/5) -> 100 * e^-0.2 = 81.87
    hyp = ["le", "doctoro", "finishu", "le", "worku"]
    ref = ["le", "doctoro", "finishu", "le", "worku", "."]
    assert abs(corpus_bleu([hyp], [ref]) - 81.87) < 0.01


def test_bleu_range_and_bp_monotonicity():
    rng = random.Random(0)
    vocab = ["a", "b", "c", "d"]
    hyps = [[rng.choice(vocab) for _ in range(rng.randint(5, 9))] for _ in range(20)]
    refs = [[rng.choice(vocab) for _ in range(rng.randint(5, 9))] for _ in range(20)]
    score = corpus_bleu(hyps, refs)
    assert 0.0 <= score <= 100.0
    # dropping the last token of every hypothesis never increases BP
    def bp(hs):
        c = sum(len(h) for h in hs)
        r = sum(len(r_) for r_ in refs)
        return min(1.0, math.exp(1 - r / c))
    shorter = [h[:-1] for h in hyps]
    assert bp(shorter) <= bp(hyps)


def test_bleu_empty_hypothesis_line():
    hyps = [[], ["le", "doctoro"]]
    refs = [["le", "worku"], ["le", "doctoro"]]
    score = corpus_bleu(hyps, refs)
    assert 0.0 <= score <= 100.0
