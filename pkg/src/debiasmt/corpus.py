"""Synthetic gendered language pair: lexicon, training corpora, and challenge set.

The source language is a small fragment of English. The target language is a
word-by-word mirror with deterministic gender morphology:

* profession nouns inflect as ``stem+"o"`` (masculine) / ``stem+"a"`` (feminine)
* the determiner "the" becomes "le" (masc) / "la" (fem), agreeing with its noun
* subject pronouns "he"/"she" become "il"/"el"
* possessives "his"/"her" become "so"/"sa", agreeing with the possessor
* "man"/"woman" become "mano"/"womana"
* every other word maps to ``word+"u"`` ("." stays ".")

The closed morphology makes the grammatical gender of any entity in a
hypothesis exactly recoverable by lexicon lookup, so no alignment or
morphological analysis is needed downstream.
"""

from __future__ import annotations

import json
import math
import random
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import InvalidArgument, InvalidState
from .vocab import Vocab

MASC = "M"
FEM = "F"
GENDERS = (MASC, FEM)

# Curated stems; generate_lexicon() synthesizes extra stems past this list.
PROFESSION_STEMS = (
    "doctor", "nurse", "engineer", "teacher", "developer", "cleaner",
    "librarian", "mechanic", "accountant", "analyst", "assistant", "attendant",
    "auditor", "baker", "carpenter", "cashier", "clerk", "cook", "counselor",
    "designer", "dispatcher", "driver", "editor", "educator", "electrician",
    "examiner", "farmer", "firefighter", "florist", "gardener", "guard",
    "hairdresser", "housekeeper", "inspector", "instructor", "investigator",
    "janitor", "jeweler", "judge", "laborer", "lawyer", "machinist", "manager",
    "mover", "musician", "officer", "operator", "painter", "paralegal",
    "pathologist", "pharmacist", "photographer", "physician", "pilot",
    "planner", "plumber", "practitioner", "programmer", "psychologist",
    "receptionist", "researcher", "salesperson", "scientist", "secretary",
    "sheriff", "singer", "specialist", "supervisor", "surgeon", "tailor",
    "technician", "therapist", "translator", "tutor", "veterinarian", "waiter",
    "welder", "writer",
)

PRONOUN_SOURCES = ("he", "she")
PRONOUN_TARGETS = ("il", "el")
POSSESSIVE_SOURCES = ("his", "her")
POSSESSIVE_TARGETS = ("so", "sa")
DETERMINER_SOURCE = "the"
DETERMINER_TARGETS = ("le", "la")
NOUN_PAIR_SOURCES = ("man", "woman")
NOUN_PAIR_TARGETS = ("mano", "womana")
ADJECTIVE_WORDS = ("tall", "short", "old", "young", "quiet", "clever")
TRANSITIVE_VERBS = ("greeted", "met", "helped", "called", "saw")
OTHER_FILLER_WORDS = ("finished", "work", "told", "that", "was", "busy")
PERIOD = "."

# (simple, transitive, coreference) template mix for the training generator.
TEMPLATE_WEIGHTS = (0.50, 0.10, 0.40)
# Professions with a masculine stereotype are sampled this much more often,
# giving the corpus an overall male lean on top of the stereotype skew.
STEREOTYPE_M_SAMPLING_WEIGHT = 2.0
# Challenge-set professions are undersampled in the training corpus, so their
# gender statistics are learned from thin data (the usual fate of the rare
# entities a challenge set probes).
CHALLENGE_SAMPLING_WEIGHT = 0.2
# In training coreference sentences the pronoun's referent is latent: it is
# the primary entity with this probability, otherwise the secondary. Natural
# text does not mark the referent, so the pair (source sentence, entity
# genders) stays genuinely ambiguous and a converged model must fall back on
# gender priors, exactly like a full-scale system. The challenge set always
# uses the pronoun -> primary convention.
COREF_PRIMARY_RATE = 0.6


def _ungendered_form(word: str) -> str:
    return word if word == PERIOD else word + "u"


@dataclass(frozen=True)
class LexiconEntry:
    source: str
    masc: str
    fem: str
    stereotype: str | None  # MASC | FEM | None for ungendered entries
    in_challenge: bool = False

    @property
    def gendered(self) -> bool:
        return self.masc != self.fem

    def form(self, gender: str) -> str:
        return self.masc if gender == MASC else self.fem


@dataclass
class Lexicon:
    """Single source of truth for generation, swapping, transduction, and
    gender classification."""

    professions: list[LexiconEntry]
    pronouns: tuple[LexiconEntry, LexiconEntry]
    possessives: tuple[LexiconEntry, LexiconEntry]
    determiner: LexiconEntry
    noun_pair: tuple[LexiconEntry, LexiconEntry]
    adjectives: list[LexiconEntry]
    fillers: list[LexiconEntry]
    _by_source: dict[str, LexiconEntry] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._by_source = {e.source: e for e in self.entries()}

    def entries(self) -> Iterator[LexiconEntry]:
        yield from self.professions
        yield from self.pronouns
        yield from self.possessives
        yield self.determiner
        yield from self.noun_pair
        yield from self.adjectives
        yield from self.fillers

    def entry(self, source: str) -> LexiconEntry:
        return self._by_source[source]

    def __contains__(self, source: str) -> bool:
        return source in self._by_source

    def challenge_professions(self) -> list[LexiconEntry]:
        return [p for p in self.professions if p.in_challenge]

    def adaptation_professions(self) -> list[LexiconEntry]:
        return [p for p in self.professions if not p.in_challenge]

    def source_vocab(self) -> Vocab:
        return Vocab(e.source for e in self.entries())

    def target_vocab(self) -> Vocab:
        toks: list[str] = []
        for e in self.entries():
            toks.append(e.masc)
            if e.fem != e.masc:
                toks.append(e.fem)
        return Vocab(toks)

    def gendered_pairs(self) -> list[tuple[str, str]]:
        """Distinct (masc, fem) target-form pairs, used to build the
        gender-inflection table."""
        pairs: dict[tuple[str, str], None] = {}
        for e in self.entries():
            if e.gendered:
                pairs[(e.masc, e.fem)] = None
        return list(pairs)


@dataclass
class ParallelCorpus:
    pairs: list[tuple[list[str], list[str]]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[tuple[list[str], list[str]]]:
        return iter(self.pairs)

    def sources(self) -> list[list[str]]:
        return [src for src, _ in self.pairs]

    def targets(self) -> list[list[str]]:
        return [tgt for _, tgt in self.pairs]

    def slice(self, start: int, stop: int) -> "ParallelCorpus":
        return ParallelCorpus([(list(s), list(t)) for s, t in self.pairs[start:stop]])

    def concat(self, other: "ParallelCorpus") -> "ParallelCorpus":
        return ParallelCorpus(
            [(list(s), list(t)) for s, t in self.pairs]
            + [(list(s), list(t)) for s, t in other.pairs]
        )


@dataclass(frozen=True)
class ChallengeItem:
    source: tuple[str, ...]
    primary_index: int
    profession: str
    gold: str
    stereotype_class: str  # "pro" | "anti"
    reference: tuple[str, ...]


def _synth_stem(i: int) -> str:
    return f"trade{i}"


def generate_lexicon(n_professions: int, seed: int) -> Lexicon:
    """Build the closed lexicon with `n_professions` profession entries.

    Exactly ceil(n/2) professions get a masculine stereotype label; a seeded,
    stereotype-stratified half is flagged for challenge-set use so both
    stereotypes are always represented on each side of the split.
    """
    if n_professions < 4:
        raise InvalidArgument(
            "need at least 4 professions to fill the pro/anti x M/F cells"
        )
    rng = random.Random(seed)
    stems = list(PROFESSION_STEMS[:n_professions])
    stems += [_synth_stem(i) for i in range(len(stems), n_professions)]

    n_masc = math.ceil(n_professions / 2)
    order = list(range(n_professions))
    rng.shuffle(order)
    masc_idx = set(order[:n_masc])

    m_list = [i for i in range(n_professions) if i in masc_idx]
    f_list = [i for i in range(n_professions) if i not in masc_idx]
    rng.shuffle(m_list)
    rng.shuffle(f_list)
    challenge_idx = set(m_list[: math.ceil(len(m_list) / 2)])
    challenge_idx |= set(f_list[: math.ceil(len(f_list) / 2)])

    professions = [
        LexiconEntry(
            source=stem,
            masc=stem + "o",
            fem=stem + "a",
            stereotype=MASC if i in masc_idx else FEM,
            in_challenge=i in challenge_idx,
        )
        for i, stem in enumerate(stems)
    ]
    pronouns = tuple(
        LexiconEntry(src, PRONOUN_TARGETS[0], PRONOUN_TARGETS[1], g)
        for src, g in zip(PRONOUN_SOURCES, GENDERS)
    )
    possessives = tuple(
        LexiconEntry(src, POSSESSIVE_TARGETS[0], POSSESSIVE_TARGETS[1], g)
        for src, g in zip(POSSESSIVE_SOURCES, GENDERS)
    )
    determiner = LexiconEntry(
        DETERMINER_SOURCE, DETERMINER_TARGETS[0], DETERMINER_TARGETS[1], None
    )
    noun_pair = tuple(
        LexiconEntry(src, NOUN_PAIR_TARGETS[0], NOUN_PAIR_TARGETS[1], g)
        for src, g in zip(NOUN_PAIR_SOURCES, GENDERS)
    )
    adjectives = [
        LexiconEntry(w, _ungendered_form(w), _ungendered_form(w), None)
        for w in ADJECTIVE_WORDS
    ]
    fillers = [
        LexiconEntry(w, _ungendered_form(w), _ungendered_form(w), None)
        for w in OTHER_FILLER_WORDS + TRANSITIVE_VERBS + (PERIOD,)
    ]
    return Lexicon(
        professions=professions,
        pronouns=pronouns,
        possessives=possessives,
        determiner=determiner,
        noun_pair=noun_pair,
        adjectives=adjectives,
        fillers=fillers,
    )


def _profession_sampler(lexicon: Lexicon):
    """Cumulative-weight sampler over professions: male-stereotyped ones are
    common, challenge-set ones are rare."""
    weights = [
        (STEREOTYPE_M_SAMPLING_WEIGHT if p.stereotype == MASC else 1.0)
        * (CHALLENGE_SAMPLING_WEIGHT if p.in_challenge else 1.0)
        for p in lexicon.professions
    ]
    cum: list[float] = []
    total = 0.0
    for w in weights:
        total += w
        cum.append(total)

    def pick(rng: random.Random) -> LexiconEntry:
        return lexicon.professions[bisect_right(cum, rng.random() * total)]

    return pick


def _draw_gender(rng: random.Random, stereotype: str, bias_ratio: float) -> str:
    if rng.random() < bias_ratio:
        return stereotype
    return FEM if stereotype == MASC else MASC


def _det(gender: str) -> tuple[str, str]:
    return DETERMINER_SOURCE, DETERMINER_TARGETS[0 if gender == MASC else 1]


def _simple_sentence(
    prof: LexiconEntry, gender: str
) -> tuple[list[str], list[str]]:
    """the PROF finished his|her work"""
    det_s, det_t = _det(gender)
    poss_i = 0 if gender == MASC else 1
    src = [det_s, prof.source, "finished", POSSESSIVE_SOURCES[poss_i], "work"]
    tgt = [det_t, prof.form(gender), "finishedu", POSSESSIVE_TARGETS[poss_i], "worku"]
    return src, tgt


def _transitive_sentence(
    p1: LexiconEntry, g1: str, p2: LexiconEntry, g2: str, verb: str
) -> tuple[list[str], list[str]]:
    """the PROF <verb> the PROF2 ."""
    d1s, d1t = _det(g1)
    d2s, d2t = _det(g2)
    src = [d1s, p1.source, verb, d2s, p2.source, PERIOD]
    tgt = [d1t, p1.form(g1), _ungendered_form(verb), d2t, p2.form(g2), PERIOD]
    return src, tgt


def _coreference_sentence(
    primary: LexiconEntry, g1: str, secondary: LexiconEntry, g2: str,
    pronoun_gender: str,
) -> tuple[list[str], list[str]]:
    """the PRIMARY told the SECONDARY that he|she was busy

    The pronoun carries the gender of whichever entity it refers to.
    """
    d1s, d1t = _det(g1)
    d2s, d2t = _det(g2)
    pro_i = 0 if pronoun_gender == MASC else 1
    src = [d1s, primary.source, "told", d2s, secondary.source,
           "that", PRONOUN_SOURCES[pro_i], "was", "busy"]
    tgt = [d1t, primary.form(g1), "toldu", d2t, secondary.form(g2),
           "thatu", PRONOUN_TARGETS[pro_i], "wasu", "busyu"]
    return src, tgt


def generate_training_corpus(
    lexicon: Lexicon, size: int, bias_ratio: float, seed: int
) -> ParallelCorpus:
    """Seeded template corpus whose entity genders follow their stereotype
    with probability `bias_ratio`."""
    if size < 1:
        raise InvalidArgument("size must be >= 1")
    if not 0.5 <= bias_ratio <= 1.0:
        raise InvalidArgument("bias_ratio must lie in [0.5, 1]")
    rng = random.Random(seed)
    pick_prof = _profession_sampler(lexicon)
    w_simple, w_trans, _ = TEMPLATE_WEIGHTS
    pairs: list[tuple[list[str], list[str]]] = []
    for _ in range(size):
        u = rng.random()
        p1 = pick_prof(rng)
        g1 = _draw_gender(rng, p1.stereotype, bias_ratio)
        if u < w_simple:
            pairs.append(_simple_sentence(p1, g1))
            continue
        p2 = pick_prof(rng)
        while p2.source == p1.source:
            p2 = pick_prof(rng)
        g2 = _draw_gender(rng, p2.stereotype, bias_ratio)
        if u < w_simple + w_trans:
            verb = TRANSITIVE_VERBS[rng.randrange(len(TRANSITIVE_VERBS))]
            pairs.append(_transitive_sentence(p1, g1, p2, g2, verb))
        else:
            referent = g1 if rng.random() < COREF_PRIMARY_RATE else g2
            pairs.append(_coreference_sentence(p1, g1, p2, g2, referent))
    return ParallelCorpus(pairs)


def generate_splits(
    lexicon: Lexicon,
    train_size: int,
    valid_size: int,
    test_size: int,
    bias_ratio: float,
    seed: int,
) -> tuple[ParallelCorpus, ParallelCorpus, ParallelCorpus]:
    """Disjoint train/valid/test draws from one seeded generator stream."""
    total = generate_training_corpus(
        lexicon, train_size + valid_size + test_size, bias_ratio, seed
    )
    train = total.slice(0, train_size)
    valid = total.slice(train_size, train_size + valid_size)
    test = total.slice(train_size + valid_size, len(total))
    return train, valid, test


def generate_handcrafted(lexicon: Lexicon, no_overlap: bool = False) -> ParallelCorpus:
    """Tiny gender-balanced adaptation set: one masculine and one feminine
    simple-template sentence per profession.

    With `no_overlap`, challenge-set professions are dropped and the set is
    padded back to the same total with balanced adjective sentences of the
    form "the tall man|woman finished his|her work".
    """
    if not lexicon.professions:
        raise InvalidArgument("lexicon has no professions")
    profs = lexicon.adaptation_professions() if no_overlap else lexicon.professions
    if no_overlap and not profs:
        raise InvalidState("every profession is in the challenge set")
    pairs: list[tuple[list[str], list[str]]] = []
    for prof in profs:
        pairs.append(_simple_sentence(prof, MASC))
        pairs.append(_simple_sentence(prof, FEM))
    if no_overlap:
        n_pad_pairs = len(lexicon.professions) - len(profs)
        adjectives = lexicon.adjectives
        for j in range(n_pad_pairs):
            adj = adjectives[j % len(adjectives)]
            for gender, noun in zip(GENDERS, lexicon.noun_pair):
                det_s, det_t = _det(gender)
                poss_i = 0 if gender == MASC else 1
                src = [det_s, adj.source, noun.source, "finished",
                       POSSESSIVE_SOURCES[poss_i], "work"]
                tgt = [det_t, adj.masc, noun.form(gender), "finishedu",
                       POSSESSIVE_TARGETS[poss_i], "worku"]
                pairs.append((src, tgt))
    return ParallelCorpus(pairs)


def generate_challenge_set(
    lexicon: Lexicon, size: int, seed: int
) -> list[ChallengeItem]:
    """Coreference challenge items, exactly balanced over gold gender and
    pro/anti stereotype class (size/4 items per cell)."""
    if size % 4 != 0:
        raise InvalidArgument("challenge size must be divisible by 4")
    challenge = lexicon.challenge_professions()
    by_stereo = {
        MASC: [p for p in challenge if p.stereotype == MASC],
        FEM: [p for p in challenge if p.stereotype == FEM],
    }
    if not by_stereo[MASC] or not by_stereo[FEM]:
        raise InvalidState("challenge professions must cover both stereotypes")
    rng = random.Random(seed)
    items: list[ChallengeItem] = []
    for gold in GENDERS:
        for cls in ("pro", "anti"):
            stereo = gold if cls == "pro" else (FEM if gold == MASC else MASC)
            pool = by_stereo[stereo]
            for _ in range(size // 4):
                primary = pool[rng.randrange(len(pool))]
                secondary = challenge[rng.randrange(len(challenge))]
                while secondary.source == primary.source:
                    secondary = challenge[rng.randrange(len(challenge))]
                src, tgt = _coreference_sentence(
                    primary, gold, secondary, secondary.stereotype,
                    pronoun_gender=gold,
                )
                items.append(
                    ChallengeItem(
                        source=tuple(src),
                        primary_index=1,
                        profession=primary.source,
                        gold=gold,
                        stereotype_class=cls,
                        reference=tuple(tgt),
                    )
                )
    rng.shuffle(items)
    return items


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def write_lexicon(lexicon: Lexicon, path: str | Path) -> None:
    """TSV: source, masc, fem, stereotype (M|F|-), in_challenge (0|1)."""
    lines = []
    for e in lexicon.entries():
        stereo = e.stereotype if e.stereotype else "-"
        lines.append(
            f"{e.source}\t{e.masc}\t{e.fem}\t{stereo}\t{1 if e.in_challenge else 0}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_lexicon(path: str | Path) -> Lexicon:
    """Rebuild a Lexicon from its TSV form.

    Entry classes are recovered from the fixed function-word inventory;
    anything else with a gender label is a profession, anything unlabelled is
    an adjective or filler.
    """
    professions: list[LexiconEntry] = []
    adjectives: list[LexiconEntry] = []
    fillers: list[LexiconEntry] = []
    special: dict[str, LexiconEntry] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        source, masc, fem, stereo, chall = line.split("\t")
        entry = LexiconEntry(
            source=source,
            masc=masc,
            fem=fem,
            stereotype=None if stereo == "-" else stereo,
            in_challenge=chall == "1",
        )
        if source in PRONOUN_SOURCES + POSSESSIVE_SOURCES + NOUN_PAIR_SOURCES \
                or source == DETERMINER_SOURCE:
            special[source] = entry
        elif entry.stereotype is None:
            (adjectives if source in ADJECTIVE_WORDS else fillers).append(entry)
        else:
            professions.append(entry)
    return Lexicon(
        professions=professions,
        pronouns=tuple(special[s] for s in PRONOUN_SOURCES),
        possessives=tuple(special[s] for s in POSSESSIVE_SOURCES),
        determiner=special[DETERMINER_SOURCE],
        noun_pair=tuple(special[s] for s in NOUN_PAIR_SOURCES),
        adjectives=adjectives,
        fillers=fillers,
    )


def write_sentences(sentences: Iterable[Sequence[str]], path: str | Path) -> None:
    Path(path).write_text(
        "".join(" ".join(s) + "\n" for s in sentences), encoding="utf-8"
    )


def read_sentences(path: str | Path) -> list[list[str]]:
    return [line.split() for line in Path(path).read_text(encoding="utf-8").splitlines()]


def write_corpus(corpus: ParallelCorpus, base: str | Path) -> None:
    """Write `<base>.src` / `<base>.tgt`, one space-joined sentence per line."""
    base = str(base)
    write_sentences(corpus.sources(), base + ".src")
    write_sentences(corpus.targets(), base + ".tgt")


def read_corpus(base: str | Path) -> ParallelCorpus:
    base = str(base)
    sources = read_sentences(base + ".src")
    targets = read_sentences(base + ".tgt")
    if len(sources) != len(targets):
        raise InvalidState(f"{base}: .src and .tgt line counts differ")
    return ParallelCorpus(list(zip(sources, targets)))


def write_challenge(items: Sequence[ChallengeItem], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps({
                "source": list(item.source),
                "primary_index": item.primary_index,
                "profession": item.profession,
                "gold": item.gold,
                "stereotype_class": item.stereotype_class,
                "reference": list(item.reference),
            }, separators=(", ", ": ")) + "\n")


def read_challenge(path: str | Path) -> list[ChallengeItem]:
    items = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        items.append(ChallengeItem(
            source=tuple(obj["source"]),
            primary_index=obj["primary_index"],
            profession=obj["profession"],
            gold=obj["gold"],
            stereotype_class=obj["stereotype_class"],
            reference=tuple(obj["reference"]),
        ))
    return items
