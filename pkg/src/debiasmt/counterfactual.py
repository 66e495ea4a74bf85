"""Gender-swapped and forward-translated adaptation sets.

Four related sets are built from a parallel corpus and a first-pass model:

* original: the pairs whose source contains a gendered stopword
* ftrans_original: original sources with forward-translated targets
* ftrans_swapped: gender-swapped sources with forward-translated targets
* balanced: original followed by ftrans_swapped (twice the size)
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import Lexicon, NOUN_PAIR_SOURCES, POSSESSIVE_SOURCES, \
    PRONOUN_SOURCES, ParallelCorpus
from .errors import InvalidArgument
from .model import Translator


@dataclass(frozen=True)
class StopwordMap:
    """Symmetric, irreflexive source-token swap table."""

    mapping: dict[str, str]

    def __post_init__(self):
        for a, b in self.mapping.items():
            if a == b:
                raise InvalidArgument(f"stopword {a!r} maps to itself")
            if self.mapping.get(b) != a:
                raise InvalidArgument(f"stopword pair ({a!r}, {b!r}) is not symmetric")

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[str, str]]) -> "StopwordMap":
        mapping: dict[str, str] = {}
        for a, b in pairs:
            mapping[a] = b
            mapping[b] = a
        return cls(mapping)

    def __contains__(self, token: str) -> bool:
        return token in self.mapping

    def get(self, token: str) -> str:
        return self.mapping.get(token, token)

    def pairs(self) -> list[tuple[str, str]]:
        seen = set()
        out = []
        for a, b in self.mapping.items():
            if a not in seen and b not in seen:
                out.append((a, b))
                seen.update((a, b))
        return out


def default_stopword_map(lexicon: Lexicon) -> StopwordMap:
    """he/she, his/her, man/woman, restricted to tokens the lexicon emits."""
    pairs = []
    for a, b in (PRONOUN_SOURCES, POSSESSIVE_SOURCES, NOUN_PAIR_SOURCES):
        if a in lexicon and b in lexicon:
            pairs.append((a, b))
    return StopwordMap.from_pairs(pairs)


def swap_gender(sentence: Sequence[str], swaps: StopwordMap) -> list[str]:
    """Replace every mapped token by its counterpart; an involution."""
    return [swaps.get(tok) for tok in sentence]


def filter_gendered(corpus: ParallelCorpus, swaps: StopwordMap) -> ParallelCorpus:
    """Pairs whose source contains at least one mapped token, in order."""
    return ParallelCorpus([
        (list(src), list(tgt))
        for src, tgt in corpus
        if any(tok in swaps for tok in src)
    ])


def forward_translate(
    model: Translator, sources: Sequence[Sequence[str]]
) -> tuple[list[list[str]], int]:
    """Greedy (beam width 1) translations of `sources`, plus how many decodes
    hit the length limit and were truncated."""
    if not sources:
        return [], 0
    return model.translate_corpus(sources, beam_width=1)


@dataclass
class AdaptationSets:
    original: ParallelCorpus
    ftrans_original: ParallelCorpus
    ftrans_swapped: ParallelCorpus
    balanced: ParallelCorpus
    truncated: int = 0

    def named(self) -> list[tuple[str, ParallelCorpus]]:
        return [
            ("original", self.original),
            ("ftrans_original", self.ftrans_original),
            ("ftrans_swapped", self.ftrans_swapped),
            ("balanced", self.balanced),
        ]


def build_adaptation_sets(
    corpus: ParallelCorpus, swaps: StopwordMap, model: Translator
) -> AdaptationSets:
    original = filter_gendered(corpus, swaps)
    ft_orig, trunc_a = forward_translate(model, original.sources())
    swapped_sources = [swap_gender(s, swaps) for s in original.sources()]
    ft_swap, trunc_b = forward_translate(model, swapped_sources)
    ftrans_original = ParallelCorpus(
        [(list(s), list(t)) for s, t in zip(original.sources(), ft_orig)]
    )
    ftrans_swapped = ParallelCorpus(
        [(list(s), list(t)) for s, t in zip(swapped_sources, ft_swap)]
    )
    return AdaptationSets(
        original=original,
        ftrans_original=ftrans_original,
        ftrans_swapped=ftrans_swapped,
        balanced=original.concat(ftrans_swapped),
        truncated=trunc_a + trunc_b,
    )


def write_stopwords(swaps: StopwordMap, path: str | Path) -> None:
    """TSV with one pair per line; symmetry is implied."""
    Path(path).write_text(
        "".join(f"{a}\t{b}\n" for a, b in swaps.pairs()), encoding="utf-8"
    )


def read_stopwords(path: str | Path) -> StopwordMap:
    pairs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            a, b = line.split("\t")
            pairs.append((a, b))
    return StopwordMap.from_pairs(pairs)
