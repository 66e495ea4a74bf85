"""Token/id vocabularies with the reserved control symbols at ids 0-3."""

from __future__ import annotations

from typing import Iterable, Sequence

BOS_ID = 0
EOS_ID = 1
UNK_ID = 2
PAD_ID = 3
BOS, EOS, UNK, PAD = "<bos>", "<eos>", "<unk>", "<pad>"
SPECIALS = (BOS, EOS, UNK, PAD)


class Vocab:
    """Immutable token <-> id mapping. Ids 0-3 are always the control symbols."""

    def __init__(self, tokens: Iterable[str]):
        seen = dict.fromkeys(SPECIALS)
        for tok in tokens:
            if tok not in seen:
                seen[tok] = None
        self.tokens: tuple[str, ...] = tuple(seen)
        self.index: dict[str, int] = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id(self, token: str) -> int:
        """Id of `token`, or UNK_ID for out-of-vocabulary tokens."""
        return self.index.get(token, UNK_ID)

    def ids(self, tokens: Sequence[str]) -> list[int]:
        return [self.index.get(t, UNK_ID) for t in tokens]

    def word(self, idx: int) -> str:
        return self.tokens[idx]

    def words(self, ids: Sequence[int], drop_specials: bool = True) -> list[str]:
        out = []
        for i in ids:
            if drop_specials and i < len(SPECIALS):
                continue
            out.append(self.tokens[i])
        return out
