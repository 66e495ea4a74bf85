"""Finite-state machinery for gender-inflected rescoring.

A flower transducer maps every target-vocabulary token to itself and to its
alternately-gendered forms. Composing a hypothesis's linear acceptor with the
flower and projecting onto output labels yields a sausage lattice of all
gender-inflected variants of the hypothesis, which a second model can then
rescore exactly or with a beam.

Arcs are unweighted; all scoring comes from the rescoring model.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Lexicon
from .errors import InvalidArgument, InvalidState, PathBudgetExceeded
from .model import Hypothesis, Params, _decode_step, _encode, _init_decoder_state, \
    log_softmax, score_sequences
from .vocab import BOS_ID, EOS_ID, UNK_ID, Vocab

EXACT_PATH_BUDGET = 10000


@dataclass(frozen=True)
class Arc:
    src: int
    dst: int
    ilabel: int
    olabel: int


@dataclass
class Fst:
    """Epsilon-free finite-state transducer over target-vocabulary ids."""

    n_states: int
    start: int
    finals: frozenset[int]
    arcs: tuple[Arc, ...]
    _adj: dict[int, list[Arc]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.n_states < 1:
            raise InvalidArgument("an FST needs at least one state")
        if not 0 <= self.start < self.n_states:
            raise InvalidArgument("start state out of range")
        if not self.finals:
            raise InvalidArgument("a nonempty machine needs final states")
        for a in self.arcs:
            if not (0 <= a.src < self.n_states and 0 <= a.dst < self.n_states):
                raise InvalidArgument("arc endpoint out of range")
        adj: dict[int, list[Arc]] = defaultdict(list)
        for a in self.arcs:
            adj[a.src].append(a)
        self._adj = dict(adj)

    def arcs_from(self, state: int) -> list[Arc]:
        return self._adj.get(state, [])

    def is_acceptor(self) -> bool:
        return all(a.ilabel == a.olabel for a in self.arcs)

    def topological_order(self) -> list[int] | None:
        """State order with all arcs forward, or None if the FST is cyclic."""
        indeg = [0] * self.n_states
        for a in self.arcs:
            indeg[a.dst] += 1
        queue = deque(s for s in range(self.n_states) if indeg[s] == 0)
        order = []
        while queue:
            s = queue.popleft()
            order.append(s)
            for a in self.arcs_from(s):
                indeg[a.dst] -= 1
                if indeg[a.dst] == 0:
                    queue.append(a.dst)
        return order if len(order) == self.n_states else None


class Lattice(Fst):
    """Acyclic acceptor over target-vocabulary ids."""

    def __post_init__(self):
        super().__post_init__()
        if not self.is_acceptor():
            raise InvalidArgument("a lattice must have matching arc labels")
        if self.topological_order() is None:
            raise InvalidArgument("a lattice must be acyclic")

    def count_paths(self) -> int:
        """Number of nonempty start-to-final paths."""
        counts = [0] * self.n_states
        counts[self.start] = 1
        for s in self.topological_order():
            c = counts[s]
            if c:
                for a in self.arcs_from(s):
                    counts[a.dst] += c
        total = sum(counts[f] for f in self.finals)
        if self.start in self.finals:
            total -= 1  # the empty path does not spell a sequence
        return total

    def paths(self, budget: int | None = None) -> list[tuple[int, ...]]:
        """All start-to-final label sequences, depth-first in arc order."""
        if budget is not None:
            n = self.count_paths()
            if n > budget:
                raise PathBudgetExceeded(
                    f"lattice has {n} paths (> {budget}); use beam mode",
                    n_paths=n,
                )
        out: list[tuple[int, ...]] = []
        stack: list[tuple[int, tuple[int, ...]]] = [(self.start, ())]
        while stack:
            state, prefix = stack.pop()
            if state in self.finals and prefix:
                out.append(prefix)
            for a in reversed(self.arcs_from(state)):
                stack.append((a.dst, prefix + (a.olabel,)))
        return out


def inflection_table_from_lexicon(lexicon: Lexicon, vocab: Vocab) -> dict[int, tuple[int, ...]]:
    """Map each gendered target form to its alternately-gendered counterparts."""
    table: dict[int, tuple[int, ...]] = {}
    for masc, fem in lexicon.gendered_pairs():
        mi, fi = vocab.id(masc), vocab.id(fem)
        if mi == UNK_ID or fi == UNK_ID:
            raise InvalidArgument(f"pair ({masc}, {fem}) not covered by the vocabulary")
        table[mi] = (fi,)
        table[fi] = (mi,)
    return table


def build_flower_transducer(
    table: Mapping[int, Iterable[int]], vocab_size: int
) -> Fst:
    """Single-state transducer with an identity arc for every vocabulary id
    plus one arc per alternate-gender mapping."""
    arcs = []
    for w in range(vocab_size):
        arcs.append(Arc(0, 0, w, w))
        alts = table.get(w)
        if alts is None:
            continue
        for alt in alts:
            if not 0 <= alt < vocab_size:
                raise InvalidArgument(f"table maps {w} outside the vocabulary")
            arcs.append(Arc(0, 0, w, alt))
    for w in table:
        if not 0 <= w < vocab_size:
            raise InvalidArgument(f"table key {w} outside the vocabulary")
    return Fst(n_states=1, start=0, finals=frozenset({0}), arcs=tuple(arcs))


def linear_acceptor(tokens: Sequence[int]) -> Lattice:
    """Chain lattice spelling exactly the given token sequence."""
    if not tokens:
        raise InvalidArgument("cannot build an acceptor for an empty sequence")
    arcs = tuple(
        Arc(i, i + 1, tok, tok) for i, tok in enumerate(tokens)
    )
    return Lattice(
        n_states=len(tokens) + 1,
        start=0,
        finals=frozenset({len(tokens)}),
        arcs=arcs,
    )


def compose_project(y: Lattice, t: Fst) -> Lattice:
    """Output projection of the composition of `y` with transducer `t`.

    General epsilon-free product construction: states are reachable
    (y-state, t-state) pairs; an arc fires when y's output label matches t's
    input label. Dead-end states are trimmed so path enumeration is exact.
    """
    start_pair = (y.start, t.start)
    index = {start_pair: 0}
    pairs = [start_pair]
    arcs_raw: list[tuple[int, int, int]] = []
    queue = deque([start_pair])
    while queue:
        pair = queue.popleft()
        sy, st = pair
        src_id = index[pair]
        for ay in y.arcs_from(sy):
            for at in t.arcs_from(st):
                if ay.olabel != at.ilabel:
                    continue
                nxt = (ay.dst, at.dst)
                if nxt not in index:
                    index[nxt] = len(pairs)
                    pairs.append(nxt)
                    queue.append(nxt)
                arcs_raw.append((src_id, index[nxt], at.olabel))
    finals = {
        index[p] for p in pairs if p[0] in y.finals and p[1] in t.finals
    }
    if not finals:
        raise InvalidState("composition has no accepting path")
    # trim states that cannot reach a final state
    rev: dict[int, list[int]] = defaultdict(list)
    for src, dst, _ in arcs_raw:
        rev[dst].append(src)
    alive = set(finals)
    queue = deque(finals)
    while queue:
        s = queue.popleft()
        for prev in rev.get(s, ()):
            if prev not in alive:
                alive.add(prev)
                queue.append(prev)
    keep = [i for i in range(len(pairs)) if i in alive]
    remap = {old: new for new, old in enumerate(keep)}
    arcs = tuple(
        Arc(remap[src], remap[dst], lab, lab)
        for src, dst, lab in arcs_raw
        if src in alive and dst in alive
    )
    return Lattice(
        n_states=len(keep),
        start=remap[0],
        finals=frozenset(remap[f] for f in finals),
        arcs=arcs,
    )


def max_fanout(lat: Lattice) -> int:
    return max((len(lat.arcs_from(s)) for s in range(lat.n_states)), default=0)


def constrained_decode(
    params: Params,
    src: Sequence[int],
    lat: Lattice,
    mode: str = "exact",
    beam_width: int = 4,
    budget: int = EXACT_PATH_BUDGET,
) -> Hypothesis:
    """Highest-scoring lattice path under the model.

    Exact mode scores every path (raising PathBudgetExceeded past `budget`);
    beam mode expands lattice states synchronously, keeping the `beam_width`
    best prefixes per lattice state in each frontier. Ties break toward the
    lexicographically smaller token sequence. The returned tokens are an
    EOS-terminated lattice path.
    """
    if mode == "exact":
        paths = lat.paths(budget=budget)
        targets = [list(p) + [EOS_ID] for p in paths]
        scores = score_sequences(params, src, targets)
        best = min(range(len(paths)), key=lambda i: (-scores[i], targets[i]))
        return Hypothesis(
            tokens=tuple(targets[best]), log_prob=float(scores[best]),
        )
    if mode != "beam":
        raise InvalidArgument(f"unknown mode {mode!r}")
    return _beam_over_lattice(params, src, lat, beam_width)


def _beam_over_lattice(
    params: Params, src: Sequence[int], lat: Lattice, beam_width: int
) -> Hypothesis:
    if beam_width < 1:
        raise InvalidArgument("beam_width must be >= 1")
    H1, _ = _encode(params, np.array([list(src)], dtype=np.int64))
    dh = H1.shape[2]
    h0 = _init_decoder_state(params, H1[:, -1])[0]
    c0 = np.zeros(dh)
    # frontier: lattice state -> list of (tokens, logp, h, c)
    frontier: dict[int, list[tuple[tuple[int, ...], float, np.ndarray, np.ndarray]]]
    frontier = {lat.start: [((), 0.0, h0, c0)]}
    finished: list[tuple[float, tuple[int, ...]]] = []
    max_steps = lat.n_states  # longest acyclic path has < n_states arcs
    for _ in range(max_steps + 1):
        entries = [
            (state, tokens, logp, h, c)
            for state, items in frontier.items()
            for tokens, logp, h, c in items
        ]
        if not entries:
            break
        B = len(entries)
        prev = np.array(
            [e[1][-1] if e[1] else BOS_ID for e in entries], dtype=np.int64
        )
        y_emb = params["tgt_emb"][prev]
        h = np.stack([e[3] for e in entries])
        c = np.stack([e[4] for e in entries])
        Hb = np.broadcast_to(H1, (B,) + H1.shape[1:])
        logits, h_new, c_new, _ = _decode_step(params, y_emb, c, h, Hb)
        logp = log_softmax(logits)
        nxt: dict[int, list[tuple[tuple[int, ...], float, np.ndarray, np.ndarray]]]
        nxt = defaultdict(list)
        for row, (state, tokens, lp, _, _) in enumerate(entries):
            if state in lat.finals and tokens:
                finished.append((lp + float(logp[row, EOS_ID]), tokens + (EOS_ID,)))
            for a in lat.arcs_from(state):
                nxt[a.dst].append((
                    tokens + (a.olabel,),
                    lp + float(logp[row, a.olabel]),
                    h_new[row],
                    c_new[row],
                ))
        frontier = {}
        for state, items in nxt.items():
            items.sort(key=lambda it: (-it[1], it[0]))
            frontier[state] = items[:beam_width]
    if not finished:
        raise InvalidState("lattice has no accepting path")
    score, tokens = min(finished, key=lambda st: (-st[0], st[1]))
    return Hypothesis(tokens=tokens, log_prob=score)


def rescore_hypotheses(
    params: Params,
    sources: Sequence[Sequence[int]],
    hypotheses: Sequence[Sequence[int]],
    flower: Fst,
    mode: str = "exact",
    beam_width: int | None = None,
    budget: int = EXACT_PATH_BUDGET,
) -> list[Hypothesis]:
    """Rescore each hypothesis within its gender-inflected lattice.

    Hypotheses may come from any system; only their token ids are used. Exact
    mode falls back to a beam when a lattice exceeds the path budget.
    """
    if len(sources) != len(hypotheses):
        raise InvalidArgument("sources and hypotheses must align")
    out: list[Hypothesis] = []
    for src, hyp in zip(sources, hypotheses):
        surface = [t for t in hyp if t != EOS_ID]
        if not surface:
            scores = score_sequences(params, src, [[EOS_ID]])
            out.append(Hypothesis(tokens=(EOS_ID,), log_prob=float(scores[0])))
            continue
        lat = compose_project(linear_acceptor(surface), flower)
        width = beam_width if beam_width is not None else max(4, max_fanout(lat))
        if mode == "beam":
            out.append(_beam_over_lattice(params, src, lat, width))
            continue
        try:
            out.append(constrained_decode(params, src, lat, "exact", budget=budget))
        except PathBudgetExceeded:
            out.append(_beam_over_lattice(params, src, lat, width))
    return out


# ---------------------------------------------------------------------------
# Textual FST format: arc lines "src<TAB>dst<TAB>in<TAB>out" with token
# strings, final-state lines with a bare state id. The source state of the
# first arc line is the start state.
# ---------------------------------------------------------------------------

def write_fst_text(fst: Fst, path: str | Path, vocab: Vocab) -> None:
    lines = []
    ordered = sorted(fst.arcs, key=lambda a: (a.src != fst.start, a.src, a.dst,
                                              a.ilabel, a.olabel))
    for a in ordered:
        lines.append(
            f"{a.src}\t{a.dst}\t{vocab.word(a.ilabel)}\t{vocab.word(a.olabel)}"
        )
    for f in sorted(fst.finals):
        lines.append(str(f))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_fst_text(path: str | Path, vocab: Vocab) -> tuple[Fst, int]:
    """Read the textual format; unknown tokens map to the UNK id. Returns the
    machine and the number of unknown-token substitutions."""
    arcs = []
    finals = set()
    start = None
    unknown = 0
    max_state = 0
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) == 1:
            finals.add(int(parts[0]))
            max_state = max(max_state, int(parts[0]))
            continue
        src, dst, itok, otok = parts
        if start is None:
            start = int(src)
        for tok in (itok, otok):
            if tok not in vocab:
                unknown += 1
        arcs.append(Arc(int(src), int(dst), vocab.id(itok), vocab.id(otok)))
        max_state = max(max_state, int(src), int(dst))
    if start is None:
        start = 0
    fst = Fst(
        n_states=max_state + 1,
        start=start,
        finals=frozenset(finals),
        arcs=tuple(arcs),
    )
    return fst, unknown
