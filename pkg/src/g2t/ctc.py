"""CTC loss (log-space forward-backward) and decoding.

Class order is a=0 .. z=25 with the blank at index 26. Decoding offers a
greedy argmax baseline and a prefix beam search that merges alignment
paths by collapsed prefix; an optional lexicon trie restricts the search
to in-vocabulary words.
"""

from __future__ import annotations

import math
import string
import warnings
from dataclasses import dataclass

import numpy as np

BLANK = 26
N_CLASSES = 27

# probabilities are floored before log so that T up to 256 stays finite
LOG_FLOOR = 1e-300
NEG_INF = float("-inf")


@dataclass(frozen=True)
class ProbLattice:
    """Row-stochastic T x 27 matrix of per-timestep class probabilities."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64).copy()
        if p.ndim != 2 or p.shape[1] != N_CLASSES:
            raise ValueError(f"lattice must be (T, {N_CLASSES}), got {p.shape}")
        if p.shape[0] < 1:
            raise ValueError("lattice needs at least one timestep")
        if not np.isfinite(p).all() or (p < 0).any() or (p > 1).any():
            raise ValueError("lattice entries must lie in [0, 1]")
        if np.abs(p.sum(axis=1) - 1.0).max() > 1e-6:
            raise ValueError("lattice rows must sum to 1 within 1e-6")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    def __len__(self) -> int:
        return len(self.probs)


@dataclass(frozen=True)
class LabelSequence:
    """Target character classes in [0, 25], no blanks."""

    chars: tuple[int, ...]

    def __post_init__(self):
        chars = tuple(int(c) for c in self.chars)
        if any(not 0 <= c < BLANK for c in chars):
            raise ValueError("label classes must lie in [0, 25]")
        object.__setattr__(self, "chars", chars)

    @classmethod
    def from_word(cls, word: str) -> LabelSequence:
        if not word or any(c not in string.ascii_lowercase for c in word):
            raise ValueError(f"word must be non-empty lowercase a-z, got {word!r}")
        return cls(tuple(ord(c) - ord("a") for c in word))

    def to_word(self) -> str:
        return "".join(chr(ord("a") + c) for c in self.chars)

    def __len__(self) -> int:
        return len(self.chars)


class _TrieNode:
    __slots__ = ("children", "word")

    def __init__(self):
        self.children: dict[int, _TrieNode] = {}
        self.word: str | None = None


class LexiconTrie:
    """Prefix trie over a lexicon; children are keyed by class index."""

    def __init__(self, words):
        self.root = _TrieNode()
        seen = set()
        for word in words:
            seq = LabelSequence.from_word(word)
            if word in seen:
                continue
            seen.add(word)
            node = self.root
            for c in seq.chars:
                node = node.children.setdefault(c, _TrieNode())
            node.word = word
        self.words = tuple(sorted(seen))
        if not self.words:
            raise ValueError("lexicon must contain at least one word")

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        node = self.lookup(tuple(ord(c) - ord("a") for c in word))
        return node is not None and node.word is not None

    def lookup(self, prefix) -> _TrieNode | None:
        node = self.root
        for c in prefix:
            node = node.children.get(c)
            if node is None:
                return None
        return node


@dataclass(frozen=True)
class BeamConfig:
    beam_width: int = 16
    k: int = 4
    lexicon: LexiconTrie | None = None

    def __post_init__(self):
        if not self.beam_width >= self.k >= 1:
            raise ValueError("need beam_width >= k >= 1")


def _log_probs(lattice: ProbLattice) -> np.ndarray:
    return np.log(np.maximum(lattice.probs, LOG_FLOOR))


def _extended_target(target: LabelSequence) -> np.ndarray:
    """Blank-interleaved label sequence: phi z1 phi z2 ... zL phi."""
    ext = np.full(2 * len(target) + 1, BLANK, dtype=np.int64)
    ext[1::2] = target.chars
    return ext


def min_alignment_length(target: LabelSequence) -> int:
    """Shortest T that can emit the target (repeats need a separating blank)."""
    chars = target.chars
    repeats = sum(1 for a, b in zip(chars, chars[1:]) if a == b)
    return len(chars) + repeats


def _check_feasible(lattice: ProbLattice, target: LabelSequence):
    if len(target) == 0:
        raise ValueError("CTC target must be non-empty")
    need = min_alignment_length(target)
    if need > len(lattice):
        raise ValueError(
            f"target {target.to_word()!r} needs at least {need} timesteps, lattice has {len(lattice)}"
        )


def _forward_log_alphas(logp: np.ndarray, ext: np.ndarray) -> np.ndarray:
    """(T, S) log forward variables; alpha[t, s] includes the emission at t."""
    t_len, s_len = len(logp), len(ext)
    skip_ok = np.zeros(s_len, dtype=bool)
    skip_ok[2:] = (ext[2:] != BLANK) & (ext[2:] != ext[:-2])

    alphas = np.full((t_len, s_len), NEG_INF)
    alphas[0, 0] = logp[0, ext[0]]
    if s_len > 1:
        alphas[0, 1] = logp[0, ext[1]]
    for t in range(1, t_len):
        prev = alphas[t - 1]
        stay = prev
        step = np.concatenate([[NEG_INF], prev[:-1]])
        skip = np.concatenate([[NEG_INF, NEG_INF], prev[:-2]])
        skip = np.where(skip_ok, skip, NEG_INF)
        alphas[t] = np.logaddexp(np.logaddexp(stay, step), skip) + logp[t, ext]
    return alphas


def ctc_loss(lattice: ProbLattice, target: LabelSequence) -> float:
    """Negative log-likelihood of the target summed over all alignments.

    Raises ValueError when the target cannot fit in T timesteps; a zero
    total path probability yields +inf with a warning.
    """
    _check_feasible(lattice, target)
    ext = _extended_target(target)
    alphas = _forward_log_alphas(_log_probs(lattice), ext)
    log_p = np.logaddexp(alphas[-1, -1], alphas[-1, -2])
    if not np.isfinite(log_p):
        warnings.warn("CTC target has zero total path probability", RuntimeWarning)
        return math.inf
    return float(-log_p)


def ctc_loss_grad(lattice: ProbLattice, target: LabelSequence) -> tuple[float, np.ndarray]:
    """Loss plus its exact gradient with respect to the lattice entries."""
    _check_feasible(lattice, target)
    ext = _extended_target(target)
    logp = _log_probs(lattice)
    t_len, s_len = len(logp), len(ext)

    alphas = _forward_log_alphas(logp, ext)
    log_total = np.logaddexp(alphas[-1, -1], alphas[-1, -2])
    if not np.isfinite(log_total):
        warnings.warn("CTC target has zero total path probability", RuntimeWarning)
        return math.inf, np.zeros_like(lattice.probs)

    # betas[t, s]: completion probability from state s, excluding emission at t
    skip_ok = np.zeros(s_len, dtype=bool)
    skip_ok[:-2] = (ext[:-2] != BLANK) & (ext[:-2] != ext[2:])
    betas = np.full((t_len, s_len), NEG_INF)
    betas[-1, -1] = 0.0
    betas[-1, -2] = 0.0
    for t in range(t_len - 2, -1, -1):
        nxt = betas[t + 1] + logp[t + 1, ext]
        stay = nxt
        step = np.concatenate([nxt[1:], [NEG_INF]])
        skip = np.concatenate([nxt[2:], [NEG_INF, NEG_INF]])
        skip = np.where(skip_ok, skip, NEG_INF)
        betas[t] = np.logaddexp(np.logaddexp(stay, step), skip)

    # gamma[t, c] = P(state with label c at t | target) summed over states
    occupancy = np.exp(alphas + betas - log_total)  # (T, S)
    gamma = np.zeros((t_len, N_CLASSES))
    np.add.at(gamma.T, ext, occupancy.T)

    # below the floor the loss is locally flat in the entry, so the gradient is 0
    grad = np.zeros_like(gamma)
    live = lattice.probs >= LOG_FLOOR
    grad[live] = -gamma[live] / lattice.probs[live]
    return float(-log_total), grad


def collapse(path) -> str:
    """Standard CTC collapse: merge adjacent duplicates, then drop blanks."""
    out = []
    prev = None
    for idx in path:
        idx = int(idx)
        if not 0 <= idx < N_CLASSES:
            raise ValueError(f"path class {idx} out of range")
        if idx != prev and idx != BLANK:
            out.append(chr(ord("a") + idx))
        prev = idx
    return "".join(out)


def greedy_decode(lattice: ProbLattice) -> str:
    """Collapse the per-row argmax path (ties go to the lower class index)."""
    return collapse(np.argmax(lattice.probs, axis=1))


def _logadd(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    d = b - a
    if d < -37.0:  # below double-precision resolution
        return a
    return a + math.log1p(math.exp(d))


def beam_decode_topk(lattice: ProbLattice, cfg: BeamConfig | None = None) -> list[tuple[str, float]]:
    """Prefix beam search over the lattice, Top-k distinct words.

    Beam entries hold (blank-ending, non-blank-ending) log probabilities per
    collapsed prefix; probabilities of paths reaching the same prefix are
    summed, so a candidate's score is its true alignment-marginal log
    probability (exact when the beam retains every prefix). With a lexicon,
    prefixes outside the trie are dropped and only complete words are
    returned. Ranking is by score, then alphabetical.
    """
    cfg = cfg or BeamConfig()
    rows = np.log(np.maximum(lattice.probs, LOG_FLOOR)).tolist()
    trie = cfg.lexicon
    root = trie.root if trie is not None else None
    all_classes = list(range(BLANK))

    # prefix -> [log p(blank-ending), log p(non-blank-ending), trie node]
    beams: dict[tuple[int, ...], list] = {(): [0.0, NEG_INF, root]}
    for row in rows:
        blank_lp = row[BLANK]
        cand: dict[tuple[int, ...], list] = {}
        for prefix, (pb, pnb, node) in beams.items():
            total = _logadd(pb, pnb)
            entry = cand.get(prefix)
            if entry is None:
                entry = [NEG_INF, NEG_INF, node]
                cand[prefix] = entry
            # stay on this prefix: emit blank, or repeat the final character
            entry[0] = _logadd(entry[0], total + blank_lp)
            last = prefix[-1] if prefix else -1
            if pnb != NEG_INF and prefix:
                entry[1] = _logadd(entry[1], pnb + row[last])
            # extend with a new character
            if node is not None:
                children = node.children
                items = children.items()
            else:
                items = ((c, None) for c in all_classes)
            for c, child in items:
                ext = prefix + (c,)
                base = pb if c == last else total
                if base == NEG_INF:
                    continue
                score = base + row[c]
                sub = cand.get(ext)
                if sub is None:
                    cand[ext] = [NEG_INF, score, child]
                else:
                    sub[1] = _logadd(sub[1], score)
        ranked = sorted(cand.items(), key=lambda kv: (-_logadd(kv[1][0], kv[1][1]), kv[0]))
        beams = dict(ranked[: cfg.beam_width])

    results = []
    for prefix, (pb, pnb, node) in beams.items():
        if not prefix:
            continue
        if trie is not None and (node is None or node.word is None):
            continue
        word = "".join(chr(ord("a") + c) for c in prefix)
        results.append((word, _logadd(pb, pnb)))
    results.sort(key=lambda ws: (-ws[1], ws[0]))
    return results[: cfg.k]
