"""IBM Model 2 as a generative reranker from reward-function strings to
natural-language commands.

Per abstraction level the model keeps three parameter families:

* ``tau``   -- word translation probabilities Pr(word | machine token)
* ``delta`` -- alignment probabilities Pr(i | j, n_c, n_m) with position 0
               reserved for the NULL token
* ``eta``   -- length probabilities Pr(n_c | n_m)

Training runs expectation-maximization with a "bake-in" prefix that updates
tau only (alignments held uniform, i.e. a Model-1 phase) before switching to
full tau+delta updates; eta comes from maximum-likelihood length counts.
Scoring a (command, level, reward) triple uses the exact factorization of
the alignment sum; a Monte-Carlo variant that samples alignments is kept
alongside and agrees in the limit.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NULL_TOKEN = "<NULL>"
TAU_FLOOR = 1e-12  # seen vocabulary, unseen (word, token) pair
OOV_FLOOR = 1e-9  # word outside the level's vocabulary
_ETA_SMOOTHING = 0.1  # Laplace count for unseen command lengths
FORMAT_TAG = "ibm2/v1"

DEFAULT_BAKEIN_ITERS = 5
DEFAULT_FULL_ITERS = 10


@dataclass
class LevelTables:
    """Parameter tables for a single abstraction level."""

    tau: dict[str, dict[str, float]] = field(default_factory=dict)
    # (n_c, n_m) -> array of shape (n_c, n_m + 1); rows sum to 1
    delta: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    # n_m -> {n_c: prob}
    eta: dict[int, dict[int, float]] = field(default_factory=dict)
    # n_m -> number of training pairs behind its eta row
    eta_totals: dict[int, float] = field(default_factory=dict)
    vocab: set[str] = field(default_factory=set)
    nc_range: tuple[int, int] = (1, 1)

    def delta_row(self, j: int, n_c: int, n_m: int) -> np.ndarray:
        table = self.delta.get((n_c, n_m))
        if table is None:
            return np.full(n_m + 1, 1.0 / (n_m + 1))
        return table[j]

    def eta_value(self, n_c: int, n_m: int) -> float:
        row = self.eta.get(n_m)
        lo, hi = self.nc_range
        if row is None:
            # machine length never seen: uniform over the observed range
            return 1.0 / (hi - lo + 1)
        value = row.get(n_c)
        if value is not None and value > 0.0:
            return value
        # seen machine length, unseen command length: Laplace mass, so a
        # novel length can never outweigh lengths actually observed
        total = self.eta_totals.get(n_m, 1.0)
        return _ETA_SMOOTHING / (total + _ETA_SMOOTHING * (hi - lo + 1))

    def tau_value(self, m_token: str, word: str) -> float:
        if word not in self.vocab:
            return OOV_FLOOR
        return max(self.tau.get(m_token, {}).get(word, 0.0), TAU_FLOOR)


@dataclass
class Ibm2Model:
    levels: dict[int, LevelTables] = field(default_factory=dict)
    bakein_iters: int = DEFAULT_BAKEIN_ITERS
    full_iters: int = DEFAULT_FULL_ITERS
    # per-level corpus log-likelihood after init and after each EM iteration
    history: dict[int, list[float]] = field(default_factory=dict)

    def has_level(self, level: int) -> bool:
        return level in self.levels


def _machine_tokens(reward: str) -> list[str]:
    return reward.split()


def likelihood_exact(
    tokens, reward: str, level: int, model: Ibm2Model
) -> float:
    """Log Pr(command | reward, level) via the factorized alignment sum.

    Independent per-position alignments let the sum over alignment vectors
    factor into a product over command positions of sums over source
    positions, which equals brute-force enumeration exactly.
    """
    tables = model.levels[level]
    m_tokens = [NULL_TOKEN] + _machine_tokens(reward)
    n_c, n_m = len(tokens), len(m_tokens) - 1
    logp = math.log(tables.eta_value(n_c, n_m))
    for j, word in enumerate(tokens):
        row = tables.delta_row(j, n_c, n_m)
        total = 0.0
        for i, m_tok in enumerate(m_tokens):
            total += row[i] * tables.tau_value(m_tok, word)
        logp += math.log(total)
    return logp


def likelihood_sampled(
    tokens,
    reward: str,
    level: int,
    model: Ibm2Model,
    samples: int,
    seed: int = 0,
) -> float:
    """Monte-Carlo estimate of the alignment sum (alignments drawn from
    delta); converges to :func:`likelihood_exact` as samples grow."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    tables = model.levels[level]
    m_tokens = [NULL_TOKEN] + _machine_tokens(reward)
    n_c, n_m = len(tokens), len(m_tokens) - 1
    rng = np.random.default_rng(seed)
    products = np.ones(samples)
    for j, word in enumerate(tokens):
        row = tables.delta_row(j, n_c, n_m)
        taus = np.array([tables.tau_value(m, word) for m in m_tokens])
        draws = rng.choice(n_m + 1, size=samples, p=row / row.sum())
        products *= taus[draws]
    return math.log(tables.eta_value(n_c, n_m)) + math.log(products.mean())


def corpus_log_likelihood(entries, model: Ibm2Model) -> float:
    """Sum of exact per-entry log-likelihoods (the EM objective, up to the
    uniform prior constant)."""
    return sum(
        likelihood_exact(e.tokens, e.reward, e.level, model) for e in entries
    )


def _raw_level_ll(pairs, tables: LevelTables) -> float:
    """Training-time objective on one level, without lookup floors."""
    total = 0.0
    for c_tokens, m_tokens in pairs:
        n_c, n_m = len(c_tokens), len(m_tokens) - 1
        total += math.log(tables.eta_value(n_c, n_m))
        for j, word in enumerate(c_tokens):
            row = tables.delta_row(j, n_c, n_m)
            s = sum(
                row[i] * tables.tau.get(m, {}).get(word, 0.0)
                for i, m in enumerate(m_tokens)
            )
            total += math.log(s)
    return total


def _em_iteration(pairs, tables: LevelTables, update_delta: bool) -> None:
    counts_tw: dict[str, Counter] = defaultdict(Counter)
    counts_t: Counter = Counter()
    counts_d: dict[tuple[int, int], np.ndarray] = {}
    for c_tokens, m_tokens in pairs:
        n_c, n_m = len(c_tokens), len(m_tokens) - 1
        key = (n_c, n_m)
        if update_delta and key not in counts_d:
            counts_d[key] = np.zeros((n_c, n_m + 1))
        for j, word in enumerate(c_tokens):
            row = tables.delta_row(j, n_c, n_m)
            probs = np.array(
                [
                    row[i] * tables.tau.get(m, {}).get(word, 0.0)
                    for i, m in enumerate(m_tokens)
                ]
            )
            probs /= probs.sum()
            for i, m in enumerate(m_tokens):
                counts_tw[m][word] += probs[i]
                counts_t[m] += probs[i]
            if update_delta:
                counts_d[key][j] += probs
    for m_tok, word_counts in counts_tw.items():
        norm = counts_t[m_tok]
        tables.tau[m_tok] = {w: c / norm for w, c in word_counts.items()}
    if update_delta:
        for key, table in counts_d.items():
            sums = table.sum(axis=1, keepdims=True)
            tables.delta[key] = table / sums


def train_em(
    entries,
    bakein_iters: int = DEFAULT_BAKEIN_ITERS,
    full_iters: int = DEFAULT_FULL_ITERS,
) -> Ibm2Model:
    """Fit per-level IBM2 tables on (tokens, level, reward) entries.

    Levels with no training entries are simply absent from the model and can
    never win at inference time.
    """
    by_level: dict[int, list] = defaultdict(list)
    for entry in entries:
        m_tokens = [NULL_TOKEN] + _machine_tokens(entry.reward)
        by_level[entry.level].append((tuple(entry.tokens), m_tokens))
    if not by_level:
        raise ValueError("empty corpus")
    model = Ibm2Model(bakein_iters=bakein_iters, full_iters=full_iters)
    for level, pairs in sorted(by_level.items()):
        tables = LevelTables()
        tables.vocab = {w for c, _ in pairs for w in c}
        lengths = [(len(c), len(m) - 1) for c, m in pairs]
        ncs = [nc for nc, _ in lengths]
        tables.nc_range = (min(ncs), max(ncs))
        eta_counts: dict[int, Counter] = defaultdict(Counter)
        for n_c, n_m in lengths:
            eta_counts[n_m][n_c] += 1
        tables.eta = {
            n_m: {n_c: cnt / sum(c.values()) for n_c, cnt in c.items()}
            for n_m, c in eta_counts.items()
        }
        tables.eta_totals = {
            n_m: float(sum(c.values())) for n_m, c in eta_counts.items()
        }
        uniform = 1.0 / len(tables.vocab)
        m_vocab = {m for _, m_tokens in pairs for m in m_tokens}
        tables.tau = {m: {w: uniform for w in tables.vocab} for m in m_vocab}
        for n_c, n_m in set(lengths):
            tables.delta[(n_c, n_m)] = np.full(
                (n_c, n_m + 1), 1.0 / (n_m + 1)
            )
        history = [_raw_level_ll(pairs, tables)]
        for _ in range(bakein_iters):
            _em_iteration(pairs, tables, update_delta=False)
            history.append(_raw_level_ll(pairs, tables))
        for _ in range(full_iters):
            _em_iteration(pairs, tables, update_delta=True)
            history.append(_raw_level_ll(pairs, tables))
        model.levels[level] = tables
        model.history[level] = history
    return model


def infer(tokens, model: Ibm2Model, reward_spaces: dict[int, list]):
    """Score every (level, reward) candidate and return the argmax.

    ``reward_spaces`` maps level -> lifted reward functions; the uniform
    prior over candidates makes the likelihood argmax the posterior argmax.
    Returns (level, reward string, score table sorted by log-prob).
    """
    best: tuple[int, str] | None = None
    best_score = -math.inf
    table: list[tuple[int, str, float]] = []
    for level in sorted(reward_spaces):
        if not model.has_level(level):
            continue
        for m in reward_spaces[level]:
            reward = m.render()
            score = likelihood_exact(tokens, reward, level, model)
            table.append((level, reward, score))
            if score > best_score:
                best_score = score
                best = (level, reward)
    if best is None:
        raise ValueError("no scoreable candidates: model has no trained level")
    table.sort(key=lambda row: -row[2])
    return best[0], best[1], table


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def model_to_dict(model: Ibm2Model) -> dict:
    levels = {}
    for level, t in model.levels.items():
        levels[str(level)] = {
            "tau": t.tau,
            "delta": {
                f"{nc},{nm}": table.tolist() for (nc, nm), table in t.delta.items()
            },
            "eta": {str(nm): {str(nc): p for nc, p in d.items()}
                    for nm, d in t.eta.items()},
            "eta_totals": {str(nm): total for nm, total in t.eta_totals.items()},
            "vocab": sorted(t.vocab),
            "nc_range": list(t.nc_range),
        }
    return {
        "format": FORMAT_TAG,
        "bakein_iters": model.bakein_iters,
        "full_iters": model.full_iters,
        "levels": levels,
    }


def model_from_dict(data: dict) -> Ibm2Model:
    if data.get("format") != FORMAT_TAG:
        raise ValueError(f"unsupported model format {data.get('format')!r}")
    model = Ibm2Model(
        bakein_iters=data["bakein_iters"], full_iters=data["full_iters"]
    )
    for level_str, raw in data["levels"].items():
        tables = LevelTables(
            tau={m: dict(words) for m, words in raw["tau"].items()},
            delta={
                tuple(int(x) for x in key.split(",")): np.array(rows)
                for key, rows in raw["delta"].items()
            },
            eta={
                int(nm): {int(nc): p for nc, p in d.items()}
                for nm, d in raw["eta"].items()
            },
            eta_totals={int(nm): t for nm, t in raw["eta_totals"].items()},
            vocab=set(raw["vocab"]),
            nc_range=tuple(raw["nc_range"]),
        )
        model.levels[int(level_str)] = tables
    return model


def save_model(model: Ibm2Model, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path: str | Path) -> Ibm2Model:
    return model_from_dict(json.loads(Path(path).read_text()))
