"""The three neural command grounders.

* multi-nn    -- bag-of-words embedding sum into a shared dense trunk with a
                 level head plus one reward head per abstraction level
* multi-rnn   -- same heads, but the command is encoded by a GRU over the
                 word sequence instead of a frequency-weighted sum
* single-rnn  -- GRU encoder into a single joint head over every
                 (level, reward) tuple

Multi-head models factor Pr(level, reward | command) as
Pr(level | command) * Pr(reward | level, command); the single-head model
estimates the joint directly.  Training minimizes summed cross-entropy with
Adam (batch 16, lr 0.001) and inverted dropout p=0.5 after the embedding
layer and after the output-specific (or penultimate) hidden layer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .nn import Tensor

MODEL_KINDS = ("multi-nn", "multi-rnn", "single-rnn")
FORMAT_TAG = "neural/v1"

UNK = "<UNK>"

DEFAULT_EMBED_DIM = 30
DEFAULT_HIDDEN_DIM = 60
DEFAULT_HEAD_DIM = 80
DEFAULT_EPOCHS = 100
DEFAULT_BATCH_SIZE = 16
DEFAULT_LR = 0.001
DEFAULT_DROPOUT = 0.5


class UnknownRewardError(KeyError):
    """Corpus entry's reward is missing from its level's output space."""


class EmptyCommandError(ValueError):
    pass


@dataclass
class Vocab:
    words: list[str]
    index: dict[str, int]

    @classmethod
    def build(cls, token_seqs) -> "Vocab":
        words = sorted({w for seq in token_seqs for w in seq})
        words = [UNK] + words
        return cls(words, {w: i for i, w in enumerate(words)})

    def __len__(self) -> int:
        return len(self.words)

    def encode(self, tokens) -> list[int]:
        unk = self.index[UNK]
        return [self.index.get(t, unk) for t in tokens]

    def bow(self, tokens) -> np.ndarray:
        """Count vector over known words; out-of-vocabulary tokens drop out."""
        counts = np.zeros(len(self.words))
        for t in tokens:
            i = self.index.get(t)
            if i is not None and i != self.index[UNK]:
                counts[i] += 1.0
        return counts


@dataclass
class Head:
    """Output-specific hidden layer plus read-out."""

    w_t: Tensor
    b_t: Tensor
    w_o: Tensor
    b_o: Tensor

    @classmethod
    def create(cls, in_dim: int, hidden: int, out_dim: int,
               rng: np.random.Generator) -> "Head":
        return cls(
            nn.uniform_init(rng, (in_dim, hidden)),
            nn.uniform_init(rng, (1, hidden)),
            nn.uniform_init(rng, (hidden, out_dim)),
            nn.uniform_init(rng, (1, out_dim)),
        )

    def parameters(self) -> list[Tensor]:
        return [self.w_t, self.b_t, self.w_o, self.b_o]

    def logits(self, trunk: Tensor, dropout_p: float, train: bool,
               rng: np.random.Generator) -> Tensor:
        t = nn.dense_relu(trunk, self.w_t, self.b_t)
        t = nn.dropout(t, dropout_p, train, rng)
        return nn.add(nn.matmul(t, self.w_o), self.b_o)


@dataclass
class NeuralGrounder:
    """One trained grounding network plus its labeled output spaces.

    ``spaces`` maps level -> ordered reward strings; the order fixes both
    the read-out indices and the tie-break at inference time.
    """

    kind: str
    vocab: Vocab
    spaces: dict[int, list[str]]
    embedding: Tensor
    shared_w: Tensor
    shared_b: Tensor
    gru: nn.GruCell | None
    level_head: Head | None
    reward_heads: dict[int, Head]
    joint_head: Head | None
    dropout_p: float = DEFAULT_DROPOUT
    loss_curve: list[float] = field(default_factory=list)

    score_kind = "prob"  # infer() tables hold posterior probabilities

    @property
    def levels(self) -> list[int]:
        return sorted(self.spaces)

    @property
    def joint_labels(self) -> list[tuple[int, str]]:
        return [(l, m) for l in self.levels for m in self.spaces[l]]

    def parameters(self) -> list[Tensor]:
        params = [self.embedding, self.shared_w, self.shared_b]
        if self.gru is not None:
            params.extend(self.gru.parameters())
        if self.level_head is not None:
            params.extend(self.level_head.parameters())
        for level in sorted(self.reward_heads):
            params.extend(self.reward_heads[level].parameters())
        if self.joint_head is not None:
            params.extend(self.joint_head.parameters())
        return params

    # -- encoding --

    def _encode_batch(self, token_seqs, train: bool,
                      rng: np.random.Generator) -> Tensor:
        if self.kind == "multi-nn":
            counts = np.stack([self.vocab.bow(seq) for seq in token_seqs])
            e = nn.embed_bow(self.embedding, counts)
            e = nn.dropout(e, self.dropout_p, train, rng)
            return nn.dense_relu(e, self.shared_w, self.shared_b)
        if any(len(seq) == 0 for seq in token_seqs):
            raise EmptyCommandError("cannot encode an empty command")
        max_len = max(len(seq) for seq in token_seqs)
        ids = np.zeros((len(token_seqs), max_len), dtype=np.int64)
        mask = np.zeros((len(token_seqs), max_len))
        for row, seq in enumerate(token_seqs):
            enc = self.vocab.encode(seq)
            ids[row, : len(enc)] = enc
            mask[row, : len(enc)] = 1.0
        steps = []
        masks = []
        for t in range(max_len):
            e_t = nn.gather_rows(self.embedding, ids[:, t])
            e_t = nn.dropout(e_t, self.dropout_p, train, rng)
            steps.append(e_t)
            masks.append(mask[:, t : t + 1])
        h = nn.gru_encode(self.gru, steps, masks)
        return nn.dense_relu(h, self.shared_w, self.shared_b)

    # -- forward passes --

    def forward_dists(self, tokens, rng: np.random.Generator | None = None):
        """Evaluation-mode distributions for one command.

        Multi-head kinds return (level_dist, {level: reward_dist});
        single-rnn returns (None, joint_dist over ``joint_labels``).
        """
        rng = rng or np.random.default_rng(0)
        trunk = self._encode_batch([tuple(tokens)], train=False, rng=rng)
        if self.kind == "single-rnn":
            logits = self.joint_head.logits(trunk, 0.0, False, rng)
            return None, nn.softmax(logits.data)[0]
        level_logits = self.level_head.logits(trunk, 0.0, False, rng)
        level_dist = nn.softmax(level_logits.data)[0]
        reward_dists = {}
        for level in self.levels:
            logits = self.reward_heads[level].logits(trunk, 0.0, False, rng)
            reward_dists[level] = nn.softmax(logits.data)[0]
        return level_dist, reward_dists

    def batch_loss(self, batch, train: bool, rng: np.random.Generator) -> Tensor:
        """Mean over the batch of the summed per-output cross-entropies.

        Only the level head and the true level's reward head receive loss
        for a given example; other reward heads are masked out.
        """
        token_seqs = [e.tokens for e in batch]
        scale = 1.0 / len(batch)
        trunk = self._encode_batch(token_seqs, train, rng)
        if self.kind == "single-rnn":
            labels = {lm: i for i, lm in enumerate(self.joint_labels)}
            targets = [self._target(labels, e) for e in batch]
            logits = self.joint_head.logits(trunk, self.dropout_p, train, rng)
            return nn.cross_entropy(logits, targets, scale)
        level_index = {l: i for i, l in enumerate(self.levels)}
        level_logits = self.level_head.logits(trunk, self.dropout_p, train, rng)
        loss = nn.cross_entropy(
            level_logits, [level_index[e.level] for e in batch], scale
        )
        for level in self.levels:
            rows = [i for i, e in enumerate(batch) if e.level == level]
            if not rows:
                continue
            space_index = {m: i for i, m in enumerate(self.spaces[level])}
            targets = []
            for i in rows:
                entry = batch[i]
                if entry.reward not in space_index:
                    raise UnknownRewardError(
                        f"{entry.reward!r} not in level-{level} space"
                    )
                targets.append(space_index[entry.reward])
            logits = self.reward_heads[level].logits(
                trunk, self.dropout_p, train, rng
            )
            loss = nn.add(loss, nn.cross_entropy(
                nn.gather_rows(logits, rows), targets, scale
            ))
        return loss

    def _target(self, labels: dict, entry) -> int:
        key = (entry.level, entry.reward)
        if key not in labels:
            raise UnknownRewardError(f"{key} not in the joint output space")
        return labels[key]

    # -- inference --

    def infer(self, tokens):
        """Best (level, reward) plus the per-candidate posterior table."""
        level_dist, dists = self.forward_dists(tokens)
        table: list[tuple[int, str, float]] = []
        if self.kind == "single-rnn":
            for (level, reward), p in zip(self.joint_labels, dists):
                table.append((level, reward, float(p)))
        else:
            for li, level in enumerate(self.levels):
                for mi, reward in enumerate(self.spaces[level]):
                    table.append(
                        (level, reward, float(level_dist[li] * dists[level][mi]))
                    )
        best = max(table, key=lambda row: row[2])  # first max wins ties
        table.sort(key=lambda row: -row[2])
        return best[0], best[1], table


def create_model(
    kind: str,
    vocab: Vocab,
    spaces: dict[int, list[str]],
    seed: int = 0,
    embed_dim: int = DEFAULT_EMBED_DIM,
    hidden_dim: int = DEFAULT_HIDDEN_DIM,
    head_dim: int = DEFAULT_HEAD_DIM,
    dropout_p: float = DEFAULT_DROPOUT,
) -> NeuralGrounder:
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    rng = np.random.default_rng(seed)
    embedding = nn.uniform_init(rng, (len(vocab), embed_dim))
    trunk_in = embed_dim if kind == "multi-nn" else hidden_dim
    gru = None
    if kind != "multi-nn":
        gru = nn.GruCell.create(embed_dim, hidden_dim, rng)
    shared_w = nn.uniform_init(rng, (trunk_in, hidden_dim))
    shared_b = nn.uniform_init(rng, (1, hidden_dim))
    levels = sorted(spaces)
    level_head = None
    joint_head = None
    reward_heads: dict[int, Head] = {}
    if kind == "single-rnn":
        out = sum(len(spaces[l]) for l in levels)
        joint_head = Head.create(hidden_dim, head_dim, out, rng)
    else:
        level_head = Head.create(hidden_dim, head_dim, len(levels), rng)
        for level in levels:
            reward_heads[level] = Head.create(
                hidden_dim, head_dim, len(spaces[level]), rng
            )
    return NeuralGrounder(
        kind=kind, vocab=vocab, spaces={l: list(spaces[l]) for l in levels},
        embedding=embedding, shared_w=shared_w, shared_b=shared_b, gru=gru,
        level_head=level_head, reward_heads=reward_heads,
        joint_head=joint_head, dropout_p=dropout_p,
    )


def train_neural(
    kind: str,
    entries,
    spaces: dict[int, list[str]],
    epochs: int = DEFAULT_EPOCHS,
    seed: int = 0,
    batch_size: int = DEFAULT_BATCH_SIZE,
    lr: float = DEFAULT_LR,
    embed_dim: int = DEFAULT_EMBED_DIM,
    hidden_dim: int = DEFAULT_HIDDEN_DIM,
    head_dim: int = DEFAULT_HEAD_DIM,
    dropout_p: float = DEFAULT_DROPOUT,
) -> NeuralGrounder:
    """Train a grounder of the given kind; deterministic under the seed.

    The vocabulary comes from the training fold; the output spaces are the
    environment's reward spaces (not just the rewards seen in training).
    """
    entries = list(entries)
    if not entries:
        raise ValueError("empty corpus")
    vocab = Vocab.build([e.tokens for e in entries])
    model = create_model(kind, vocab, spaces, seed, embed_dim, hidden_dim,
                         head_dim, dropout_p)
    rng = np.random.default_rng(seed + 1)
    optimizer = nn.Adam(model.parameters(), lr=lr)
    for _ in range(epochs):
        order = rng.permutation(len(entries))
        epoch_loss = 0.0
        for start in range(0, len(entries), batch_size):
            batch = [entries[i] for i in order[start : start + batch_size]]
            loss = model.batch_loss(batch, train=True, rng=rng)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += loss.data.item() * len(batch)
        model.loss_curve.append(epoch_loss / len(entries))
    return model


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def model_to_dict(model: NeuralGrounder) -> dict:
    named = _named_parameters(model)
    return {
        "format": FORMAT_TAG,
        "model_kind": model.kind,
        "vocab": model.vocab.words,
        "spaces": {str(l): ms for l, ms in model.spaces.items()},
        "dropout_p": model.dropout_p,
        "dims": {
            "embed": model.embedding.data.shape[1],
            "hidden": model.shared_w.data.shape[1],
            "head": _head_dim(model),
        },
        "params": {name: p.data.tolist() for name, p in named.items()},
    }


def _head_dim(model: NeuralGrounder) -> int:
    head = model.joint_head or model.level_head
    return head.w_t.data.shape[1]


def _named_parameters(model: NeuralGrounder) -> dict[str, Tensor]:
    named = {
        "embedding": model.embedding,
        "shared_w": model.shared_w,
        "shared_b": model.shared_b,
    }
    if model.gru is not None:
        for name, p in zip(
            ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_n"),
            model.gru.parameters(),
        ):
            named[f"gru.{name}"] = p
    heads: list[tuple[str, Head | None]] = [("level", model.level_head),
                                            ("joint", model.joint_head)]
    heads.extend((f"reward{l}", h) for l, h in model.reward_heads.items())
    for prefix, head in heads:
        if head is None:
            continue
        for name, p in zip(("w_t", "b_t", "w_o", "b_o"), head.parameters()):
            named[f"{prefix}.{name}"] = p
    return named


def model_from_dict(data: dict) -> NeuralGrounder:
    if data.get("format") != FORMAT_TAG:
        raise ValueError(f"unsupported model format {data.get('format')!r}")
    vocab = Vocab(data["vocab"], {w: i for i, w in enumerate(data["vocab"])})
    spaces = {int(l): ms for l, ms in data["spaces"].items()}
    model = create_model(
        data["model_kind"], vocab, spaces, seed=0,
        embed_dim=data["dims"]["embed"], hidden_dim=data["dims"]["hidden"],
        head_dim=data["dims"]["head"], dropout_p=data["dropout_p"],
    )
    named = _named_parameters(model)
    for name, values in data["params"].items():
        named[name].data = np.asarray(values, dtype=np.float64)
    return model


def save_model(model: NeuralGrounder, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path: str | Path) -> NeuralGrounder:
    return model_from_dict(json.loads(Path(path).read_text()))
