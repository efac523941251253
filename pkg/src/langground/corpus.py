"""Parallel-corpus handling: tokenization, JSONL I/O, and a seeded template
generator that stands in for crowd-sourced command data.

Generated commands follow the stylistic split observed in the task family:
level-0 commands spell out step-by-step direction chains (with run lengths
derived from actual shortest paths in the environment), level-1 commands
route through doors and may mention landmark rooms, and level-2 commands are
terse goal statements.
"""

from __future__ import annotations

import json
import string
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grounding import (
    LiftedRewardFunction,
    ParseError,
    bind,
    enumerate_reward_space,
    parse_machine_string,
)
from .world import ACTIONS, Cell, DELTAS, GO_DIRECTION, GO_PREDICATES, GridEnv

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)

_NUMBER_WORDS = (
    "zero one two three four five six seven eight nine ten eleven twelve "
    "thirteen fourteen fifteen sixteen seventeen eighteen nineteen twenty"
).split()


class EmptyCommandError(ValueError):
    """Tokenization produced no tokens."""


class SchemaError(ValueError):
    """A corpus line does not match the expected record schema."""


@dataclass(frozen=True)
class CorpusEntry:
    """One (command, level, reward) record of the parallel corpus."""

    text: str
    tokens: tuple[str, ...]
    level: int
    reward: str


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercase, strip punctuation characters, split on whitespace."""
    tokens = tuple(text.lower().translate(_PUNCT_TABLE).split())
    if not tokens:
        raise EmptyCommandError(f"no tokens in {text!r}")
    return tokens


def make_entry(text: str, level: int, reward: str) -> CorpusEntry:
    if level not in (0, 1, 2):
        raise SchemaError(f"level must be 0, 1 or 2, got {level!r}")
    try:
        parse_machine_string(reward, level)
    except ParseError as exc:
        raise SchemaError(f"reward {reward!r} invalid at level {level}: {exc}")
    return CorpusEntry(text, tokenize(text), level, reward)


def load_corpus(path: str | Path) -> list[CorpusEntry]:
    entries = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            entry = make_entry(
                record["command"], record["level"], record["reward"]
            )
        except (SchemaError, EmptyCommandError, KeyError, TypeError,
                json.JSONDecodeError) as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from exc
        entries.append(entry)
    return entries


def save_corpus(entries, path: str | Path) -> None:
    lines = [
        json.dumps({"command": e.text, "level": e.level, "reward": e.reward})
        for e in entries
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def level_counts(entries) -> dict[int, int]:
    counts = {0: 0, 1: 0, 2: 0}
    for e in entries:
        counts[e.level] += 1
    return counts


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

_TEMPLATES_PATH = Path(__file__).parent / "data" / "templates.json"


def _load_templates() -> dict:
    return json.loads(_TEMPLATES_PATH.read_text())


def _shortest_actions(env: GridEnv, start: Cell, goals: frozenset[Cell]) -> list[str]:
    """BFS action sequence from a cell into a goal set, ignoring the block
    mechanics (commands narrate routes, they do not simulate them)."""
    if start in goals:
        return []
    parent: dict[Cell, tuple[Cell, str]] = {}
    seen = {start}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        for action in ACTIONS:
            dx, dy = DELTAS[action]
            nxt = (cell[0] + dx, cell[1] + dy)
            if nxt in seen or not env.is_free(nxt):
                continue
            parent[nxt] = (cell, action)
            if nxt in goals:
                path = [action]
                back = cell
                while back != start:
                    back, act = parent[back]
                    path.append(act)
                return path[::-1]
            seen.add(nxt)
            queue.append(nxt)
    return []


def _run_lengths(actions: list[str]) -> list[tuple[int, str]]:
    runs: list[tuple[int, str]] = []
    for action in actions:
        if runs and runs[-1][1] == action:
            runs[-1] = (runs[-1][0] + 1, action)
        else:
            runs.append((1, action))
    return runs


def number_word(n: int) -> str:
    if n < len(_NUMBER_WORDS):
        return _NUMBER_WORDS[n]
    return f"{_NUMBER_WORDS[20]} {_NUMBER_WORDS[n - 20]}"


class CommandGenerator:
    """Seeded paraphrase sampler for one environment."""

    def __init__(self, env: GridEnv, seed: int = 0,
                 jitter_prob: float = 0.2, prefix_prob: float = 0.4,
                 suffix_prob: float = 0.25, color_drop_prob: float = 0.35):
        self.env = env
        self.rng = np.random.default_rng(seed)
        self.templates = _load_templates()
        self.synonyms = self.templates["synonyms"]
        self.jitter_prob = jitter_prob
        self.prefix_prob = prefix_prob
        self.suffix_prob = suffix_prob
        self.color_drop_prob = color_drop_prob
        self.color_by_room = {room.id: room.color for room in env.rooms}

    # -- sampling helpers --

    def _pick(self, options) -> str:
        return options[int(self.rng.integers(len(options)))]

    def _syn(self, key: str) -> str:
        return self._pick(self.synonyms[key])

    def _pick_template(self, group: str) -> str:
        """Landmark-mentioning paraphrases are drawn with the bias recorded
        in the template file; commands that name a door or neighbor room by
        another room's color are what separate order-aware readers from
        bag-of-words ones."""
        templates = self.templates[group]
        bias = self.templates.get("landmark_bias", {}).get(group[:2])
        if bias is None:
            return self._pick(templates)
        landmark = [t for t in templates if "{landmark}" in t]
        plain = [t for t in templates if "{landmark}" not in t]
        if landmark and plain:
            pool = landmark if self.rng.random() < bias else plain
            return self._pick(pool)
        return self._pick(templates)

    def _path_text(self, actions: list[str]) -> str:
        parts = []
        for count, action in _run_lengths(actions):
            if count > 1 and self.rng.random() < self.jitter_prob:
                count = max(1, count + int(self.rng.integers(-1, 2)))
            parts.append(f"{number_word(count)} {self._syn(action)}")
        connector = self._syn("then")
        return f" {connector} ".join(parts)

    def _fill(self, template: str, slots: dict[str, str]) -> str:
        words = template
        for key, value in slots.items():
            words = words.replace("{" + key + "}", value)
        # unresolved synonym slots get sampled fresh each occurrence
        out: list[str] = []
        for token in words.split():
            if token.startswith("{") and token.endswith("}"):
                out.append(self._syn(token[1:-1]))
            else:
                out.append(token)
        text = " ".join(t for t in out if t)
        if self.rng.random() < self.prefix_prob:
            text = f"{self._syn('prefix')} {text}"
        if self.rng.random() < self.suffix_prob:
            text = f"{text} {self._syn('suffix')}"
        return text

    # -- per-task command synthesis --

    def _task_slots(self, m: LiftedRewardFunction) -> dict[str, str]:
        env = self.env
        grounded = bind(m, env)
        color = ""
        if grounded.target_region in self.color_by_room:
            color = self.color_by_room[grounded.target_region]
        entity_cell = (
            env.agent_position
            if grounded.entity_id == "agent0"
            else dict(zip(env.block_ids, (b.position for b in env.blocks)))[
                grounded.entity_id
            ]
        )
        src = self.color_by_room[env.room_of_cell(entity_cell)]
        # landmark rooms lean toward other task targets: "the door by the
        # red room ... into the blue room" then shares its bag of colors
        # with the reversed task, so word order genuinely matters
        others = [c for c in env.colors if c != color]
        task_like = [c for c in others if c != src]
        if task_like and (not others or self.rng.random() < 0.75):
            landmark = self._pick(task_like)
        elif others:
            landmark = self._pick(others)
        else:
            landmark = src
        return {
            "color": color,
            "src": src,
            "landmark": landmark,
            "entity_cell_path": "",
            "_entity_cell": entity_cell,  # consumed below, never rendered
            "_goal_cells": grounded.goal_cells,
        }

    def command_for(self, m: LiftedRewardFunction) -> str:
        if m.predicate in GO_PREDICATES:
            direction = GO_DIRECTION[m.predicate]
            template = self._pick(self.templates["l0_go"])
            return self._fill(template, {"dir": self._syn(direction)})
        slots = self._task_slots(m)
        entity_cell = slots.pop("_entity_cell")
        goal_cells = slots.pop("_goal_cells")
        kind = "block" if m.predicate.startswith("block") else "agent"
        satisfied = entity_cell in goal_cells
        if m.level == 0:
            if satisfied:
                template = self._pick(self.templates[f"l0_{kind}_stay"])
            else:
                slots["path"] = self._path_text(
                    _shortest_actions(self.env, entity_cell, goal_cells)
                )
                template = self._pick(self.templates[f"l0_{kind}_path"])
                if "{color}" in template and self.rng.random() < self.color_drop_prob:
                    template = self.templates[f"l0_{kind}_path"][0]
        elif m.level == 1:
            if satisfied:
                template = self._pick(self.templates[f"l1_{kind}_stay"])
            else:
                template = self._pick_template(f"l1_{kind}")
        else:
            if satisfied:
                template = self._pick(self.templates[f"l2_{kind}_stay"])
            elif self.rng.random() < 0.25:
                template = self._pick(self.templates[f"l2_{kind}_src"])
            else:
                template = self._pick_template(f"l2_{kind}")
        return self._fill(template, slots)


def corpus_tasks(env: GridEnv, level: int) -> list[LiftedRewardFunction]:
    """The task family commands are collected for: go* primitives plus
    agent/block containment for every room color (door targets excluded)."""
    tasks = []
    for m in enumerate_reward_space(env, level):
        if m.constraint is not None and not m.constraint.startswith("roomIs"):
            continue
        tasks.append(m)
    return tasks


def gen_synthetic_corpus(
    env: GridEnv,
    n_per_task: int,
    seed: int = 0,
    **generator_kwargs,
) -> list[CorpusEntry]:
    """Deterministic templated corpus: ``n_per_task`` paraphrases for every
    task at every level, in task order."""
    if n_per_task < 1:
        raise ValueError("n_per_task must be at least 1")
    gen = CommandGenerator(env, seed=seed, **generator_kwargs)
    entries: list[CorpusEntry] = []
    for level in (0, 1, 2):
        for m in corpus_tasks(env, level):
            for _ in range(n_per_task):
                text = gen.command_for(m)
                entries.append(make_entry(text, level, m.render()))
    return entries
