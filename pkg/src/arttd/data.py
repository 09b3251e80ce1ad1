"""Core data model: agent observations, the social graph, and truth estimates.

Conventions used throughout the package:
  * agents, events and states are 0-based in memory; every file format is
    1-based, and the conversion happens only in the read/write helpers here.
  * a missing observation is stored as -1 in the dense observation matrix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

NULL = -1


class DatasetError(ValueError):
    """Raised for malformed dataset files or structurally unusable inputs."""


@dataclass(frozen=True)
class ObservationMatrix:
    """N x J matrix of agent reports with explicit nulls.

    values[n, j] is the state (0..n_states-1) agent n reported for event j,
    or -1 if the agent did not observe the event.
    """

    values: np.ndarray
    n_states: int

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise DatasetError(f"observation matrix must be 2-D and non-empty, got shape {v.shape}")
        if self.n_states < 2:
            raise DatasetError(f"need at least 2 states, got {self.n_states}")
        object.__setattr__(self, "values", np.ascontiguousarray(v, dtype=np.int64))
        self.values.setflags(write=False)

    @property
    def n_agents(self) -> int:
        return self.values.shape[0]

    @property
    def n_events(self) -> int:
        return self.values.shape[1]

    @property
    def observed_mask(self) -> np.ndarray:
        return self.values != NULL

    def observed_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays (agents, events) of all non-null entries, row-major order."""
        return np.nonzero(self.values != NULL)

    @classmethod
    def from_entries(cls, n_agents, n_events, n_states, entries) -> "ObservationMatrix":
        """Build from an iterable of (agent, event, state) 0-based triples."""
        values = np.full((n_agents, n_events), NULL, dtype=np.int64)
        for a, e, s in entries:
            values[a, e] = s
        return cls(values, n_states)


@dataclass(frozen=True)
class SocialGraph:
    """Undirected social graph over the agents, no self-loops."""

    n_agents: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        canon = set()
        for u, v in self.edges:
            if u == v:
                raise DatasetError(f"self-loop on agent {u}")
            if not (0 <= u < self.n_agents and 0 <= v < self.n_agents):
                raise DatasetError(f"edge ({u}, {v}) outside agent range [0, {self.n_agents})")
            canon.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(canon))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_agents, self.n_agents), dtype=bool)
        for u, v in self.edges:
            a[u, v] = a[v, u] = True
        return a

    def edge_array(self) -> np.ndarray:
        """Edges as a sorted (E, 2) array, u < v per row."""
        if not self.edges:
            return np.empty((0, 2), dtype=np.int64)
        return np.array(sorted(self.edges), dtype=np.int64)


@dataclass(frozen=True)
class TruthEstimate:
    """Per-event state decisions with the confidence rows that produced them."""

    states: np.ndarray      # (J,) int, 0-based
    confidence: np.ndarray  # (J, R) rows on the simplex

    def __post_init__(self):
        object.__setattr__(self, "states", np.asarray(self.states, dtype=np.int64))
        object.__setattr__(self, "confidence", np.asarray(self.confidence, dtype=np.float64))
        rows = self.confidence.sum(axis=1)
        if not np.allclose(rows, 1.0, atol=1e-9):
            raise ValueError("confidence rows must sum to 1")
        if not np.array_equal(self.states, self.confidence.argmax(axis=1)):
            raise ValueError("states must be the argmax of their confidence rows")

    @classmethod
    def from_confidence(cls, confidence) -> "TruthEstimate":
        confidence = np.asarray(confidence, dtype=np.float64)
        return cls(confidence.argmax(axis=1), confidence)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(obs: ObservationMatrix, graph: SocialGraph | None = None) -> ValidationReport:
    """Report structural problems; an empty violation list means usable input.

    Checks dimension agreement with the graph, out-of-range states and
    unobserved events.  Agents that observe nothing are legal (their encoder
    input is all-zero) but are flagged as warnings.
    """
    report = ValidationReport()
    vals = obs.values
    if graph is not None and graph.n_agents != obs.n_agents:
        report.violations.append(
            f"dimension mismatch: {obs.n_agents} agents in observations, "
            f"{graph.n_agents} in graph"
        )
    bad = (vals != NULL) & ((vals < 0) | (vals >= obs.n_states))
    for n, j in zip(*np.nonzero(bad)):
        report.violations.append(
            f"state out of range: agent {n + 1}, event {j + 1}, value {vals[n, j] + 1}"
        )
    observed = vals != NULL
    for j in np.nonzero(~observed.any(axis=0))[0]:
        report.violations.append(f"unobserved event {j + 1}")
    for n in np.nonzero(~observed.any(axis=1))[0]:
        report.warnings.append(f"agent {n + 1} observes no events")
    return report


def mv_prior(obs: ObservationMatrix) -> np.ndarray:
    """Per-event vote shares: row j, column r is the fraction of j's observers
    reporting state r.  Rows are probability vectors."""
    vals = obs.values
    R = obs.n_states
    if np.any((vals != NULL) & ((vals < 0) | (vals >= R))):
        raise DatasetError("observation values outside the state range")
    counts = np.zeros((obs.n_events, R), dtype=np.float64)
    n_idx, j_idx = obs.observed_pairs()
    np.add.at(counts, (j_idx, vals[n_idx, j_idx]), 1.0)
    totals = counts.sum(axis=1)
    if np.any(totals == 0):
        j = int(np.nonzero(totals == 0)[0][0])
        raise DatasetError(f"event {j + 1} has no observers; vote shares undefined")
    return counts / totals[:, None]


def onehot_row(obs: ObservationMatrix, agent: int) -> np.ndarray:
    """Agent's reports as a length J*R vector: one one-hot block per event,
    all-zero block where the entry is null."""
    return _onehot(obs.values[agent, :], obs.n_states)


def onehot_col(obs: ObservationMatrix, event: int) -> np.ndarray:
    """Event's reports as a length N*R vector, one block per agent."""
    return _onehot(obs.values[:, event], obs.n_states)


def onehot_rows_all(obs: ObservationMatrix) -> np.ndarray:
    """(N, J*R) stack of onehot_row for every agent."""
    return _onehot_stack(obs.values, obs.n_states)


def onehot_cols_all(obs: ObservationMatrix) -> np.ndarray:
    """(J, N*R) stack of onehot_col for every event."""
    return _onehot_stack(obs.values.T, obs.n_states)


def _onehot(line: np.ndarray, n_states: int) -> np.ndarray:
    out = np.zeros(line.size * n_states, dtype=np.float64)
    idx = np.nonzero(line != NULL)[0]
    out[idx * n_states + line[idx]] = 1.0
    return out


def _onehot_stack(mat: np.ndarray, n_states: int) -> np.ndarray:
    rows, cols = mat.shape
    out = np.zeros((rows, cols * n_states), dtype=np.float64)
    r_idx, c_idx = np.nonzero(mat != NULL)
    out[r_idx, c_idx * n_states + mat[r_idx, c_idx]] = 1.0
    return out


# ---------------------------------------------------------------------------
# file formats (all 1-based)
# ---------------------------------------------------------------------------

def write_observations(obs: ObservationMatrix, path) -> None:
    """CSV with header agent,event,value; one row per non-null entry."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent", "event", "value"])
        n_idx, j_idx = obs.observed_pairs()
        for n, j in zip(n_idx, j_idx):
            w.writerow([n + 1, j + 1, obs.values[n, j] + 1])


def read_observations(path, n_agents=None, n_events=None, n_states=None) -> ObservationMatrix:
    """Read the agent,event,value CSV.  Dimensions are inferred from the data
    when not given explicitly."""
    triples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DatasetError(f"{path}: empty file")
        if [h.strip().lower() for h in header] != ["agent", "event", "value"]:
            raise DatasetError(f"{path}: expected header agent,event,value, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                a, e, v = (int(x) for x in row)
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed row {row!r}") from exc
            if a < 1 or e < 1 or v < 1:
                raise DatasetError(f"{path}:{lineno}: indices and values are 1-based, got {row!r}")
            triples.append((a - 1, e - 1, v - 1))
    if not triples:
        raise DatasetError(f"{path}: no observations")
    arr = np.array(triples, dtype=np.int64)
    n_agents = n_agents or int(arr[:, 0].max()) + 1
    n_events = n_events or int(arr[:, 1].max()) + 1
    n_states = n_states or int(arr[:, 2].max()) + 1
    return ObservationMatrix.from_entries(n_agents, n_events, n_states, triples)


def write_graph(graph: SocialGraph, path) -> None:
    """CSV with header u,v; one undirected edge per row, u < v, 1-based."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "v"])
        for u, v in graph.edge_array():
            w.writerow([u + 1, v + 1])


def read_graph(path, n_agents=None) -> SocialGraph:
    edges = set()
    max_node = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DatasetError(f"{path}: empty file")
        if [h.strip().lower() for h in header] != ["u", "v"]:
            raise DatasetError(f"{path}: expected header u,v, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                u, v = (int(x) for x in row)
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed row {row!r}") from exc
            if u < 1 or v < 1 or u == v:
                raise DatasetError(f"{path}:{lineno}: need 1-based distinct endpoints, got {row!r}")
            edges.add((u - 1, v - 1))
            max_node = max(max_node, u, v)
    return SocialGraph(n_agents or max_node, frozenset(edges))


def write_truths(truths: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["event", "true_state"])
        for j, t in enumerate(np.asarray(truths)):
            w.writerow([j + 1, int(t) + 1])


def read_truths(path) -> np.ndarray:
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["event", "true_state"]:
            raise DatasetError(f"{path}: expected header event,true_state")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                j, t = int(row[0]), int(row[1])
            except (ValueError, IndexError) as exc:
                raise DatasetError(f"{path}:{lineno}: malformed row {row!r}") from exc
            out[j - 1] = t - 1
    truths = np.full(max(out) + 1, -1, dtype=np.int64)
    for j, t in out.items():
        truths[j] = t
    if np.any(truths < 0):
        raise DatasetError(f"{path}: missing events in truth file")
    return truths


def write_estimate(est: TruthEstimate, path) -> None:
    """CSV: event,state,conf_1..conf_R with full-precision confidences."""
    R = est.confidence.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["event", "state"] + [f"conf_{r + 1}" for r in range(R)])
        for j in range(est.states.size):
            w.writerow([j + 1, int(est.states[j]) + 1]
                       + [repr(float(c)) for c in est.confidence[j]])


def read_estimate(path) -> TruthEstimate:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 3 or header[0] != "event":
            raise DatasetError(f"{path}: not an estimate file")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((int(row[0]) - 1, [float(c) for c in row[2:]]))
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed row {row!r}") from exc
    rows.sort()
    confidence = np.array([conf for _, conf in rows], dtype=np.float64)
    return TruthEstimate.from_confidence(confidence)
