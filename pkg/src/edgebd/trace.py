"""Columnar record of a chain run, shared by both samplers.

Record ``t`` describes the graph held during interval ``t``: its holding
weight, its log score and AIC, and the move that ended the interval (a
birth ``B``, a death ``D``, a rejected proposal ``R``, or an edge reversal
``V`` from structure MCMC run with reversals enabled).  Graphs are not
stored; they are recovered by replaying moves from ``initial_graph``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Dag

__all__ = ["ChainTrace", "BIRTH", "DEATH", "REJECT", "REVERSE", "CSV_COLUMNS"]

BIRTH, DEATH, REJECT, REVERSE = 0, 1, 2, 3
_CODES = "BDRV"
CSV_COLUMNS = ("step", "move", "i", "j", "holding_weight", "cum_time", "log_score", "aic")


@dataclass
class ChainTrace:
    initial_graph: Dag
    kind: np.ndarray
    i: np.ndarray
    j: np.ndarray
    log_holding: np.ndarray
    cum_time: np.ndarray
    log_score: np.ndarray
    aic: np.ndarray
    meta: dict = field(default_factory=dict)
    rate_updates: np.ndarray | None = None

    @classmethod
    def allocate(cls, initial_graph: Dag, n: int, meta=None) -> "ChainTrace":
        return cls(
            initial_graph=initial_graph.copy(),
            kind=np.zeros(n, dtype=np.int8),
            i=np.zeros(n, dtype=np.int32),
            j=np.zeros(n, dtype=np.int32),
            log_holding=np.zeros(n),
            cum_time=np.zeros(n),
            log_score=np.zeros(n),
            aic=np.full(n, np.nan),
            meta=dict(meta or {}),
        )

    def __len__(self):
        return len(self.kind)

    @property
    def holding_weight(self) -> np.ndarray:
        return np.exp(self.log_holding)

    def move(self, t: int) -> tuple[str, int, int]:
        return _CODES[self.kind[t]], int(self.i[t]), int(self.j[t])

    def iter_graphs(self, start: int = 0, stop: int | None = None):
        """Yield ``(t, g)`` for each record, ``g`` being the graph held at ``t``.

        The same Dag object is mutated between yields; copy it to keep it.
        """
        stop = len(self) if stop is None else stop
        g = self.initial_graph.copy()
        kind, ii, jj = self.kind, self.i, self.j
        for t in range(stop):
            if t >= start:
                yield t, g
            k = kind[t]
            if k == BIRTH:
                g.add_edge(int(ii[t]), int(jj[t]))
            elif k == DEATH:
                g.remove_edge(int(ii[t]), int(jj[t]))
            elif k == REVERSE:
                g.remove_edge(int(ii[t]), int(jj[t]))
                g.add_edge(int(jj[t]), int(ii[t]))

    def graph_at(self, t: int) -> Dag:
        for _, g in self.iter_graphs(t, t + 1):
            return g.copy()
        raise IndexError(t)

    def replay(self) -> Dag:
        """Final graph after every move; raises if any move is illegal."""
        g = self.initial_graph.copy()
        for t in range(len(self)):
            k, a, b = self.kind[t], int(self.i[t]), int(self.j[t])
            if k == BIRTH:
                if not g.is_valid_addition(a, b):
                    raise ValueError(f"record {t}: birth {a}->{b} is not a valid addition")
                g.add_edge(a, b)
            elif k == DEATH:
                if not g.has_edge(a, b):
                    raise ValueError(f"record {t}: death of absent edge {a}->{b}")
                g.remove_edge(a, b)
            elif k == REVERSE:
                if not g.has_edge(a, b):
                    raise ValueError(f"record {t}: reversal of absent edge {a}->{b}")
                g.remove_edge(a, b)
                if not g.is_valid_addition(b, a):
                    raise ValueError(f"record {t}: reversal of {a}->{b} closes a cycle")
                g.add_edge(b, a)
        return g

    # CSV

    def header_lines(self) -> list[str]:
        lines = [f"seed={self.meta.get('seed')} generator={self.meta.get('generator', 'numpy.PCG64')}",
                 "initial=" + json.dumps(self.initial_graph.to_json(), separators=(",", ":"))]
        if "config" in self.meta:
            lines.append("config=" + json.dumps(self.meta["config"], sort_keys=True, separators=(",", ":")))
        return lines

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for line in self.header_lines():
                fh.write(f"# {line}\n")
            fh.write(",".join(CSV_COLUMNS) + "\n")
            hold = self.holding_weight.tolist()
            rows = zip(self.kind.tolist(), self.i.tolist(), self.j.tolist(), hold,
                       self.cum_time.tolist(), self.log_score.tolist(), self.aic.tolist())
            fh.writelines(
                f"{t + 1},{_CODES[k]},{a},{b},{h!r},{c!r},{s!r},{x!r}\n"
                for t, (k, a, b, h, c, s, x) in enumerate(rows))

    @classmethod
    def from_csv(cls, path) -> "ChainTrace":
        meta, initial = {}, None
        body = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#"):
                    text = line[1:].strip()
                    if text.startswith("initial="):
                        initial = Dag.from_json(text[len("initial="):])
                    elif text.startswith("config="):
                        meta["config"] = json.loads(text[len("config="):])
                    elif text.startswith("seed="):
                        for part in text.split():
                            key, _, val = part.partition("=")
                            meta[key] = val
                elif line.strip():
                    body.append(line.rstrip("\n").split(","))
        if initial is None:
            raise ValueError(f"{path}: trace has no '# initial=' header")
        if not body or tuple(body[0]) != CSV_COLUMNS:
            raise ValueError(f"{path}: expected columns {','.join(CSV_COLUMNS)}")
        rows = body[1:]
        tr = cls.allocate(initial, len(rows), meta)
        for t, r in enumerate(rows):
            tr.kind[t] = _CODES.index(r[1])
            tr.i[t], tr.j[t] = int(r[2]), int(r[3])
            h = float(r[4])
            tr.log_holding[t] = math.log(h) if h > 0 else -np.inf
            tr.cum_time[t] = float(r[5])
            tr.log_score[t] = float(r[6])
            tr.aic[t] = float(r[7])
        return tr
