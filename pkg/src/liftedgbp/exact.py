"""Brute-force marginals by enumerating every joint state of a ground MRF.

Only meant as a reference for small models.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .errors import StateSpaceTooLarge, UnknownVariable
from .factor import FactorTable
from .model import GroundMrf

DEFAULT_STATE_CAP = 2 ** 24
_CHUNK = 1 << 16


def exact_marginal(mrf: GroundMrf, query, cap: int = DEFAULT_STATE_CAP) -> FactorTable:
    """Normalized marginal over ``query`` (kept in the given order)."""
    query = tuple(query)
    for v in query:
        if v not in mrf.cardinalities:
            raise UnknownVariable(f"{v!r} is not a variable of the model")
    variables = mrf.variables
    cards = np.array([mrf.cardinalities[v] for v in variables], dtype=np.int64)
    total = int(np.prod(cards)) if len(cards) else 1
    if total > cap:
        raise StateSpaceTooLarge(f"{total} joint states exceeds cap {cap}")
    index = {v: i for i, v in enumerate(variables)}
    factor_cols = [[index[v] for v in f.scope] for f in mrf.factors]
    q_cols = [index[v] for v in query]
    q_cards = tuple(mrf.cardinalities[v] for v in query)
    q_size = int(np.prod(q_cards)) if q_cards else 1
    q_strides = np.array([int(np.prod(q_cards[i + 1:])) for i in range(len(q_cards))], dtype=np.int64)

    acc = np.full(q_size, -np.inf)
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        states = np.stack(np.unravel_index(flat, tuple(cards)), axis=1) if len(cards) else np.zeros((1, 0), int)
        logp = np.zeros(len(flat))
        for f, cols in zip(mrf.factors, factor_cols):
            logp += f.table[tuple(states[:, c] for c in cols)]
        q_idx = states[:, q_cols] @ q_strides if q_cols else np.zeros(len(flat), dtype=np.int64)
        for k in range(q_size):
            sel = logp[q_idx == k]
            if sel.size:
                acc[k] = np.logaddexp(acc[k], logsumexp(sel))
    return FactorTable(query, acc.reshape(q_cards)).normalize()
