import datetime as dt
from pathlib import Path

import numpy as np
import pytest

from crowdnet.graph import Side, graph_from_triples
from crowdnet.ingest import Holding, HoldingsSnapshot
from crowdnet.synth import SynthConfig, generate, write_dataset

AS_OF = dt.date(2014, 3, 31)


def make_snapshot(rows, bench=None, caps=None, as_of=AS_OF):
    """rows: iterable of (fund, stock, weight); caps default to 1e9 for every stock."""
    rows = list(rows)
    bench = dict(bench or {})
    stocks = {s for _, s, _ in rows} | set(bench)
    caps = dict(caps) if caps else {s: 1e9 for s in stocks}
    return HoldingsSnapshot(as_of, tuple(Holding(f, s, w) for f, s, w in rows), bench, caps)


def random_bipartite(rng, n_funds, n_stocks, density=0.5, low=0.0, connected=True):
    """Random weighted bipartite graph; ``connected`` adds a random spanning tree first."""
    funds = [f"F{i:02d}" for i in range(n_funds)]
    stocks = [f"S{j:02d}" for j in range(n_stocks)]
    pairs = set()
    if connected:
        placed = {"F": [funds[0]], "S": [stocks[0]]}
        pairs.add((funds[0], stocks[0]))
        rest = [("F", f) for f in funds[1:]] + [("S", s) for s in stocks[1:]]
        for i in rng.permutation(len(rest)):
            side, node = rest[i]
            other = placed["S" if side == "F" else "F"]
            peer = other[rng.integers(len(other))]
            pairs.add((node, peer) if side == "F" else (peer, node))
            placed[side].append(node)
    for f in funds:
        for s in stocks:
            if rng.random() < density:
                pairs.add((f, s))
    triples = []
    for f, s in sorted(pairs):
        w = rng.uniform(low, 1.0)
        triples.append((f, s, w if w > 0 else 1.0))
    return graph_from_triples(triples, Side.OVERWEIGHT)


def dominant_eigvec(adjacency):
    """Dense full-spectrum oracle: unit eigenvector of the largest eigenvalue, sign fixed positive."""
    vals, vecs = np.linalg.eigh(adjacency)
    v = vecs[:, np.argmax(vals)]
    if v.sum() < 0:
        v = -v
    return v, vals


@pytest.fixture(scope="session")
def crash_data():
    return generate(SynthConfig(seed=11, n_quarters=10, crash_quarter=4))


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    data = generate(SynthConfig(seed=5, n_quarters=6, n_stocks=250, n_funds=25, crash_quarter=2))
    write_dataset(data, d)
    return Path(d), data
