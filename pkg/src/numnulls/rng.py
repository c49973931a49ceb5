"""Counter-based random streams.

Draw ``j`` for null ``n`` under master seed ``s`` is a pure function of
``(s, n, j)``, so serial, parallel and query-embedded runs see the same values.
The compiled kernel is used when importable; ``NUMNULLS_PURE_PYTHON=1`` forces
the Python twin.
"""

from __future__ import annotations

import os
from typing import Dict, List, Sequence

from . import _kernels_py
from .model import Distribution, IncompleteDatabase, Null

if os.environ.get("NUMNULLS_PURE_PYTHON") == "1":
    _backend = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _backend  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _backend = _kernels_py
        BACKEND = "python"


def backends():
    """Available kernel modules keyed by name (used by tests and the benchmark)."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]

        found["cython"] = _kernels
    except ImportError:
        pass
    return found


def draw_matrix(seed: int, nulls: Sequence[Null], dists: Sequence[Distribution],
                start: int, count: int, backend=None) -> List[List[float]]:
    """One row per null with draws for sample indices ``start .. start+count-1``.

    ``backend`` may be a kernel module or a name from :func:`backends`.
    """
    kernel = backends()[backend] if isinstance(backend, str) else (backend or _backend)
    params = [d.params() for d in dists]
    return kernel.draw_block(
        seed,
        [d.code for d in dists],
        [p[0] for p in params],
        [p[1] for p in params],
        [n.id for n in nulls],
        start,
        count,
    )


def dist_sample(d: Distribution, stream: "RandomStream", null_id: int = 0) -> float:
    """One draw from ``d`` at the stream's current position (which then advances)."""
    p1, p2 = d.params()
    x = _backend.draw(stream.seed, d.code, p1, p2, null_id, stream.position)
    stream.position += 1
    return x


class RandomStream:
    """A master seed plus a sample-index cursor."""

    __slots__ = ("seed", "position")

    def __init__(self, seed: int, position: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.position = int(position)

    def valuation(self, db: IncompleteDatabase) -> Dict[Null, float]:
        nulls = db.sorted_nulls()
        dists = [db.annotations[n] for n in nulls]
        rows = draw_matrix(self.seed, nulls, dists, self.position, 1)
        self.position += 1
        return {n: row[0] for n, row in zip(nulls, rows)}

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, position={self.position})"
