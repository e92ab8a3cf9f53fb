from __future__ import annotations

from typing import Any, Dict, Iterable, List, Optional, Sequence
from pathlib import Path
import json
import math
import numpy as np


__all__ = ['site_bit', 'basis_indices', 'popcounts', 'site_signs', 'us_to_tj0', 'khz_to_j0',
           'format_number', 'write_csv', 'write_json', 'to_jsonable', 'pairwise_mean',
           'pairwise_std']


def site_bit(site: int) -> int:
    """Bit mask of a 1-based site."""
    return 1 << (site - 1)


def basis_indices(n: int) -> np.ndarray:
    return np.arange(1 << n, dtype=np.int64)


def popcounts(n: int) -> np.ndarray:
    """Number of up spins of every basis index of an ``n``-site chain."""
    idx = basis_indices(n)
    counts = np.zeros(idx.size, dtype=np.int64)
    for k in range(n):
        counts += (idx >> k) & 1
    return counts


def site_signs(n: int, site: int) -> np.ndarray:
    """sigma^z eigenvalue (+1 or -1) of ``site`` for every basis index."""
    return 2.0 * ((basis_indices(n) >> (site - 1)) & 1) - 1.0


def us_to_tj0(t_us: Any, j0_khz: float) -> Any:
    """Convert a duration in microseconds to dimensionless time t J0."""
    if j0_khz <= 0:
        raise ValueError('j0_khz must be positive.')
    factor = 2.0 * math.pi * j0_khz * 1e-3
    if np.ndim(t_us):
        return np.asarray(t_us, dtype=float) * factor
    return float(t_us) * factor


def khz_to_j0(f_khz: Any, j0_khz: float) -> Any:
    """Convert an angular-frequency scale quoted in kHz (as f in 2 pi f) to units of J0."""
    if j0_khz <= 0:
        raise ValueError('j0_khz must be positive.')
    if np.ndim(f_khz):
        return np.asarray(f_khz, dtype=float) / j0_khz
    return float(f_khz) / j0_khz


def format_number(x: Any) -> str:
    return '%.17g' % float(x)


def to_jsonable(obj: Any) -> Any:
    """Recursively turn numpy scalars/arrays and enums into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, 'value') and not isinstance(obj, (int, float, str, bool)):
        return obj.value
    return obj


def write_csv(path: Any, header: Sequence[str], rows: Iterable[Sequence[Any]],
              metadata: Optional[Dict[str, Any]] = None) -> Path:
    """**Write a numeric CSV with pinned formatting.**

    Metadata entries come first as ``# key: <json>`` lines, then the header row. Numbers are
    written with 17 significant digits and every line ends with ``\\n``.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines: List[str] = []
    for key, value in sorted((metadata or {}).items()):
        lines.append(f'# {key}: {json.dumps(to_jsonable(value), sort_keys=True)}')
    lines.append(','.join(header))
    for row in rows:
        lines.append(','.join(v if isinstance(v, str) else format_number(v) for v in row))
    with open(path, 'w', encoding='utf-8', newline='\n') as file:
        file.write('\n'.join(lines) + '\n')
    return path


def write_json(path: Any, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as file:
        json.dump(to_jsonable(obj), file, indent=2, sort_keys=True)
        file.write('\n')
    return path


def pairwise_mean(stack: Any) -> np.ndarray:
    """Mean over the first axis, reduced along a contiguous axis so numpy sums pairwise."""
    stack = np.asarray(stack, dtype=float)
    flipped = np.ascontiguousarray(np.moveaxis(stack, 0, -1))
    return flipped.sum(axis=-1) / stack.shape[0]


def pairwise_std(stack: Any, ddof: int = 1) -> np.ndarray:
    stack = np.asarray(stack, dtype=float)
    k = stack.shape[0]
    if k - ddof <= 0:
        return np.zeros(stack.shape[1:])
    dev = stack - pairwise_mean(stack)
    flipped = np.ascontiguousarray(np.moveaxis(dev * dev, 0, -1))
    return np.sqrt(flipped.sum(axis=-1) / (k - ddof))
