"""Order-preserving thread pool controlled by ENV_SOLVER_THREADS."""

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_VAR = "ENV_SOLVER_THREADS"


def solver_threads() -> int:
    raw = os.environ.get(THREADS_VAR, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_VAR}: expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_VAR}: expected a positive integer, got {raw!r}")
    return n


def parallel_map(fn, items):
    """``[fn(x) for x in items]`` evaluated on the configured number of threads.

    Results come back in input order, so reductions downstream do not depend
    on the schedule.
    """
    items = list(items)
    threads = min(solver_threads(), len(items))
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
