# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

import multiprocessing as mp
from multiprocessing.pool import ThreadPool
from typing import Any, Callable, Iterable, List, Optional

__all__ = ['multithread_exec']


def multithread_exec(func: Callable[[Any], Any], seq: Iterable[Any], threads: Optional[int] = None) -> List[Any]:
    """Execute a given function in parallel for each element of a given sequence

    Example::
        >>> from srbayes.utils.multithreading import multithread_exec
        >>> entries = [1, 4, 8]
        >>> results = multithread_exec(lambda x: x ** 2, entries)

    Args:
        func: function to be executed on each element of the iterable
        seq: iterable
        threads: number of workers to be used for multiprocessing

    Returns:
        list of results, ordered like the input sequence
    """

    threads = threads if isinstance(threads, int) else min(16, mp.cpu_count())
    # Single-thread
    if threads < 2:
        return list(map(func, seq))
    # Multi-threading
    with ThreadPool(threads) as tp:
        return tp.map(func, seq)
