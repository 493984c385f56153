"""
Process-wide execution settings: serial mode and worker counts.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Iterable, List, TypeVar

from hfb_cli.utils.singleton import Singleton

K = TypeVar("K")
R = TypeVar("R")


class Runtime(metaclass=Singleton):
    """
    Holds the --serial / --threads choice for the whole process.
    Serial mode pins FFTs to one worker and runs ensembles in a plain loop.
    """

    def __init__(self) -> None:
        self.serial: bool = False
        self.threads: int = max(1, min(8, os.cpu_count() or 1))

    def configure(self, serial: bool = False, threads: int | None = None) -> "Runtime":
        self.serial = serial
        if threads is not None:
            self.threads = max(1, int(threads))
        return self

    @property
    def fft_workers(self) -> int:
        return 1 if self.serial else self.threads

    def map_keyed(self, func: Callable[[K], R], keys: Iterable[K]) -> Dict[K, R]:
        """
        Evaluate func over keys, concurrently unless serial.
        The result dict is ordered like keys regardless of completion order.
        """
        ordered: List[K] = list(keys)
        if self.serial or self.threads == 1 or len(ordered) <= 1:
            return {key: func(key) for key in ordered}
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            results = list(pool.map(func, ordered))
        return dict(zip(ordered, results))
