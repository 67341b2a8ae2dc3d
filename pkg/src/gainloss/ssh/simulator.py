import logging
from concurrent.futures import Executor, ProcessPoolExecutor
from typing import Any, Callable, Iterable, Iterator, List, TypeVar

T = TypeVar("T")
R = TypeVar("R")


class SSHSimulator:
    """
    Main entry point for running gain/loss SSH experiments.

    Owns the worker pool shared by trajectory ensembles and Θ-sweeps. Work is always
    dispatched through the order-preserving map, so results do not depend on the
    number of workers.
    """

    def __init__(self, workers: int = 1):
        """
        Initialize the SSHSimulator.

        Args:
            workers (int): Number of worker processes. 1 runs everything in-process.
        """
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self.workers = workers
        self.executor: Executor | None = None
        self.logger = logging.getLogger(__name__)

        # Import here to avoid circular imports
        from gainloss.ssh.experiments import ExperimentRunner

        self.experiments = ExperimentRunner(self)

    def __enter__(self) -> 'SSHSimulator':
        self._ensure_executor()
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        """Shut the worker pool down when leaving the context."""
        if self.executor is not None:
            self.executor.shutdown(wait=True)
            self.executor = None

    def _ensure_executor(self) -> None:
        """Create the process pool on first use when more than one worker is requested."""
        if self.executor is None and self.workers > 1:
            self.logger.debug("Starting process pool with %d workers", self.workers)
            self.executor = ProcessPoolExecutor(max_workers=self.workers)

    def imap(self, fn: Callable[[T], R], items: Iterable[T]) -> Iterator[R]:
        """
        Apply fn to every item, yielding results in input order.

        Args:
            fn (Callable[[T], R]): A picklable module-level function.
            items (Iterable[T]): Picklable work items.

        Returns:
            Iterator[R]: Results in the order of items.
        """
        self._ensure_executor()
        if self.executor is None:
            return map(fn, items)
        return self.executor.map(fn, items)

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """Apply fn to every item and collect the results in input order."""
        return list(self.imap(fn, items))
