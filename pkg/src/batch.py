import asyncio
import logging

logger = logging.getLogger(__name__)


class BatchRunner:
    """Fans independent model runs out to worker threads, at most `jobs` at a time."""

    def __init__(self, execute, jobs=1):
        if jobs < 1:
            raise ValueError(f"jobs must be at least 1, got {jobs}")
        self.execute = execute
        self.semaphore = asyncio.Semaphore(jobs)
        self.jobs = jobs

    async def _run_one(self, run_config):
        async with self.semaphore:
            logger.debug(f"Running {run_config.command} on {run_config.model}")
            return await asyncio.to_thread(self.execute, run_config)

    async def run(self, run_configs):
        """Results come back in input order whatever order the workers finish in."""
        logger.info(f"Running {len(run_configs)} model(s) with {self.jobs} worker(s)")
        return await asyncio.gather(*(self._run_one(c) for c in run_configs))


def run_batch(execute, run_configs, jobs):
    async def main():
        return await BatchRunner(execute, jobs).run(run_configs)

    return asyncio.run(main())
