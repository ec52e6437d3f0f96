import asyncio
import logging
from datetime import datetime, timezone
from pathlib import Path

from degenflow.config import settings
from degenflow.models import ExperimentConfig, JobStatus
from degenflow.services.job_manager import job_manager
from degenflow.services.pipelines import EXIT_ERROR, run_experiment

logger = logging.getLogger(__name__)


class ExperimentRunner:
    """Runs experiment pipelines off the event loop, a bounded number at a time"""

    def __init__(self):
        self.active_jobs = 0
        self.semaphore = asyncio.Semaphore(settings.MAX_CONCURRENT_JOBS)

    async def run_job(self, job_id: str, config: ExperimentConfig, out_dir: Path):
        async with self.semaphore:
            self.active_jobs += 1
            try:
                await self._run_job_impl(job_id, config, out_dir)
            finally:
                self.active_jobs -= 1

    async def _report_progress(self, job_id: str, fraction: float):
        job = await job_manager.get_job(job_id)
        if job and job["status"] == JobStatus.PROCESSING:
            percent = int(max(0.0, min(fraction, 1.0)) * 99)
            await job_manager.update_job(job_id, {"progress": percent, "message": f"Running: {percent}%"})

    async def _run_job_impl(self, job_id: str, config: ExperimentConfig, out_dir: Path):
        job = await job_manager.get_job(job_id)
        if not job:
            logger.error(f"Job {job_id} not found")
            return

        loop = asyncio.get_running_loop()

        def progress(fraction: float):
            asyncio.run_coroutine_threadsafe(self._report_progress(job_id, fraction), loop)

        try:
            await job_manager.update_job(job_id, {
                "status": JobStatus.PROCESSING,
                "message": f"Running {config.kind.value}..."
            })
            result = await asyncio.to_thread(run_experiment, config, out_dir, progress)

            failed = result.exit_status == EXIT_ERROR
            await job_manager.update_job(job_id, {
                "status": JobStatus.ERROR if failed else JobStatus.DONE,
                "progress": 100,
                "message": "Experiment raised an error; see error.json" if failed else (
                    "All verdicts passed" if result.manifest.passed else "Some verdicts failed"
                ),
                "passed": result.manifest.passed,
                "exit_status": result.exit_status,
                "completed_at": datetime.now(timezone.utc).isoformat(),
            })
            logger.info(f"Job {job_id} completed with exit status {result.exit_status}")

        except Exception as e:
            logger.error(f"Job {job_id} failed: {e}", exc_info=True)
            await job_manager.update_job(job_id, {
                "status": JobStatus.ERROR,
                "message": f"Processing failed: {e}",
                "exit_status": EXIT_ERROR,
                "completed_at": datetime.now(timezone.utc).isoformat(),
            })


# Global runner instance
experiment_runner = ExperimentRunner()
