import asyncio
import logging
import shutil
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Dict, List, Optional

from degenflow.config import settings
from degenflow.models import JobStatus

logger = logging.getLogger(__name__)


def _now() -> datetime:
    return datetime.now(timezone.utc)


class JobManager:
    """In-memory experiment job state"""

    def __init__(self):
        self.jobs: Dict[str, Dict] = {}
        self._cleanup_task = None

    async def create_job(self, job_id: str, config_path: str, result_dir: str, kind: Optional[str] = None) -> Dict:
        """Create a new job entry"""
        job_data = {
            "status": JobStatus.QUEUED,
            "progress": 0,
            "message": "Job queued",
            "kind": kind,
            "config_path": config_path,
            "result_dir": result_dir,
            "passed": None,
            "exit_status": None,
            "created_at": _now().isoformat(),
            "completed_at": None,
        }
        self.jobs[job_id] = job_data
        logger.info(f"Created job {job_id} ({kind})")
        return job_data

    async def get_job(self, job_id: str) -> Optional[Dict]:
        return self.jobs.get(job_id)

    async def update_job(self, job_id: str, updates: Dict) -> bool:
        job = self.jobs.get(job_id)
        if not job:
            return False
        job.update(updates)
        return True

    async def delete_job(self, job_id: str) -> bool:
        """Delete the job record and its files"""
        job = self.jobs.pop(job_id, None)
        if job is None:
            return False
        self._cleanup_job_files(job)
        return True

    def prune_expired(self, now: Optional[datetime] = None) -> List[str]:
        """Drop finished jobs older than the retention window; returns their ids"""
        cutoff = (now or _now()) - timedelta(hours=settings.JOB_RETENTION_HOURS)
        expired = [
            job_id for job_id, job in self.jobs.items()
            if job.get("completed_at") and datetime.fromisoformat(job["completed_at"]) < cutoff
        ]
        for job_id in expired:
            self._cleanup_job_files(self.jobs.pop(job_id))
            logger.info(f"Cleaned up job {job_id}")
        return expired

    async def cleanup_old_jobs(self):
        """Background task pruning expired jobs every hour"""
        while True:
            try:
                await asyncio.sleep(3600)
                self.prune_expired()
            except asyncio.CancelledError:
                raise
            except Exception as e:
                logger.error(f"Error in cleanup task: {e}")

    def _cleanup_job_files(self, job: Dict):
        try:
            if job.get("config_path"):
                Path(job["config_path"]).unlink(missing_ok=True)
            if job.get("result_dir"):
                shutil.rmtree(job["result_dir"], ignore_errors=True)
        except OSError as e:
            logger.error(f"Error cleaning up files: {e}")

    def start_cleanup_task(self):
        if not self._cleanup_task:
            self._cleanup_task = asyncio.create_task(self.cleanup_old_jobs())

    async def shutdown(self):
        if self._cleanup_task:
            self._cleanup_task.cancel()
            self._cleanup_task = None


# Global job manager instance
job_manager = JobManager()
