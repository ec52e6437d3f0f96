import json
import logging
from pathlib import Path

from fastapi import APIRouter, HTTPException
from fastapi.responses import FileResponse

from degenflow.models import JobStatus, JobStatusResponse
from degenflow.services.job_manager import job_manager
from degenflow.utils.reports import ERROR_NAME, MANIFEST_NAME

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/v1", tags=["jobs"])

MEDIA_TYPES = {".json": "application/json", ".csv": "text/csv"}


async def _finished_job(job_id: str) -> dict:
    job = await job_manager.get_job(job_id)
    if not job:
        raise HTTPException(status_code=404, detail="Job not found")
    if job["status"] not in (JobStatus.DONE, JobStatus.ERROR):
        raise HTTPException(
            status_code=400,
            detail=f"Result not ready. Current status: {job['status'].value}"
        )
    return job


def _manifest(job: dict) -> dict:
    path = Path(job["result_dir"]) / MANIFEST_NAME
    if not path.exists():
        raise HTTPException(status_code=404, detail="Run manifest not found")
    return json.loads(path.read_text(encoding="utf-8"))


@router.get("/status/{job_id}", response_model=JobStatusResponse)
async def get_job_status(job_id: str):
    """
    Get the current status of an experiment job.

    Returns status, progress percentage, message and, once finished, the verdict.
    """
    job = await job_manager.get_job(job_id)

    if not job:
        raise HTTPException(status_code=404, detail="Job not found")

    return JobStatusResponse(
        job_id=job_id,
        status=job["status"],
        progress=job["progress"],
        message=job.get("message", ""),
        kind=job.get("kind"),
        passed=job.get("passed"),
        exit_status=job.get("exit_status"),
        created_at=job.get("created_at"),
        completed_at=job.get("completed_at")
    )


@router.get("/result/{job_id}")
async def get_job_result(job_id: str):
    """Run manifest of a finished job: verdicts, files, timings and the config echo"""
    return _manifest(await _finished_job(job_id))


@router.get("/result/{job_id}/files/{name}")
async def get_job_file(job_id: str, name: str):
    """Download one artifact listed in the run manifest"""
    job = await _finished_job(job_id)
    manifest = _manifest(job)
    if name not in manifest.get("files", []) and name not in (MANIFEST_NAME, ERROR_NAME):
        raise HTTPException(status_code=404, detail=f"No artifact named {name}")
    path = Path(job["result_dir"]) / name
    if not path.exists():
        raise HTTPException(status_code=404, detail="Result file not found")
    return FileResponse(
        path,
        media_type=MEDIA_TYPES.get(path.suffix, "application/octet-stream"),
        filename=path.name,
    )


@router.delete("/job/{job_id}")
async def delete_job(job_id: str):
    """
    Delete a job and its artifacts.

    Useful for cleaning up after downloading results.
    """
    if not await job_manager.delete_job(job_id):
        raise HTTPException(status_code=404, detail="Job not found")
    return {"message": "Job deleted successfully"}
