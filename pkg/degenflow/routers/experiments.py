import asyncio
import json
import logging
import uuid
from pathlib import Path
from typing import List, Optional

from fastapi import APIRouter, File, Form, HTTPException, UploadFile

from degenflow.config import settings
from degenflow.models import JobResponse
from degenflow.services.experiment_runner import experiment_runner
from degenflow.services.job_manager import job_manager
from degenflow.utils.validators import FileValidator

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/v1", tags=["experiments"])

# Strong references to running jobs so they are not garbage collected
_background: set = set()


def _parse_overrides(raw: Optional[str]) -> List[str]:
    """A JSON array of key=value strings, or one override per line"""
    if not raw or not raw.strip():
        return []
    if raw.lstrip().startswith("["):
        try:
            items = json.loads(raw)
        except json.JSONDecodeError:
            raise HTTPException(status_code=400, detail="Invalid JSON in overrides")
        if not isinstance(items, list) or not all(isinstance(i, str) for i in items):
            raise HTTPException(status_code=400, detail="overrides must be a list of key=value strings")
        return items
    return [line.strip() for line in raw.splitlines() if line.strip()]


@router.post("/experiments", response_model=JobResponse)
async def submit_experiment(
    config: UploadFile = File(...),
    kind: Optional[str] = Form(None),
    overrides: Optional[str] = Form(None),
):
    """
    Upload an experiment config (JSON) and start it in the background.

    Accepts:
        - config: the experiment config file
        - kind: optional experiment kind overriding the file's
        - overrides: optional dotted key=value overrides

    Returns a job_id that can be used to track progress.
    """
    content = await FileValidator.validate_config_upload(config)
    experiment = FileValidator.parse_upload(content, _parse_overrides(overrides), kind)

    job_id = str(uuid.uuid4())
    safe_filename = FileValidator._sanitize_filename(config.filename)
    config_path = Path(settings.UPLOAD_DIR) / f"{job_id}_{safe_filename}"
    config_path.write_bytes(content)
    out_dir = Path(settings.RESULTS_DIR) / job_id

    await job_manager.create_job(job_id, str(config_path), str(out_dir), experiment.kind.value)
    task = asyncio.create_task(experiment_runner.run_job(job_id, experiment, out_dir))
    _background.add(task)
    task.add_done_callback(_background.discard)

    logger.info(f"Accepted {experiment.kind.value} experiment as job {job_id}")
    return JobResponse(job_id=job_id, message="Config accepted. Experiment started.")
