"""
Run bookkeeping: output directory, resolved-config snapshot, run manifest
and the run registry row in the database.
"""

import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional

from sqlalchemy.exc import SQLAlchemyError

from core.config import RunConfig, derive_seed, settings
from core.errors import DetectorError
from core.logger import get_logger

logger = get_logger("run_service")

SEED_MODULES = ("synth", "preprocess", "merge", "split", "kfold", "model", "cluster", "attack")
RESOLVED_CONFIG = "resolved_config.json"
RUN_MANIFEST = "run_manifest.json"


def write_json(path: Path, payload) -> None:
    """Canonical JSON (sorted keys, two-space indent, trailing newline)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@dataclass
class RunContext:
    """Everything a command needs to place outputs and draw seeds."""

    command: str
    config: RunConfig
    out_dir: Path
    outputs: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)

    def seed(self, module: str) -> int:
        return derive_seed(self.config.seed, module)

    def output(self, name: str) -> Path:
        """Path of an output file inside the run directory; registered in the manifest."""
        if name not in self.outputs:
            self.outputs.append(name)
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        started = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - started, 6)

    def manifest(self, total_seconds: float) -> Dict:
        return {
            "command": self.command,
            "config_hash": self.config.config_hash(),
            "seed": self.config.seed,
            "derived_seeds": {m: self.seed(m) for m in SEED_MODULES},
            "timings": {**self.timings, "total": round(total_seconds, 6)},
            "outputs": sorted(self.outputs),
        }


def _registry_start(ctx: RunContext) -> Optional[int]:
    if not settings.RUN_REGISTRY_ENABLED:
        return None
    try:
        from database import crud
        from database.connection import init_db, session_scope

        init_db()
        with session_scope() as db:
            run = crud.start_run(db, ctx.command, ctx.config.config_hash(), ctx.config.seed, str(ctx.out_dir))
            return run.id
    except SQLAlchemyError as e:
        logger.warning("Run registry unavailable: %s", e)
        return None


def _registry_finish(run_id: Optional[int], status: str, error_code: Optional[str] = None) -> None:
    if run_id is None:
        return
    try:
        from database import crud
        from database.connection import session_scope

        with session_scope() as db:
            crud.finish_run(db, run_id, status, error_code)
    except SQLAlchemyError as e:
        logger.warning("Could not close run %s in the registry: %s", run_id, e)


@contextmanager
def open_run(command: str, config: RunConfig) -> Iterator[RunContext]:
    """
    Create the output directory, snapshot the resolved config, and write the
    manifest when the command body finishes (successfully or not).
    """
    out_dir = Path(config.paths.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(command=command, config=config, out_dir=out_dir)
    write_json(out_dir / RESOLVED_CONFIG, config.to_dict())
    run_id = _registry_start(ctx)
    started = time.perf_counter()
    logger.info("Running %s (seed=%d, out=%s)", command, config.seed, out_dir)
    try:
        yield ctx
    except DetectorError as e:
        _registry_finish(run_id, "failed", e.code)
        raise
    except Exception:
        _registry_finish(run_id, "failed", "Unexpected")
        raise
    finally:
        write_json(out_dir / RUN_MANIFEST, ctx.manifest(time.perf_counter() - started))
    _registry_finish(run_id, "ok")
    logger.info("%s finished: %d output file(s) in %s", command, len(ctx.outputs), out_dir)
