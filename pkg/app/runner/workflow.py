# app/runner/workflow.py
"""Pipelines behind each subcommand, and the end-to-end demo scenarios."""
import logging
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from app.src.artifact_store import ArtifactStore
from app.src.scenario_config import ScenarioConfig, load_config
from app.src.scenario_service import ScenarioService

logger = logging.getLogger(__name__)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"
DEMOS = (
    "ap_fold",
    "dolph_hammerstein",
    "sine_nonsimple",
    "bnv_nonselfadjoint",
    "coupled_system",
    "nonlocal_gradient",
)


def demo_config_path(name: str) -> Path:
    return SCENARIO_DIR / f"{name}.toml"


def load_demo(name: str) -> ScenarioConfig:
    return load_config(demo_config_path(name))


def resolve_out_dir(config: ScenarioConfig) -> Path:
    if config.output is not None:
        return Path(config.output)
    return Path(os.getenv("FOLDS_OUT_DIR", "out")) / config.name


# ---------------------------
# Pipelines: each writes its artifacts and returns True when the report is clean
# ---------------------------

def spectrum_pipeline(service: ScenarioService, store: ArtifactStore) -> bool:
    report = service.spectrum()
    store.write_json("triple.json", report)
    return report.m_special.passed


def fiber_pipeline(service: ScenarioService, store: ArtifactStore) -> bool:
    fiber = service.fiber()
    store.write_csv("fiber.csv", fiber.header(), fiber.rows())
    return True


def classify_pipeline(service: ScenarioService, store: ArtifactStore) -> bool:
    classification = service.classify()
    store.write_json("classify.json", classification)
    expect = service.config.run.expect
    if expect is not None and classification.verdict != expect:
        logger.error("Scenario %s: expected %s, classified %s.", service.config.name, expect, classification.verdict)
        return False
    return True


def _counts_ok(counts: list[int], expected: list[int], mode: str) -> bool:
    if not expected:
        return True
    if len(expected) == 1:
        expected = expected * len(counts)
    if len(expected) != len(counts):
        return False
    if mode == "at_least":
        return all(c >= e for c, e in zip(counts, expected))
    return counts == expected


def solve_pipeline(service: ScenarioService, store: ArtifactStore) -> bool:
    run = service.config.run
    reports = service.solve()
    counts = [r.count for r in reports]
    store.write_json("solve.json", {"counts": counts, "reports": [r.model_dump() for r in reports]})
    ok = _counts_ok(counts, run.expected_counts, run.count_mode)
    if not ok:
        logger.error("Scenario %s: preimage counts %s, expected %s (%s).", service.config.name, counts, run.expected_counts, run.count_mode)
    return ok


def verify_pipeline(service: ScenarioService, store: ArtifactStore) -> bool:
    report = service.verify()
    store.write_json("verify.json", report)
    if not report.passed:
        logger.error("Scenario %s: verification reported violations.", service.config.name)
    return report.passed


PIPELINES = {
    "spectrum": (spectrum_pipeline,),
    "fiber": (fiber_pipeline,),
    "classify": (fiber_pipeline, classify_pipeline),
    "solve": (solve_pipeline,),
    "verify": (verify_pipeline,),
    "demo": (spectrum_pipeline, fiber_pipeline, classify_pipeline, solve_pipeline, verify_pipeline),
}


def run_scenario(config: ScenarioConfig, command: str, jobs: int = 1, out_dir: Optional[Path] = None) -> bool:
    out_dir = resolve_out_dir(config) if out_dir is None else out_dir
    store = ArtifactStore(out_dir)
    service = ScenarioService(config, jobs=jobs)
    results = [pipeline(service, store) for pipeline in PIPELINES[command]]
    store.write_manifest(config.name, command, config.model_dump(mode="json"))
    ok = all(results)
    logger.info("Scenario %s (%s) %s; artifacts in %s.", config.name, command, "passed" if ok else "FAILED", out_dir)
    return ok


def main():
    load_dotenv(override=True)
    if not logging.getLogger().handlers:
        logging.basicConfig(level=os.getenv("FOLDS_LOG_LEVEL", "INFO").upper(), format="%(levelname)s %(message)s")

    jobs = int(os.getenv("FOLDS_JOBS", "1"))
    failed = [name for name in DEMOS if not run_scenario(load_demo(name), "demo", jobs=jobs)]
    if failed:
        logger.error("Failed demos: %s", ", ".join(failed))
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
