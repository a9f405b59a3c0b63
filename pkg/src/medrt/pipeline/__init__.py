from medrt.pipeline.clock import RealClock, VirtualClock
from medrt.pipeline.policy import (ROUTINE, STAT, BatcherConfig, StudyJob,
                                   early_exit_decide, effective_stat, form_batch,
                                   schedule_next, scheduler_key)
from medrt.pipeline.stats import STAGES, JobRecord, PipelineStats, build_stats
from medrt.pipeline.sim import (PipelineConfig, ServiceTimes, WorkloadSpec,
                                load_workload, run_sim)
from medrt.pipeline.service import ModelBundle, Thresholds
from medrt.pipeline.runtime import (InferenceResult, RunningPipeline, Ticket,
                                    run_pipeline)

__all__ = [
    "RealClock", "VirtualClock", "StudyJob", "BatcherConfig", "STAT", "ROUTINE",
    "schedule_next", "form_batch", "early_exit_decide", "effective_stat",
    "scheduler_key", "PipelineStats", "JobRecord", "build_stats", "STAGES",
    "WorkloadSpec", "ServiceTimes", "PipelineConfig", "run_sim", "load_workload",
    "ModelBundle", "Thresholds", "RunningPipeline", "Ticket", "InferenceResult",
    "run_pipeline",
]
