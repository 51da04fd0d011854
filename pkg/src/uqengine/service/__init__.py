from uqengine.service.app import create_app
from uqengine.service.jobs import Job, JobRegistry

__all__ = ["create_app", "Job", "JobRegistry"]
