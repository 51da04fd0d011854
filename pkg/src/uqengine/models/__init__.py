from uqengine.models.base import Model, ModelOutput, ModelState, initial_resolve
from uqengine.models.external import External
from uqengine.models.processes import OrnsteinUhlenbeck
from uqengine.models.walks import Randomwalk, Straightwalk

__all__ = [
    "Model",
    "ModelOutput",
    "ModelState",
    "initial_resolve",
    "Randomwalk",
    "Straightwalk",
    "External",
    "OrnsteinUhlenbeck",
]
