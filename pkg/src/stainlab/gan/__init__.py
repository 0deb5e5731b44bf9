from .networks import Discriminator, Generator
from .training import (
    CycleGanConfig,
    ImagePool,
    TrainState,
    cycle_loss_total,
    init_state,
    load_generator,
    save_state,
    train,
    train_step,
)
from .inference import from_domain, to_domain, translate_image, translate_patch
from .ablation import run_ablation

__all__ = [
    "CycleGanConfig",
    "Discriminator",
    "Generator",
    "ImagePool",
    "TrainState",
    "cycle_loss_total",
    "from_domain",
    "init_state",
    "load_generator",
    "run_ablation",
    "save_state",
    "to_domain",
    "train",
    "train_step",
    "translate_image",
    "translate_patch",
]
