from .app import create_app
from .schemas import CATEGORIES, DEFAULT_CATEGORY
from .store import (
    ARM_ADJACENT,
    ARM_SYNTHETIC,
    StudyPair,
    StudyStore,
    build_study,
    image_name,
)

__all__ = [
    "ARM_ADJACENT",
    "ARM_SYNTHETIC",
    "CATEGORIES",
    "DEFAULT_CATEGORY",
    "StudyPair",
    "StudyStore",
    "build_study",
    "create_app",
    "image_name",
]
