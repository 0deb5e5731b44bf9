"""Request/response models for the blinded review API.

Score validation lives here so malformed submissions are rejected at the
edge (422) before they can touch the append-only log.  Blinded session
views never carry arm labels; only left/right.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field, field_validator, model_validator

CATEGORIES = ("no_stain", "weak", "strong_moderate")
DEFAULT_CATEGORY = "strong_moderate"


class CategoryScores(BaseModel):
    """Percentage allocation of stained area across the three intensity
    categories; must total exactly 100."""

    no_stain: int = Field(ge=0, le=100)
    weak: int = Field(ge=0, le=100)
    strong_moderate: int = Field(ge=0, le=100)

    @model_validator(mode="after")
    def check_sum(self):
        total = self.no_stain + self.weak + self.strong_moderate
        if total != 100:
            raise ValueError(f"categories must sum to 100, got {total}")
        return self


class SessionRequest(BaseModel):
    reader: str = Field(min_length=1, max_length=64)
    assay: str = Field(min_length=1)
    stain: str = Field(min_length=1)
    fovs: Optional[list[int]] = None  # default: every FOV with a pair
    seed: int = 0

    @field_validator("reader", "assay", "stain")
    @classmethod
    def strip_nonblank(cls, v: str) -> str:
        v = v.strip()
        if not v:
            raise ValueError("field must not be blank")
        return v


class PairView(BaseModel):
    """One side-by-side comparison as the reader sees it: no arms."""

    pair: int
    fov: int
    left_url: str
    right_url: str


class SessionView(BaseModel):
    session_id: str
    reader: str
    assay: str
    stain: str
    n_pairs: int
    cursor: int
    status: str  # open | complete
    pairs: list[PairView]


class NextPair(BaseModel):
    done: bool
    pair: Optional[PairView] = None
    index: Optional[int] = None
    total: int = 0


class ScoreSubmission(BaseModel):
    submission_id: str = Field(min_length=1, max_length=128)
    pair: int = Field(ge=0)
    left: CategoryScores
    right: CategoryScores
    submitted_at: Optional[str] = None


class ScoreAck(BaseModel):
    session_id: str
    pair: int
    accepted: bool
    duplicate: bool   # same submission_id seen before; nothing new stored
    revision: bool    # superseded an earlier record for this pair
    cursor: int
    n_pairs: int
    status: str


class ConsensusRow(BaseModel):
    arm: str
    stain: str
    fov: int
    n: int
    median: float
    min: float
    max: float


class ConsensusReport(BaseModel):
    category: str
    n_sessions: int
    n_records: int
    rows: list[ConsensusRow]


class Health(BaseModel):
    status: str
    n_pairs: int
    n_sessions: int
    n_open_sessions: int
