"""Durable storage for blinded review studies.

Layout of a study directory:

    pairs.jsonl        adjacent/synthetic image pairs with arm labels
                       (server-side only, never served)
    images/<sha>.png   presented images, content-hash names, no metadata
    sessions/<id>.json one file per reader session, written atomically
    scores.jsonl       append-only blinded score log; left/right only,
                       never arm labels

Unblinding (joining left/right back to arms) happens only inside the
consensus computation, and only once every contributing session is
complete.
"""

from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InvalidArgumentError, NotReadyError
from ..evaluate import consensus_report
from ..imgio import save_rgb

ARM_ADJACENT = "adjacent"
ARM_SYNTHETIC = "synthetic"


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def image_name(img: np.ndarray) -> str:
    """Content-addressed file name so nothing about arm or order leaks."""
    digest = hashlib.sha256(np.ascontiguousarray(img).tobytes()).hexdigest()[:16]
    return f"{digest}.png"


@dataclass
class StudyPair:
    pair: int
    assay: str
    stain: str
    fov: int
    adjacent: str   # relative image path, ground-truth singleplex
    synthetic: str  # relative image path, model output


class StudyStore:
    """File-backed state for one review study."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.pairs_path = self.root / "pairs.jsonl"
        self.scores_path = self.root / "scores.jsonl"
        self.sessions_dir = self.root / "sessions"
        if not self.pairs_path.exists():
            raise NotReadyError(
                f"{self.root} has no pairs.jsonl; build the study first "
                "(stainlab eval --study-out)"
            )
        self.pairs: list[StudyPair] = []
        for line in self.pairs_path.read_text().splitlines():
            if not line:
                continue
            doc = json.loads(line)
            self.pairs.append(
                StudyPair(
                    pair=int(doc["pair"]),
                    assay=doc["assay"],
                    stain=doc["stain"],
                    fov=int(doc["fov"]),
                    adjacent=doc["adjacent"],
                    synthetic=doc["synthetic"],
                )
            )
        if not self.pairs:
            raise NotReadyError(f"{self.root}/pairs.jsonl holds no pairs")
        self.sessions_dir.mkdir(exist_ok=True)

    # -- sessions ---------------------------------------------------------

    def _session_path(self, session_id: str) -> Path:
        if not session_id or "/" in session_id or session_id.startswith("."):
            raise InvalidArgumentError(f"bad session id {session_id!r}")
        return self.sessions_dir / f"{session_id}.json"

    def select_pairs(
        self, assay: str, stain: str, fovs: list[int] | None = None
    ) -> list[StudyPair]:
        chosen = [
            p
            for p in self.pairs
            if p.assay == assay
            and p.stain.lower() == stain.lower()
            and (fovs is None or p.fov in fovs)
        ]
        chosen.sort(key=lambda p: (p.fov, p.pair))
        return chosen

    def create_session(
        self,
        reader: str,
        assay: str,
        stain: str,
        fovs: list[int] | None = None,
        seed: int = 0,
    ) -> dict:
        """Build a session over the selected pairs.

        Left/right placement is drawn per pair from ``seed`` alone, so two
        sessions created with the same selection and seed present identical
        orderings.
        """
        selected = self.select_pairs(assay, stain, fovs)
        if not selected:
            return {}
        rng = np.random.default_rng(np.random.SeedSequence([seed, len(selected), 31]))
        session_id = uuid.uuid4().hex[:12]
        pairs = []
        for p in selected:
            adjacent_left = bool(rng.random() < 0.5)
            left, right = (
                (p.adjacent, p.synthetic) if adjacent_left else (p.synthetic, p.adjacent)
            )
            pairs.append(
                {
                    "pair": p.pair,
                    "fov": p.fov,
                    "left": left,
                    "right": right,
                    "left_arm": ARM_ADJACENT if adjacent_left else ARM_SYNTHETIC,
                }
            )
        doc = {
            "id": session_id,
            "reader": reader,
            "assay": assay,
            "stain": stain,
            "seed": seed,
            "pairs": pairs,
            "cursor": 0,
            "status": "open",
            "submissions": {},  # submission_id -> pair id
        }
        _atomic_write(self._session_path(session_id), json.dumps(doc, sort_keys=True))
        return doc

    def load_session(self, session_id: str) -> dict | None:
        path = self._session_path(session_id)
        if not path.exists():
            return None
        return json.loads(path.read_text())

    def save_session(self, doc: dict):
        _atomic_write(self._session_path(doc["id"]), json.dumps(doc, sort_keys=True))

    def list_sessions(self) -> list[dict]:
        return [
            json.loads(path.read_text())
            for path in sorted(self.sessions_dir.glob("*.json"))
        ]

    def current_pair(self, doc: dict) -> dict | None:
        if doc["cursor"] >= len(doc["pairs"]):
            return None
        return doc["pairs"][doc["cursor"]]

    # -- scores -----------------------------------------------------------

    def append_score(self, session_id: str, submission: dict):
        """Append one blinded record; deliberately no arm labels."""
        record = {
            "session": session_id,
            "submission_id": submission["submission_id"],
            "pair": submission["pair"],
            "left": submission["left"],
            "right": submission["right"],
            "submitted_at": submission.get("submitted_at"),
        }
        with self.scores_path.open("a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            fh.flush()

    def read_scores(self) -> list[dict]:
        if not self.scores_path.exists():
            return []
        return [
            json.loads(line)
            for line in self.scores_path.read_text().splitlines()
            if line
        ]

    # -- reporting --------------------------------------------------------

    def referenced_open_sessions(self) -> list[str]:
        """Open sessions that already contributed to the score log; these
        block unblinding.  Abandoned sessions with no scores do not."""
        referenced = {rec["session"] for rec in self.read_scores()}
        return [
            s["id"]
            for s in self.list_sessions()
            if s["status"] == "open" and s["id"] in referenced
        ]

    def complete_sessions(self) -> list[dict]:
        return [s for s in self.list_sessions() if s["status"] == "complete"]

    def consensus_rows(self, category: str) -> list[dict]:
        """Unblind and flatten to per-reading rows for the eval harness.

        Later records supersede earlier ones for the same (session, pair).
        Callers must gate on referenced_open_sessions() first.
        """
        sessions = {s["id"]: s for s in self.list_sessions()}
        latest: dict[tuple[str, int], dict] = {}
        for rec in self.read_scores():
            latest[(rec["session"], rec["pair"])] = rec
        rows = []
        for (session_id, pair_id), rec in sorted(latest.items()):
            session = sessions.get(session_id)
            if session is None or session["status"] != "complete":
                continue
            entry = next((p for p in session["pairs"] if p["pair"] == pair_id), None)
            if entry is None:
                continue
            arms = {
                "left": entry["left_arm"],
                "right": ARM_SYNTHETIC
                if entry["left_arm"] == ARM_ADJACENT
                else ARM_ADJACENT,
            }
            for side in ("left", "right"):
                rows.append(
                    {
                        "arm": arms[side],
                        "stain": session["stain"],
                        "fov": entry["fov"],
                        "score": rec[side][category],
                    }
                )
        return rows

    def consensus(self, category: str) -> list[dict]:
        return consensus_report(self.consensus_rows(category))


def build_study(out_dir: str | Path, entries: list[dict]) -> Path:
    """Write a study directory from prepared pair entries.

    Each entry: {"adjacent": (H, W, 3) uint8, "synthetic": same, "assay",
    "stain", "fov"}.  Images land under content-hash names; pairs.jsonl is
    ordered by (assay, stain, fov).
    """
    if not entries:
        raise InvalidArgumentError("a study needs at least one pair")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    staged = []
    for entry in entries:
        names = {}
        for arm in ("adjacent", "synthetic"):
            img = entry[arm]
            name = image_name(img)
            save_rgb(out_dir / "images" / name, img)
            names[arm] = f"images/{name}"
        staged.append(
            {
                "assay": entry["assay"],
                "stain": entry["stain"],
                "fov": int(entry["fov"]),
                "adjacent": names["adjacent"],
                "synthetic": names["synthetic"],
            }
        )
    staged.sort(key=lambda d: (d["assay"], d["stain"], d["fov"]))
    pairs_path = out_dir / "pairs.jsonl"
    with pairs_path.open("w") as fh:
        for idx, doc in enumerate(staged):
            fh.write(json.dumps({"pair": idx, **doc}, sort_keys=True) + "\n")
    return out_dir
