/**
 * Score form validation: each side allocates its stained area across the
 * three intensity categories, and the allocation must total exactly 100
 * before submission unlocks. Raw input strings are validated here (not in
 * the DOM layer) so the rules are testable without a browser.
 */

import type { CategoryScores } from "./api.js";

export const CATEGORIES = ["no_stain", "weak", "strong_moderate"] as const;
export type Category = (typeof CATEGORIES)[number];

export const CATEGORY_LABELS: Record<Category, string> = {
  no_stain: "No stain",
  weak: "Weak",
  strong_moderate: "Strong/Moderate",
};

/** Raw text as typed into the three inputs of one side. */
export type SideForm = Record<Category, string>;

export interface SideCheck {
  ok: boolean;
  /** Sum of parsed values; null while any field is not a valid integer. */
  total: number | null;
  /** Inline message for the reader; empty string when the side is valid. */
  message: string;
}

export function emptySide(): SideForm {
  return { no_stain: "", weak: "", strong_moderate: "" };
}

/** Parse one field: whole number in [0, 100], nothing else. */
export function parseScore(raw: string): number | null {
  const text = raw.trim();
  if (!/^\d+$/.test(text)) return null;
  const value = Number(text);
  return value <= 100 ? value : null;
}

export function checkSide(form: SideForm): SideCheck {
  const parsed: number[] = [];
  for (const cat of CATEGORIES) {
    const value = parseScore(form[cat]);
    if (value === null) {
      return {
        ok: false,
        total: null,
        message: `${CATEGORY_LABELS[cat]} must be a whole number from 0 to 100`,
      };
    }
    parsed.push(value);
  }
  const total = parsed.reduce((a, b) => a + b, 0);
  if (total !== 100) {
    return { ok: false, total, message: `sums to ${total}, needs exactly 100` };
  }
  return { ok: true, total, message: "" };
}

/** Submission unlocks only when both sides individually sum to 100. */
export function canSubmit(left: SideForm, right: SideForm): boolean {
  return checkSide(left).ok && checkSide(right).ok;
}

/** Convert a validated side to the wire format. Callers must gate on
 * checkSide().ok first; this throws on invalid input rather than guessing. */
export function toCategoryScores(form: SideForm): CategoryScores {
  const check = checkSide(form);
  if (!check.ok) {
    throw new Error(`side is not valid: ${check.message}`);
  }
  return {
    no_stain: parseScore(form.no_stain) as number,
    weak: parseScore(form.weak) as number,
    strong_moderate: parseScore(form.strong_moderate) as number,
  };
}
