import { describe, expect, it } from "vitest";

import {
  canSubmit,
  checkSide,
  emptySide,
  parseScore,
  toCategoryScores,
  type SideForm,
} from "../src/validation.js";

function side(no_stain: string, weak: string, strong: string): SideForm {
  return { no_stain, weak, strong_moderate: strong };
}

describe("parseScore", () => {
  it("accepts whole numbers from 0 to 100", () => {
    expect(parseScore("0")).toBe(0);
    expect(parseScore("37")).toBe(37);
    expect(parseScore("100")).toBe(100);
    expect(parseScore(" 42 ")).toBe(42);
  });

  it("rejects everything else", () => {
    for (const raw of ["", " ", "-1", "101", "3.5", "1e2", "ten", "10%", "+5"]) {
      expect(parseScore(raw), `parseScore(${JSON.stringify(raw)})`).toBeNull();
    }
  });
});

describe("checkSide", () => {
  it("passes a side that sums to exactly 100", () => {
    const check = checkSide(side("60", "30", "10"));
    expect(check.ok).toBe(true);
    expect(check.total).toBe(100);
    expect(check.message).toBe("");
  });

  it("names the first invalid field", () => {
    const check = checkSide(side("60", "x", "10"));
    expect(check.ok).toBe(false);
    expect(check.total).toBeNull();
    expect(check.message).toBe("Weak must be a whole number from 0 to 100");
  });

  it("reports the off-by-one sum", () => {
    const check = checkSide(side("60", "30", "9"));
    expect(check.ok).toBe(false);
    expect(check.total).toBe(99);
    expect(check.message).toBe("sums to 99, needs exactly 100");
  });

  it("rejects an over-allocated side", () => {
    const check = checkSide(side("100", "30", "10"));
    expect(check.ok).toBe(false);
    expect(check.total).toBe(140);
    expect(check.message).toBe("sums to 140, needs exactly 100");
  });

  it("treats the empty form as incomplete, not as zero", () => {
    expect(checkSide(emptySide()).ok).toBe(false);
  });
});

describe("canSubmit", () => {
  const valid = side("50", "30", "20");

  it("unlocks only when both sides sum to 100", () => {
    expect(canSubmit(valid, side("10", "20", "70"))).toBe(true);
  });

  it("stays locked while either side is off", () => {
    expect(canSubmit(valid, side("10", "20", "69"))).toBe(false);
    expect(canSubmit(side("10", "20", "69"), valid)).toBe(false);
    expect(canSubmit(valid, emptySide())).toBe(false);
  });
});

describe("toCategoryScores", () => {
  it("converts a valid side to integers", () => {
    expect(toCategoryScores(side("50", "30", "20"))).toEqual({
      no_stain: 50,
      weak: 30,
      strong_moderate: 20,
    });
  });

  it("throws instead of guessing on invalid input", () => {
    expect(() => toCategoryScores(side("50", "30", "21"))).toThrow(
      /sums to 101/,
    );
  });
});
