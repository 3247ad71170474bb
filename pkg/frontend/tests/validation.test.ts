import { describe, expect, it } from "vitest";

import { ApiError, StudyClient } from "../src/api";
import {
  formatScore,
  scoreOnGrid,
  snapToGrid,
  validateScores,
} from "../src/validation";
import { fuzzValue, mulberry32 } from "./helpers";
import { MockStudy, mockFetch, serverAcceptsScore } from "./mock-service";

describe("scoreOnGrid", () => {
  it.each([1, 5, 3.0, 1.1, 4.9, 2.5, 13 / 10, 3])("accepts %s", (v) => {
    expect(scoreOnGrid(v)).toBe(true);
  });

  it.each([0.9, 5.1, 3.05, 0, 6, -1, 1e300])("rejects out-of-range or off-grid %s", (v) => {
    expect(scoreOnGrid(v)).toBe(false);
  });

  it.each([Number.NaN, Infinity, -Infinity])("rejects non-finite %s", (v) => {
    expect(scoreOnGrid(v)).toBe(false);
  });

  it.each(["3.5", null, undefined, true, false, [3.5], { v: 3.5 }])(
    "rejects non-number %j",
    (v) => {
      expect(scoreOnGrid(v)).toBe(false);
    },
  );

  it("treats float noise within 1e-7 of a tenth as on the grid", () => {
    expect(scoreOnGrid(3.0 + 1e-9)).toBe(true);
    expect(scoreOnGrid(3.0 + 1e-5)).toBe(false);
  });
});

describe("snapToGrid", () => {
  it("rounds onto tenths and clamps into [1, 5]", () => {
    expect(snapToGrid(3.14)).toBe(3.1);
    expect(snapToGrid(3.16)).toBe(3.2);
    expect(snapToGrid(-2)).toBe(1.0);
    expect(snapToGrid(100)).toBe(5.0);
    expect(snapToGrid(Number.NaN)).toBe(3.0);
  });

  it("always produces a value the service accepts", () => {
    const rng = mulberry32(7);
    for (let i = 0; i < 2000; i++) {
      const snapped = snapToGrid(-5 + rng() * 15);
      expect(scoreOnGrid(snapped)).toBe(true);
      expect(serverAcceptsScore(snapped)).toBe(true);
    }
  });
});

describe("formatScore", () => {
  it("shows one decimal", () => {
    expect(formatScore(4)).toBe("4.0");
    expect(formatScore(3.5)).toBe("3.5");
  });
});

describe("validateScores", () => {
  const good = { audio_quality: 4.0, consistency: 3.5, overall: 4.2 };

  it("accepts a full on-grid triple", () => {
    expect(validateScores(good)).toBeNull();
  });

  it("rejects non-mappings", () => {
    expect(validateScores(null)).toMatch(/mapping/);
    expect(validateScores([1, 2, 3])).toMatch(/mapping/);
    expect(validateScores("scores")).toMatch(/mapping/);
  });

  it("rejects extra and missing keys", () => {
    expect(validateScores({ ...good, mood: 3.0 })).toMatch(/unexpected score keys: mood/);
    const { overall, ...partial } = good;
    void overall;
    expect(validateScores(partial)).toMatch(/missing score for overall/);
  });

  it("names the offending dimension", () => {
    expect(validateScores({ ...good, consistency: 5.05 })).toMatch(/consistency/);
  });
});

describe("client vs service verdicts", () => {
  it("rejects every value the service rejects on a 10,000-case fuzz", () => {
    const rng = mulberry32(20240817);
    let accepted = 0;
    let rejected = 0;
    for (let i = 0; i < 10000; i++) {
      const value = fuzzValue(rng);
      const client = scoreOnGrid(value);
      const server = serverAcceptsScore(value);
      if (client) {
        expect(server, `client accepted ${String(value)} but the service rejects it`).toBe(true);
      }
      if (typeof value === "number") {
        expect(client, `verdicts differ on number ${value}`).toBe(server);
      }
      if (server) accepted += 1;
      else rejected += 1;
    }
    // the generator must genuinely exercise both sides
    expect(accepted).toBeGreaterThan(1000);
    expect(rejected).toBeGreaterThan(1000);
  });

  it("holds across the wire against the mock service", async () => {
    const study = new MockStudy(["w1", "w2"], { dailyCap: 100000 });
    const client = new StudyClient("", mockFetch(study));
    const info = await client.createSession("toy-study", "fuzzer");
    await client.submitRating(info.session_id, {
      item_id: "w1",
      audio_quality: 3.0,
      consistency: 3.0,
      overall: 3.0,
    });

    const rng = mulberry32(99);
    for (let i = 0; i < 600; i++) {
      const value = fuzzValue(rng);
      const clientAccepts = scoreOnGrid(value);
      let status = 200;
      try {
        await client.submitRating(info.session_id, {
          item_id: "w1",
          audio_quality: value,
          consistency: 3.0,
          overall: 3.0,
        } as never);
      } catch (err) {
        if (!(err instanceof ApiError)) throw err;
        status = err.status;
      }
      if (clientAccepts) {
        expect(status, `client accepted ${String(value)} but wire returned ${status}`).toBe(200);
      }
      if (typeof value === "number" && Number.isFinite(value)) {
        // finite numbers survive JSON exactly, so verdicts must coincide
        expect(clientAccepts).toBe(status === 200);
      }
    }
  });
});
