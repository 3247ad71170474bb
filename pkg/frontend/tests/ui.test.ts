// @vitest-environment happy-dom

import { beforeEach, describe, expect, it } from "vitest";

import { StudyClient } from "../src/api";
import { createRaterUi, RaterUi } from "../src/ui";
import { DIMENSIONS, Dimension, formatScore } from "../src/validation";
import { MockStudy, mockFetch } from "./mock-service";

const ITEMS = ["m1", "m2", "m3", "m4", "m5", "m6"];

interface Stack {
  study: MockStudy;
  ui: RaterUi;
  root: HTMLElement;
}

function mount(options: { items?: string[]; dailyCap?: number } = {}): Stack {
  const study = new MockStudy(options.items ?? ITEMS, { dailyCap: options.dailyCap });
  const client = new StudyClient("", mockFetch(study));
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById("app")!;
  const ui = createRaterUi(root, client, { studyId: "toy-study" });
  return { study, ui, root };
}

function q<T extends HTMLElement>(root: HTMLElement, selector: string): T {
  const el = root.querySelector<T>(selector);
  if (!el) throw new Error(`missing ${selector}`);
  return el;
}

async function until(pred: () => boolean, what = "condition"): Promise<void> {
  for (let i = 0; i < 300; i++) {
    if (pred()) return;
    await new Promise((resolve) => setTimeout(resolve, 1));
  }
  throw new Error(`${what} not reached`);
}

async function loginViaForm(stack: Stack, username: string): Promise<void> {
  const input = q<HTMLInputElement>(stack.root, 'input[name="username"]');
  input.value = username;
  q<HTMLFormElement>(stack.root, ".login-form").dispatchEvent(
    new Event("submit", { bubbles: true, cancelable: true }),
  );
  await until(() => stack.ui.controller.getState().screen !== "login", "login");
}

function setSlider(stack: Stack, dim: Dimension, value: number): void {
  const row = q<HTMLElement>(stack.root, `.slider-row[data-dim="${dim}"]`);
  const input = row.querySelector("input")!;
  input.value = String(value);
  input.dispatchEvent(new Event("input", { bubbles: true }));
}

async function rateViaButtons(stack: Stack, triple: Record<Dimension, number>): Promise<void> {
  const before = stack.ui.controller.getState().completedToday;
  for (const dim of DIMENSIONS) setSlider(stack, dim, triple[dim]);
  q<HTMLButtonElement>(stack.root, ".nav-next").click();
  await until(
    () => stack.ui.controller.getState().completedToday === before + 1,
    "rating accepted",
  );
}

describe("login screen", () => {
  it("starts a session from the form and shows the first item", async () => {
    const stack = mount();
    expect(q<HTMLElement>(stack.root, ".login-screen").hidden).toBe(false);
    await loginViaForm(stack, "alice");
    expect(q<HTMLElement>(stack.root, ".rating-screen").hidden).toBe(false);
    expect(q<HTMLElement>(stack.root, ".progress-line").textContent).toContain("Item 1 of 6");
    const video = q<HTMLVideoElement>(stack.root, ".media-video");
    const audio = q<HTMLAudioElement>(stack.root, ".media-audio");
    expect(video.getAttribute("src")).toBe("/media/m1/video");
    expect(audio.getAttribute("src")).toBe("/media/m1/audio");
  });

  it("shows a retry banner when the service is down", async () => {
    const stack = mount();
    stack.study.unreachableOnce = true;
    const input = q<HTMLInputElement>(stack.root, 'input[name="username"]');
    input.value = "alice";
    q<HTMLFormElement>(stack.root, ".login-form").dispatchEvent(
      new Event("submit", { bubbles: true, cancelable: true }),
    );
    await until(() => !q<HTMLElement>(stack.root, ".login-banner").hidden, "banner");
    const banner = q<HTMLElement>(stack.root, ".login-banner");
    expect(banner.textContent).toMatch(/unreachable/);
    expect(banner.classList.contains("retryable")).toBe(true);
    expect(q<HTMLElement>(stack.root, ".login-screen").hidden).toBe(false);
  });
});

describe("sliders", () => {
  it("displays one decimal and marks rows as touched", async () => {
    const stack = mount();
    await loginViaForm(stack, "alice");
    const row = q<HTMLElement>(stack.root, '.slider-row[data-dim="overall"]');
    expect(row.classList.contains("touched")).toBe(false);
    expect(row.querySelector("output")!.textContent).toBe("3.0");

    setSlider(stack, "overall", 4);
    expect(row.querySelector("output")!.textContent).toBe("4.0");
    expect(row.classList.contains("touched")).toBe(true);

    setSlider(stack, "overall", 2.8);
    expect(row.querySelector("output")!.textContent).toBe("2.8");
  });

  it("keeps Next disabled until all three were touched", async () => {
    const stack = mount();
    await loginViaForm(stack, "alice");
    const next = q<HTMLButtonElement>(stack.root, ".nav-next");
    expect(next.disabled).toBe(true);
    setSlider(stack, "audio_quality", 4.0);
    setSlider(stack, "consistency", 3.5);
    expect(next.disabled).toBe(true);
    setSlider(stack, "overall", 4.2);
    expect(next.disabled).toBe(false);
  });

  it("disables Prev before the first rating", async () => {
    const stack = mount();
    await loginViaForm(stack, "alice");
    expect(q<HTMLButtonElement>(stack.root, ".nav-prev").disabled).toBe(true);
  });
});

describe("conformance flow", () => {
  it("login, rate 5 items, revise the previous one, repeat; export matches exactly", async () => {
    const stack = mount();
    await loginViaForm(stack, "alice");

    // distinct on-grid triples per item
    const entered = new Map<string, Record<Dimension, number>>();
    for (let i = 0; i < 5; i++) {
      const itemId = stack.ui.controller.getState().item!.item_id!;
      const triple: Record<Dimension, number> = {
        audio_quality: (11 + i) / 10,
        consistency: (25 + 2 * i) / 10,
        overall: (48 - 3 * i) / 10,
      };
      entered.set(itemId, triple);
      await rateViaButtons(stack, triple);
    }
    expect(stack.ui.controller.getState().completed).toBe(5);
    expect(q<HTMLElement>(stack.root, ".progress-line").textContent).toContain("Item 6 of 6");

    // revise the just-rated fifth item
    q<HTMLButtonElement>(stack.root, ".nav-prev").click();
    await until(() => stack.ui.controller.getState().viewing === "previous", "previous view");
    const revisedId = stack.ui.controller.getState().item!.item_id!;
    const stored = entered.get(revisedId)!;
    for (const dim of DIMENSIONS) {
      const row = q<HTMLElement>(stack.root, `.slider-row[data-dim="${dim}"]`);
      expect(row.querySelector("output")!.textContent).toBe(formatScore(stored[dim]));
    }
    expect(q<HTMLElement>(stack.root, ".viewing-line").hidden).toBe(false);

    setSlider(stack, "overall", 1.5);
    entered.set(revisedId, { ...stored, overall: 1.5 });
    q<HTMLButtonElement>(stack.root, ".nav-next").click();
    await until(() => stack.ui.controller.getState().viewing === "current", "back to current");
    expect(stack.ui.controller.getState().completed).toBe(5);

    // repeat restarts the media without touching the service
    const video = q<HTMLVideoElement>(stack.root, ".media-video");
    const audio = q<HTMLAudioElement>(stack.root, ".media-audio");
    let plays = 0;
    (video as { play: () => Promise<void> }).play = () => {
      plays += 1;
      return Promise.resolve();
    };
    (audio as { play: () => Promise<void> }).play = () => {
      plays += 1;
      return Promise.resolve();
    };
    const callsBefore = stack.study.calls.length;
    const slidersBefore = JSON.stringify(stack.ui.controller.getState().sliders);
    q<HTMLButtonElement>(stack.root, ".nav-repeat").click();
    expect(plays).toBe(2);
    expect(stack.study.calls.length).toBe(callsBefore);
    expect(JSON.stringify(stack.ui.controller.getState().sliders)).toBe(slidersBefore);

    // the export holds exactly the entered values, latest wins
    const rows = stack.study.exportLatest();
    expect(rows).toHaveLength(5);
    for (const row of rows) {
      const want = entered.get(row.item_id)!;
      expect(row.subject_id).toBe("alice");
      expect(row.audio_quality).toBe(want.audio_quality);
      expect(row.consistency).toBe(want.consistency);
      expect(row.overall).toBe(want.overall);
    }
  });

  it("finishing every item shows the complete screen", async () => {
    const stack = mount({ items: ["m1", "m2"] });
    await loginViaForm(stack, "alice");
    await rateViaButtons(stack, { audio_quality: 3.0, consistency: 3.0, overall: 3.0 });
    await rateViaButtons(stack, { audio_quality: 4.0, consistency: 4.0, overall: 4.0 });
    await until(() => stack.ui.controller.getState().screen === "complete", "complete");
    expect(q<HTMLElement>(stack.root, ".complete-screen").hidden).toBe(false);
    expect(q<HTMLElement>(stack.root, ".rating-screen").hidden).toBe(true);
    expect(q<HTMLButtonElement>(stack.root, ".complete-prev").disabled).toBe(false);
  });

  it("a refreshed page resumes exactly at the server cursor", async () => {
    const stack = mount();
    await loginViaForm(stack, "alice");
    await rateViaButtons(stack, { audio_quality: 2.0, consistency: 2.5, overall: 3.5 });
    await rateViaButtons(stack, { audio_quality: 4.5, consistency: 4.0, overall: 4.4 });

    // same backing service, fresh DOM: nothing rated is lost
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app")!;
    const reborn = createRaterUi(root, new StudyClient("", mockFetch(stack.study)), {
      studyId: "toy-study",
    });
    await reborn.controller.login("toy-study", "alice");
    expect(reborn.controller.getState().completed).toBe(2);
    expect(reborn.controller.getState().item?.item_id).toBe("m3");
    expect(stack.study.exportLatest()).toHaveLength(2);
  });
});

describe("service errors in the UI", () => {
  it("renders a rejected submission inline and keeps the item", async () => {
    const stack = mount();
    await loginViaForm(stack, "alice");
    for (const dim of DIMENSIONS) setSlider(stack, dim, 4.0);
    stack.study.failNext = { status: 422, detail: "consistency must be in [1, 5] with 0.1 steps" };
    q<HTMLButtonElement>(stack.root, ".nav-next").click();
    await until(() => !q<HTMLElement>(stack.root, ".error-banner").hidden, "error banner");
    expect(q<HTMLElement>(stack.root, ".error-banner").textContent).toMatch(/consistency/);
    expect(stack.ui.controller.getState().item?.item_id).toBe("m1");
    expect(stack.ui.controller.getState().completed).toBe(0);
  });

  it("shows the cap banner and disables Next once the daily cap is hit", async () => {
    const stack = mount({ dailyCap: 2 });
    await loginViaForm(stack, "alice");
    await rateViaButtons(stack, { audio_quality: 3.0, consistency: 3.0, overall: 3.0 });
    await rateViaButtons(stack, { audio_quality: 3.5, consistency: 3.5, overall: 3.5 });

    const capLine = q<HTMLElement>(stack.root, ".cap-line");
    expect(capLine.hidden).toBe(false);
    expect(capLine.textContent).toMatch(/cap of 2/);
    for (const dim of DIMENSIONS) setSlider(stack, dim, 4.0);
    expect(q<HTMLButtonElement>(stack.root, ".nav-next").disabled).toBe(true);
  });
});
