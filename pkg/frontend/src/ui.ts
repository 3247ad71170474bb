/**
 * DOM wiring for the rating screens.
 *
 * The skeleton is built once; renders only update text, visibility and
 * control state so the media elements survive across state changes. Video
 * and audio are separate elements started in the same tick (the item's
 * audio track ships as its own file).
 */

import { StudyClient } from "./api";
import { RaterController, UiSessionState } from "./state";
import {
  DIMENSIONS,
  DIMENSION_LABELS,
  Dimension,
  SCORE_MAX,
  SCORE_MIN,
  SCORE_STEP,
  formatScore,
} from "./validation";

export interface RaterUiOptions {
  studyId: string;
}

export interface RaterUi {
  controller: RaterController;
  root: HTMLElement;
}

function sliderRowHtml(dim: Dimension): string {
  return `
    <div class="slider-row" data-dim="${dim}">
      <span class="slider-label">${DIMENSION_LABELS[dim]}</span>
      <input type="range" min="${SCORE_MIN}" max="${SCORE_MAX}" step="${SCORE_STEP}" value="3">
      <output class="slider-value">3.0</output>
    </div>`;
}

const SKELETON = `
  <div class="rater">
    <section class="login-screen">
      <h1>Rating study</h1>
      <form class="login-form">
        <label>Username
          <input name="username" autocomplete="off" spellcheck="false">
        </label>
        <button type="submit" class="login-start">Start</button>
      </form>
      <div class="login-banner" hidden></div>
    </section>
    <section class="rating-screen" hidden>
      <div class="progress-line"></div>
      <div class="cap-line" hidden></div>
      <div class="viewing-line" hidden>Revising your previous rating</div>
      <div class="media">
        <video class="media-video" playsinline controls></video>
        <audio class="media-audio" controls></audio>
      </div>
      <div class="sliders">${DIMENSIONS.map(sliderRowHtml).join("")}</div>
      <div class="error-banner" hidden></div>
      <div class="nav">
        <button type="button" class="nav-prev">Prev</button>
        <button type="button" class="nav-repeat">Repeat</button>
        <button type="button" class="nav-next">Next</button>
      </div>
    </section>
    <section class="complete-screen" hidden>
      <h1>All done</h1>
      <p>Every item is rated. Thank you! You can still revise your last rating.</p>
      <button type="button" class="complete-prev">Revise last item</button>
    </section>
  </div>`;

export function createRaterUi(
  root: HTMLElement,
  client: StudyClient,
  options: RaterUiOptions,
): RaterUi {
  const controller = new RaterController(client);
  root.innerHTML = SKELETON;

  const q = <T extends HTMLElement>(selector: string): T => {
    const el = root.querySelector<T>(selector);
    if (!el) throw new Error(`ui skeleton is missing ${selector}`);
    return el;
  };

  const loginScreen = q<HTMLElement>(".login-screen");
  const loginForm = q<HTMLFormElement>(".login-form");
  const loginInput = q<HTMLInputElement>('input[name="username"]');
  const loginBanner = q<HTMLElement>(".login-banner");
  const ratingScreen = q<HTMLElement>(".rating-screen");
  const progressLine = q<HTMLElement>(".progress-line");
  const capLine = q<HTMLElement>(".cap-line");
  const viewingLine = q<HTMLElement>(".viewing-line");
  const video = q<HTMLVideoElement>(".media-video");
  const audio = q<HTMLAudioElement>(".media-audio");
  const errorBanner = q<HTMLElement>(".error-banner");
  const prevButton = q<HTMLButtonElement>(".nav-prev");
  const repeatButton = q<HTMLButtonElement>(".nav-repeat");
  const nextButton = q<HTMLButtonElement>(".nav-next");
  const completeScreen = q<HTMLElement>(".complete-screen");
  const completePrev = q<HTMLButtonElement>(".complete-prev");

  const sliderInputs = {} as Record<Dimension, HTMLInputElement>;
  const sliderOutputs = {} as Record<Dimension, HTMLOutputElement>;
  const sliderRows = {} as Record<Dimension, HTMLElement>;
  for (const dim of DIMENSIONS) {
    const row = q<HTMLElement>(`.slider-row[data-dim="${dim}"]`);
    sliderRows[dim] = row;
    sliderInputs[dim] = row.querySelector("input")!;
    sliderOutputs[dim] = row.querySelector("output")!;
  }

  loginForm.addEventListener("submit", (event) => {
    event.preventDefault();
    void controller.login(options.studyId, loginInput.value);
  });
  for (const dim of DIMENSIONS) {
    sliderInputs[dim].addEventListener("input", () => {
      controller.setSlider(dim, Number(sliderInputs[dim].value));
    });
  }
  prevButton.addEventListener("click", () => void controller.prev());
  completePrev.addEventListener("click", () => void controller.prev());
  repeatButton.addEventListener("click", () => controller.repeat());
  nextButton.addEventListener("click", () => void controller.next());

  let shownItemId: string | null = null;
  let playedToken = 0;

  function restartPlayback(): void {
    for (const el of [video, audio] as const) {
      try {
        el.currentTime = 0;
      } catch {
        // media element may not be seekable yet
      }
    }
    // Kick both off in the same tick so they share a start time.
    for (const el of [video, audio] as const) {
      try {
        const p = el.play?.();
        void p?.catch?.(() => undefined);
      } catch {
        // autoplay or test stubs may refuse; the controls stay usable
      }
    }
  }

  function syncMedia(state: Readonly<UiSessionState>): void {
    const item = state.item;
    if (item === null || item.item_id === null) {
      shownItemId = null;
      return;
    }
    if (item.item_id !== shownItemId) {
      shownItemId = item.item_id;
      video.src = client.baseUrl + (item.video_url ?? "");
      audio.src = client.baseUrl + (item.audio_url ?? "");
    }
    if (state.replayToken !== playedToken) {
      playedToken = state.replayToken;
      restartPlayback();
    }
  }

  function render(state: Readonly<UiSessionState>): void {
    loginScreen.hidden = state.screen !== "login";
    ratingScreen.hidden = state.screen !== "rating";
    completeScreen.hidden = state.screen !== "complete";

    loginBanner.hidden = state.loginError === null;
    loginBanner.textContent = state.loginError ?? "";
    loginBanner.classList.toggle("retryable", state.retryable);

    if (state.screen === "rating" && state.item !== null) {
      const pos = state.item.position ?? 0;
      progressLine.textContent =
        `Item ${pos} of ${state.total}` +
        ` | ${state.completed} rated | today ${state.completedToday}/${state.dailyCap}`;
      viewingLine.hidden = state.viewing !== "previous";
      syncMedia(state);
    }

    const capped = controller.capReached();
    capLine.hidden = !capped;
    if (capped) {
      capLine.textContent =
        `Daily cap of ${state.dailyCap} ratings reached. Please continue tomorrow.`;
    }

    for (const dim of DIMENSIONS) {
      const slider = state.sliders[dim];
      sliderInputs[dim].value = String(slider.value);
      sliderOutputs[dim].textContent = formatScore(slider.value);
      sliderRows[dim].classList.toggle("touched", slider.touched);
    }

    errorBanner.hidden = state.error === null;
    errorBanner.textContent = state.error ?? "";

    prevButton.disabled = !controller.canGoPrevious();
    repeatButton.disabled = state.item === null || state.busy;
    nextButton.disabled = !controller.canSubmit();
    completePrev.disabled = !controller.canGoPrevious();
  }

  controller.subscribe(render);
  render(controller.getState());

  return { controller, root };
}
