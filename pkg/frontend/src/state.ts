/**
 * Session state machine for the rating UI.
 *
 * All mutation flows through the service API and the service stays
 * authoritative: nothing here is committed before the server accepts it,
 * so an error response simply leaves the previous state in place. The
 * three navigation actions are next (submit, then load the following
 * item), prev (load the just-rated item with its stored values for
 * revision) and repeat (restart the media, no server call).
 */

import {
  ApiError,
  ItemPayload,
  ProgressPayload,
  ServiceUnreachableError,
  StudyClient,
} from "./api";
import {
  DIMENSIONS,
  Dimension,
  snapToGrid,
  validateScores,
} from "./validation";

export type Viewing = "current" | "previous";
export type Screen = "login" | "rating" | "complete";

export interface SliderState {
  value: number;
  touched: boolean;
}

export interface UiSessionState {
  screen: Screen;
  studyId: string;
  sessionId: string;
  subjectId: string;
  item: ItemPayload | null;
  viewing: Viewing;
  sliders: Record<Dimension, SliderState>;
  completed: number;
  total: number;
  completedToday: number;
  dailyCap: number;
  complete: boolean;
  error: string | null;
  loginError: string | null;
  retryable: boolean;
  busy: boolean;
  replayToken: number;
}

const SLIDER_DEFAULT = 3.0;

function freshSliders(): Record<Dimension, SliderState> {
  const sliders = {} as Record<Dimension, SliderState>;
  for (const dim of DIMENSIONS) {
    sliders[dim] = { value: SLIDER_DEFAULT, touched: false };
  }
  return sliders;
}

function slidersFromScores(scores: Record<Dimension, number>): Record<Dimension, SliderState> {
  const sliders = {} as Record<Dimension, SliderState>;
  for (const dim of DIMENSIONS) {
    sliders[dim] = { value: scores[dim], touched: true };
  }
  return sliders;
}

export type Listener = (state: Readonly<UiSessionState>) => void;

export class RaterController {
  private state: UiSessionState;
  private listeners: Listener[] = [];

  constructor(private readonly client: StudyClient) {
    this.state = {
      screen: "login",
      studyId: "",
      sessionId: "",
      subjectId: "",
      item: null,
      viewing: "current",
      sliders: freshSliders(),
      completed: 0,
      total: 0,
      completedToday: 0,
      dailyCap: 0,
      complete: false,
      error: null,
      loginError: null,
      retryable: false,
      busy: false,
      replayToken: 0,
    };
  }

  getState(): Readonly<UiSessionState> {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  // -- derived gates ---------------------------------------------------

  capReached(): boolean {
    return this.state.screen !== "login" && this.state.completedToday >= this.state.dailyCap;
  }

  allTouched(): boolean {
    return DIMENSIONS.every((dim) => this.state.sliders[dim].touched);
  }

  sliderValues(): Record<Dimension, number> {
    const values = {} as Record<Dimension, number>;
    for (const dim of DIMENSIONS) values[dim] = this.state.sliders[dim].value;
    return values;
  }

  canSubmit(): boolean {
    return (
      this.state.item !== null &&
      this.state.item.item_id !== null &&
      !this.state.busy &&
      this.allTouched() &&
      validateScores(this.sliderValues()) === null &&
      !this.capReached()
    );
  }

  canGoPrevious(): boolean {
    return (
      this.state.screen !== "login" &&
      this.state.viewing === "current" &&
      this.state.completed > 0 &&
      !this.state.busy
    );
  }

  // -- actions -----------------------------------------------------------

  async login(studyId: string, subjectId: string): Promise<void> {
    const name = subjectId.trim();
    if (!name) {
      this.state.loginError = "please enter a username";
      this.state.retryable = false;
      this.notify();
      return;
    }
    try {
      const info = await this.client.createSession(studyId, name);
      const progress = await this.client.getProgress(info.session_id);
      const item = await this.client.getItem(info.session_id, "current");
      this.state = {
        ...this.state,
        screen: item.complete ? "complete" : "rating",
        studyId,
        sessionId: info.session_id,
        subjectId: info.subject_id,
        item: item.complete ? null : item,
        viewing: "current",
        sliders: freshSliders(),
        completed: progress.completed,
        total: progress.total,
        completedToday: progress.completed_today,
        dailyCap: progress.daily_cap,
        complete: progress.complete,
        error: null,
        loginError: null,
        retryable: false,
        replayToken: this.state.replayToken + 1,
      };
    } catch (err) {
      // No session state is mutated on failure; the login screen stays up.
      if (err instanceof ServiceUnreachableError) {
        this.state.loginError = "study service unreachable, please retry";
        this.state.retryable = true;
      } else if (err instanceof ApiError) {
        this.state.loginError = err.detail;
        this.state.retryable = false;
      } else {
        throw err;
      }
    }
    this.notify();
  }

  setSlider(dim: Dimension, raw: number): void {
    if (this.state.screen === "login" || this.state.item === null) return;
    this.state.sliders = {
      ...this.state.sliders,
      [dim]: { value: snapToGrid(raw), touched: true },
    };
    this.state.error = null;
    this.notify();
  }

  /** Submit the viewed item's triple, then show the following item. */
  async next(): Promise<void> {
    if (!this.canSubmit()) return;
    const item = this.state.item!;
    const values = this.sliderValues();
    const reject = validateScores(values);
    if (reject !== null) {
      // Unreachable via the sliders; kept as the last line of defence.
      this.state.error = reject;
      this.notify();
      return;
    }
    this.state.busy = true;
    this.notify();
    try {
      const progress = await this.client.submitRating(this.state.sessionId, {
        item_id: item.item_id!,
        ...values,
      });
      this.applyProgress(progress);
      const following = await this.client.getItem(this.state.sessionId, "current");
      this.state.item = following.complete ? null : following;
      this.state.screen = following.complete ? "complete" : "rating";
      this.state.viewing = "current";
      this.state.sliders = freshSliders();
      this.state.error = null;
      this.state.replayToken += 1;
    } catch (err) {
      await this.handleActionError(err);
    } finally {
      this.state.busy = false;
      this.notify();
    }
  }

  /** Load the just-rated item with its stored scores for revision. */
  async prev(): Promise<void> {
    if (!this.canGoPrevious()) return;
    this.state.busy = true;
    this.notify();
    try {
      const item = await this.client.getItem(this.state.sessionId, "previous");
      this.state.item = item;
      this.state.screen = "rating";
      this.state.viewing = "previous";
      this.state.sliders = slidersFromScores(item.scores!);
      this.state.error = null;
      this.state.replayToken += 1;
    } catch (err) {
      await this.handleActionError(err);
    } finally {
      this.state.busy = false;
      this.notify();
    }
  }

  /** Restart the media for the viewed item. Never talks to the service. */
  repeat(): void {
    if (this.state.item === null) return;
    this.state.replayToken += 1;
    this.notify();
  }

  // -- helpers -----------------------------------------------------------

  private applyProgress(progress: ProgressPayload): void {
    this.state.completed = progress.completed;
    this.state.total = progress.total;
    this.state.completedToday = progress.completed_today;
    this.state.dailyCap = progress.daily_cap;
    this.state.complete = progress.complete;
  }

  private async handleActionError(err: unknown): Promise<void> {
    if (err instanceof ServiceUnreachableError) {
      this.state.error = "study service unreachable, please retry";
      return;
    }
    if (!(err instanceof ApiError)) throw err;
    this.state.error = err.detail;
    if (err.status === 409 || err.status === 429 || err.status === 404) {
      // The client view went stale; pull the authoritative one.
      try {
        const progress = await this.client.getProgress(this.state.sessionId);
        this.applyProgress(progress);
        if (this.state.viewing === "current") {
          const item = await this.client.getItem(this.state.sessionId, "current");
          this.state.item = item.complete ? null : item;
          this.state.screen = item.complete ? "complete" : "rating";
        }
      } catch {
        // Resync is best-effort; the inline error above already shows.
      }
    }
  }
}
