import type { CannedCase, DensityPayload, SessionView } from './types.js';
import type { WizardScreen } from './flow.js';

export interface Notice {
  text: string;
  allowed?: string[];
}

export interface AppState {
  view: SessionView | null;
  /** Screen being looked at; may trail the session's own step (read-only
   *  back-navigation) but never leads it. */
  screen: WizardScreen;
  cases: CannedCase[];
  /** Walk-through case chosen on the Data screen, if any. */
  caseId: string | null;
  density: DensityPayload | null;
  /** Blocking failure (service unreachable). Cleared by a successful retry. */
  blocking: string | null;
  /** Non-blocking notices, newest last (409s, validation rejections). */
  notices: Notice[];
  busy: boolean;
}

type Listener = (s: AppState) => void;

export class Store {
  private state: AppState;
  private listeners: Listener[] = [];

  constructor() {
    this.state = {
      view: null,
      screen: 'Intro',
      cases: [],
      caseId: null,
      density: null,
      blocking: null,
      notices: [],
      busy: false,
    };
  }

  get(): AppState {
    return this.state;
  }

  set(patch: Partial<AppState>): void {
    this.state = { ...this.state, ...patch };
    for (const fn of this.listeners) fn(this.state);
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((f) => f !== fn);
    };
  }

  pushNotice(n: Notice): void {
    this.set({ notices: [...this.state.notices, n] });
  }

  clearNotices(): void {
    if (this.state.notices.length) this.set({ notices: [] });
  }
}
