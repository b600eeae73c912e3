import { ApiClient, ApiError, fetchBootstrap, Unreachable } from './api.js';
import type { Bootstrap, SessionView, TriState } from './types.js';
import { Store } from './store.js';
import { screenForView, SCREEN_ORDER, visitedScreens } from './flow.js';
import type { WizardScreen } from './flow.js';
import type { Actions, Screen } from './views.js';
import { blockingBanner, noticesBlock, renderScreen, stepNav } from './views.js';

const KEY_TOKEN = 'shiftscope.token';
const KEY_SESSION = 'shiftscope.session';
const KEY_CASE = 'shiftscope.case';

const POLL_INTERVAL_MS = 250;
const POLL_LIMIT = 600; // 2.5 minutes of background-test patience

interface StorageLike {
  getItem(k: string): string | null;
  setItem(k: string, v: string): void;
  removeItem(k: string): void;
}

export interface AppOptions {
  root: HTMLElement;
  doc: Document;
  /** Origin of the service; '' when the page is served by it. */
  base?: string;
  storage: StorageLike;
  sleep?: (ms: number) => Promise<void>;
}

export class App implements Actions {
  readonly store = new Store();
  private root: HTMLElement;
  private doc: Document;
  private base: string;
  private storage: StorageLike;
  private sleep: (ms: number) => Promise<void>;
  private bootstrap: Bootstrap | null = null;
  private client: ApiClient | null = null;
  private sessionId: string | null = null;
  private chain: Promise<void> = Promise.resolve();
  private currentKeys: Record<string, () => void> = {};

  constructor(opts: AppOptions) {
    this.root = opts.root;
    this.doc = opts.doc;
    this.base = opts.base ?? '';
    this.storage = opts.storage;
    this.sleep = opts.sleep ?? ((ms) => new Promise((r) => setTimeout(r, ms)));
    this.store.subscribe(() => this.render());
    this.doc.addEventListener('keydown', (ev) => this.onKey(ev as KeyboardEvent));
  }

  /** Settles when every queued service interaction has landed. */
  idle(): Promise<void> {
    return this.chain;
  }

  private enqueue(op: () => Promise<void>): void {
    this.chain = this.chain.then(async () => {
      this.store.set({ busy: true });
      try {
        await op();
      } catch (err) {
        this.handleError(err);
      } finally {
        this.store.set({ busy: false });
      }
    });
  }

  private handleError(err: unknown): void {
    if (err instanceof Unreachable) {
      this.store.set({ blocking: err.message });
      return;
    }
    if (err instanceof ApiError) {
      if (err.status === 401) {
        this.storage.removeItem(KEY_TOKEN);
        this.client = null;
        this.store.pushNotice({
          text: 'The service rejected the token; enter it again.',
        });
        this.store.set({ view: null, screen: 'Intro' });
        this.render();
        return;
      }
      if (err.status === 409) {
        this.store.pushNotice({
          text: `The service declined that: ${err.detail}`,
          allowed: err.allowed,
        });
        // resync; the session may have moved under us
        this.enqueue(() => this.refreshView());
        return;
      }
      this.store.pushNotice({ text: err.detail });
      return;
    }
    this.store.pushNotice({ text: String(err) });
  }

  // --- boot and sync ---------------------------------------------------------

  start(): Promise<void> {
    this.enqueue(() => this.boot());
    return this.idle();
  }

  private async boot(): Promise<void> {
    this.bootstrap = await fetchBootstrap(this.base);
    this.store.set({ blocking: null });
    const token = this.storage.getItem(KEY_TOKEN);
    if (!token && this.bootstrap.token_required) {
      this.store.set({ screen: 'Intro' });
      return;
    }
    this.makeClient(token ?? '');
    await this.syncAfterAuth();
  }

  private makeClient(token: string): void {
    this.client = new ApiClient(this.base, this.bootstrap?.api_base ?? '/api/v1', token);
  }

  private async syncAfterAuth(): Promise<void> {
    const client = this.client!;
    const cases = await client.listCases();
    this.store.set({ cases, caseId: this.storage.getItem(KEY_CASE) });
    const sid = this.storage.getItem(KEY_SESSION);
    if (sid) {
      try {
        const view = await client.getSession(sid);
        this.sessionId = sid;
        this.store.set({ view, screen: screenForView(view) });
        await this.maybeFetchDensity(view);
        return;
      } catch (err) {
        if (err instanceof ApiError && err.status === 404) {
          this.storage.removeItem(KEY_SESSION);
        } else {
          throw err;
        }
      }
    }
    this.store.set({ view: null, screen: 'Intro' });
  }

  /** Pull the authoritative view and land on its live screen. */
  private async refreshView(): Promise<void> {
    if (!this.client || !this.sessionId) return;
    const view = await this.client.getSession(this.sessionId);
    this.store.set({ view, screen: screenForView(view) });
    await this.maybeFetchDensity(view);
  }

  private async maybeFetchDensity(view: SessionView): Promise<void> {
    if (this.store.get().density) return;
    if (!(view.datasets.source && view.datasets.target)) return;
    try {
      const density = await this.client!.getDensity(view.session_id);
      this.store.set({ density });
    } catch (err) {
      if (!(err instanceof ApiError)) throw err;
      // a 409 just means the pair is not ready; charts stay off
    }
  }

  // --- user actions ------------------------------------------------------------

  begin(token: string | null): void {
    this.enqueue(async () => {
      if (!this.bootstrap) {
        this.bootstrap = await fetchBootstrap(this.base);
      }
      if (token && token.trim()) {
        this.storage.setItem(KEY_TOKEN, token.trim());
      }
      const stored = this.storage.getItem(KEY_TOKEN);
      if (this.bootstrap.token_required && !stored) {
        this.store.pushNotice({ text: 'A service token is required to begin.' });
        return;
      }
      if (!this.client) this.makeClient(stored ?? '');
      const client = this.client!;
      if (!this.store.get().cases.length) {
        this.store.set({ cases: await client.listCases() });
      }
      const { session_id } = await client.createSession();
      this.sessionId = session_id;
      this.storage.setItem(KEY_SESSION, session_id);
      this.storage.removeItem(KEY_CASE);
      this.store.set({ caseId: null, density: null, notices: [] });
      await this.refreshView();
    });
  }

  chooseCausality(value: 'XtoY' | 'YtoX' | 'Unknown'): void {
    this.enqueue(async () => {
      await this.client!.answer(this.sessionId!, 'causality', value);
      await this.refreshView();
    });
  }

  chooseCase(id: string): void {
    this.enqueue(async () => {
      const c = this.store.get().cases.find((x) => x.id === id);
      if (!c) return;
      this.storage.setItem(KEY_CASE, id);
      this.store.set({ caseId: id });
      if (c.has_data) {
        await this.client!.uploadCaseDataset(this.sessionId!, 'source', id);
        await this.client!.uploadCaseDataset(this.sessionId!, 'target', id);
      } else {
        await this.client!.answer(this.sessionId!, 'proceed');
      }
      await this.refreshView();
    });
  }

  uploadFiles(source: File, target: File): void {
    this.enqueue(async () => {
      await this.client!.uploadFileDataset(this.sessionId!, 'source', source);
      await this.client!.uploadFileDataset(this.sessionId!, 'target', target);
      await this.refreshView();
    });
  }

  proceed(): void {
    this.enqueue(async () => {
      await this.client!.answer(this.sessionId!, 'proceed');
      await this.refreshView();
    });
  }

  runTest(name: string): void {
    this.enqueue(async () => {
      const res = await this.client!.runTest(this.sessionId!, name);
      await this.refreshView();
      if (res.status !== 'running') return;
      for (let i = 0; i < POLL_LIMIT; i++) {
        await this.sleep(POLL_INTERVAL_MS);
        const view = await this.client!.getSession(this.sessionId!);
        this.store.set({ view });
        const entry = view.tests.find((t) => t.test === name);
        if (!entry || entry.status !== 'running') return;
      }
      this.store.pushNotice({
        text: `Gave up waiting on ${name}; it may still land — refresh the evidence step.`,
      });
    });
  }

  applySuggested(): void {
    this.enqueue(async () => {
      const { caseId, cases } = this.store.get();
      const c = cases.find((x) => x.id === caseId);
      if (!c) return;
      for (const a of c.suggested_assertions) {
        await this.client!.assert(
          this.sessionId!,
          a.claim,
          a.value,
          a.justification,
        );
      }
      await this.refreshView();
    });
  }

  submitAssertion(claim: string, value: TriState, justification: string): void {
    this.enqueue(async () => {
      await this.client!.assert(this.sessionId!, claim, value, justification);
      await this.refreshView();
    });
  }

  finalize(): void {
    this.enqueue(async () => {
      await this.client!.answer(this.sessionId!, 'finalize');
      await this.refreshView();
    });
  }

  restart(): void {
    this.storage.removeItem(KEY_SESSION);
    this.storage.removeItem(KEY_CASE);
    this.sessionId = null;
    this.store.set({
      view: null,
      screen: 'Intro',
      caseId: null,
      density: null,
      notices: [],
    });
  }

  look(screen: WizardScreen): void {
    const live = screenForView(this.store.get().view);
    if (visitedScreens(live).includes(screen)) {
      this.store.set({ screen });
    }
  }

  retry(): void {
    this.store.set({ blocking: null });
    this.enqueue(() => this.boot());
  }

  dismissNotices(): void {
    this.store.clearNotices();
  }

  // --- keyboard ------------------------------------------------------------------

  private onKey(ev: KeyboardEvent): void {
    const state = this.store.get();
    if (state.blocking !== null) {
      if (ev.key === 'Enter' || ev.key === 'r') {
        ev.preventDefault();
        this.retry();
      }
      return;
    }
    const target = ev.target as HTMLElement | null;
    const tag = target?.tagName?.toLowerCase() ?? '';
    if (tag === 'input' || tag === 'textarea' || tag === 'select') return;
    if (ev.key === 'Enter' && tag === 'button') return; // native activation
    if (state.busy) return;

    if (ev.key === 'ArrowLeft' || ev.key === 'ArrowRight') {
      const live = screenForView(state.view);
      const reachable = visitedScreens(live);
      const idx = reachable.indexOf(state.screen);
      const next = ev.key === 'ArrowLeft' ? idx - 1 : idx + 1;
      const dest = reachable[next];
      if (dest) this.look(dest);
      ev.preventDefault();
      return;
    }
    if (ev.key === 'Escape') {
      this.dismissNotices();
      return;
    }
    const handler = this.currentKeys[ev.key];
    if (handler) {
      ev.preventDefault();
      handler();
    }
  }

  // --- rendering -------------------------------------------------------------------

  private render(): void {
    const state = this.store.get();
    const live = screenForView(state.view);
    const current = visitedScreens(live).includes(state.screen)
      ? state.screen
      : live;
    const ctx = {
      doc: this.doc,
      state,
      actions: this as Actions,
      readonly: current !== live,
      tokenNeeded: Boolean(
        this.bootstrap?.token_required && !this.storage.getItem(KEY_TOKEN),
      ),
    };
    let screen: Screen;
    try {
      screen = renderScreen(ctx, current);
    } catch (err) {
      screen = { el: this.doc.createElement('section'), keys: {} };
      screen.el.textContent = `render failure: ${String(err)}`;
    }
    this.currentKeys = state.busy ? {} : screen.keys;

    this.root.textContent = '';
    if (state.blocking !== null) {
      this.root.appendChild(blockingBanner(ctx));
      this.currentKeys = {};
      return;
    }
    this.root.appendChild(stepNav(ctx, current));
    this.root.appendChild(noticesBlock(ctx));
    if (state.busy) {
      const busy = this.doc.createElement('p');
      busy.className = 'busy-line';
      busy.setAttribute('aria-live', 'polite');
      busy.textContent = 'waiting on the service…';
      this.root.appendChild(busy);
    }
    this.root.appendChild(screen.el);
  }
}

export function createApp(opts: AppOptions): App {
  return new App(opts);
}
