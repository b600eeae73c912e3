import type {
  AssertionEntry,
  CannedCase,
  SessionView,
  TestEntry,
  TriState,
} from './types.js';
import type { AppState } from './store.js';
import type { WizardScreen } from './flow.js';
import { SCREEN_ORDER, screenForView, visitedScreens } from './flow.js';
import { caseLabel, CASE_DISPLAY } from './cases.js';
import { densityChart } from './density.js';
import { diagnosisMatrixTable, introMatrixTable } from './matrix.js';

export interface Actions {
  begin(token: string | null): void;
  chooseCausality(value: 'XtoY' | 'YtoX' | 'Unknown'): void;
  chooseCase(id: string): void;
  uploadFiles(source: File, target: File): void;
  proceed(): void;
  runTest(name: string): void;
  applySuggested(): void;
  submitAssertion(claim: string, value: TriState, justification: string): void;
  finalize(): void;
  restart(): void;
  look(screen: WizardScreen): void;
  retry(): void;
  dismissNotices(): void;
}

export type Keymap = Record<string, () => void>;

export interface Screen {
  el: HTMLElement;
  keys: Keymap;
}

export interface ViewContext {
  doc: Document;
  state: AppState;
  actions: Actions;
  /** True when looking back at a screen the session has moved past. */
  readonly: boolean;
  tokenNeeded: boolean;
}

// The four canonical claims with the question each one puts to the expert.
export const CLAIM_PROMPTS: [string, string][] = [
  ['prior_changed', 'Did the class proportions change between domains?'],
  [
    'class_conditionals_equal',
    'Within each class, is the feature distribution the same in both domains?',
  ],
  ['concept_stable', 'Is the feature-to-label relationship itself unchanged?'],
  [
    'feature_distribution_changed',
    'Did the overall feature distribution change?',
  ],
];

function h(
  doc: Document,
  tag: string,
  className?: string,
  text?: string,
): HTMLElement {
  const el = doc.createElement(tag);
  if (className) el.className = className;
  if (text !== undefined) el.textContent = text;
  return el;
}

function button(
  doc: Document,
  label: string,
  onClick: () => void,
  className = 'action',
): HTMLButtonElement {
  const b = doc.createElement('button');
  b.type = 'button';
  b.className = className;
  b.textContent = label;
  b.addEventListener('click', onClick);
  return b;
}

function keyHint(doc: Document, key: string): HTMLElement {
  return h(doc, 'kbd', 'key-hint', key);
}

// --- step banner --------------------------------------------------------------

export function stepNav(ctx: ViewContext, current: WizardScreen): HTMLElement {
  const { doc, state, actions } = ctx;
  const live = screenForView(state.view);
  const nav = h(doc, 'nav', 'step-nav');
  const reachable = visitedScreens(live);
  for (const s of SCREEN_ORDER) {
    const b = button(doc, s, () => actions.look(s), 'step-link');
    if (s === current) b.classList.add('current');
    if (s === live) b.classList.add('live');
    b.disabled = !reachable.includes(s);
    nav.appendChild(b);
  }
  return nav;
}

// --- notices and banner ---------------------------------------------------------

export function noticesBlock(ctx: ViewContext): HTMLElement {
  const { doc, state, actions } = ctx;
  const wrap = h(doc, 'div', 'notices');
  for (const n of state.notices) {
    const div = h(doc, 'div', 'notice');
    div.setAttribute('role', 'status');
    div.appendChild(h(doc, 'p', 'notice-text', n.text));
    if (n.allowed && n.allowed.length) {
      div.appendChild(
        h(doc, 'p', 'notice-allowed', `Available here: ${n.allowed.join(', ')}`),
      );
    }
    wrap.appendChild(div);
  }
  if (state.notices.length) {
    wrap.appendChild(
      button(doc, 'Dismiss', () => actions.dismissNotices(), 'dismiss'),
    );
  }
  return wrap;
}

export function blockingBanner(ctx: ViewContext): HTMLElement {
  const { doc, state, actions } = ctx;
  const overlay = h(doc, 'div', 'blocking-banner');
  overlay.id = 'blocking-banner';
  overlay.setAttribute('role', 'alert');
  overlay.appendChild(h(doc, 'h2', undefined, 'Service unreachable'));
  overlay.appendChild(h(doc, 'p', 'blocking-detail', state.blocking ?? ''));
  overlay.appendChild(
    h(
      doc,
      'p',
      undefined,
      'Nothing was changed. Retry once the service is back.',
    ),
  );
  overlay.appendChild(button(doc, 'Retry', () => actions.retry(), 'retry'));
  return overlay;
}

// --- screens -------------------------------------------------------------------

export function renderIntro(ctx: ViewContext): Screen {
  const { doc, actions, tokenNeeded } = ctx;
  const el = h(doc, 'section', 'screen intro');
  el.appendChild(h(doc, 'h1', undefined, 'Domain-shift diagnosis'));
  el.appendChild(
    h(
      doc,
      'p',
      undefined,
      'This wizard walks a deployment problem through the same questions the ' +
        'diagnosis engine asks: first the causal direction of the data, then ' +
        'whatever evidence the data itself can give, then the claims only ' +
        'domain knowledge can settle. The service computes everything; this ' +
        'page only asks and displays.',
    ),
  );
  el.appendChild(
    h(
      doc,
      'p',
      undefined,
      'Five shift scenarios are distinguished by which parts of the joint ' +
        'distribution move. Highlighted cells are definitional: the scenario ' +
        'is the statement that exactly those quantities changed.',
    ),
  );
  const tableWrap = h(doc, 'div', 'table-scroll');
  tableWrap.appendChild(introMatrixTable(doc));
  el.appendChild(tableWrap);

  let tokenInput: HTMLInputElement | null = null;
  if (tokenNeeded) {
    const field = h(doc, 'div', 'token-entry');
    const label = h(doc, 'label', undefined, 'Service token');
    label.setAttribute('for', 'token-input');
    tokenInput = doc.createElement('input');
    tokenInput.type = 'password';
    tokenInput.id = 'token-input';
    tokenInput.autocomplete = 'off';
    field.appendChild(label);
    field.appendChild(tokenInput);
    el.appendChild(field);
  }

  const begin = () => actions.begin(tokenInput ? tokenInput.value : null);
  const row = h(doc, 'div', 'action-row');
  row.appendChild(button(doc, 'Begin diagnosis', begin, 'primary'));
  row.appendChild(keyHint(doc, 'Enter'));
  el.appendChild(row);
  if (tokenInput) {
    tokenInput.addEventListener('keydown', (ev) => {
      if ((ev as KeyboardEvent).key === 'Enter') begin();
    });
  }
  return { el, keys: { Enter: begin } };
}

export function renderCausality(ctx: ViewContext): Screen {
  const { doc, state, actions, readonly } = ctx;
  const el = h(doc, 'section', 'screen causality');
  el.appendChild(h(doc, 'h1', undefined, 'Causal direction'));
  el.appendChild(
    h(
      doc,
      'p',
      undefined,
      'Which way does the data-generating process run? The answer decides ' +
        'which factorization of P(x, y) can stay fixed, and with it which ' +
        'scenarios are on the table at all.',
    ),
  );

  const answered = state.view?.causality ?? null;
  const options: ['XtoY' | 'YtoX' | 'Unknown', string, string][] = [
    [
      'XtoY',
      'X → Y: features cause the label',
      'e.g. a patient’s measurements drive the diagnosis they receive',
    ],
    [
      'YtoX',
      'Y → X: the label causes the features',
      'e.g. an object’s class produces its image; a message being spam produces its wording',
    ],
    [
      'Unknown',
      'Unknown: no defensible direction',
      'diagnosis stops here until causal groundwork settles the direction',
    ],
  ];

  const list = h(doc, 'div', 'option-list');
  const keys: Keymap = {};
  options.forEach(([value, label, example], i) => {
    const card = h(doc, 'div', 'option-card');
    const pick = () => actions.chooseCausality(value);
    const b = button(doc, label, pick, 'option');
    b.disabled = readonly || answered !== null;
    if (answered === value) card.classList.add('chosen');
    card.appendChild(keyHint(doc, String(i + 1)));
    card.appendChild(b);
    card.appendChild(h(doc, 'p', 'option-example', example));
    list.appendChild(card);
    if (!readonly && answered === null) keys[String(i + 1)] = pick;
  });
  el.appendChild(list);
  if (answered !== null) {
    el.appendChild(h(doc, 'p', 'locked-note', `Answered: ${answered}. Answers are final.`));
  } else {
    el.appendChild(
      h(
        doc,
        'p',
        'warn-note',
        'Answers are final for this session. Choosing Unknown ends it with ' +
          'an advisory instead of a scenario.',
      ),
    );
  }
  return { el, keys };
}

export function renderData(ctx: ViewContext): Screen {
  const { doc, state, actions, readonly } = ctx;
  const el = h(doc, 'section', 'screen data');
  el.appendChild(h(doc, 'h1', undefined, 'Data'));

  const ds = state.view?.datasets ?? { source: null, target: null };
  const summary = h(doc, 'div', 'dataset-summary');
  for (const role of ['source', 'target'] as const) {
    const meta = ds[role];
    summary.appendChild(
      h(
        doc,
        'p',
        'dataset-line',
        meta
          ? `${role}: ${meta.n} rows, ${meta.d} features, ` +
            (meta.labeled ? 'labeled' : 'unlabeled')
          : `${role}: not provided`,
      ),
    );
  }
  el.appendChild(summary);

  const keys: Keymap = {};
  if (!readonly) {
    el.appendChild(
      h(
        doc,
        'p',
        undefined,
        'Pick a walk-through case, upload two CSVs (features first, an ' +
          'optional label column last), or continue with no data and rely ' +
          'on expert claims alone.',
      ),
    );
    const cards = h(doc, 'div', 'case-cards');
    state.cases.forEach((c, i) => {
      const card = h(doc, 'div', 'case-card');
      card.setAttribute('data-case', c.id);
      const pick = () => actions.chooseCase(c.id);
      const b = button(doc, caseLabel(c.id), pick, 'option case-pick');
      card.appendChild(keyHint(doc, String(i + 1)));
      card.appendChild(b);
      card.appendChild(h(doc, 'p', 'case-title', c.title));
      card.appendChild(h(doc, 'p', 'case-narrative', c.narrative));
      card.appendChild(
        h(
          doc,
          'p',
          'case-meta',
          (c.has_data ? 'bundles a dataset pair' : 'narrative only') +
            `; suggested answers: ${c.suggested_assertions.length}`,
        ),
      );
      if (CASE_DISPLAY[c.id]?.narrativeOrigin === 'original') {
        card.appendChild(
          h(doc, 'p', 'case-meta origin-note', 'prompt text original to this project'),
        );
      }
      cards.appendChild(card);
      keys[String(i + 1)] = pick;
    });
    el.appendChild(cards);

    const uploadRow = h(doc, 'div', 'upload-row');
    const srcInput = doc.createElement('input');
    srcInput.type = 'file';
    srcInput.id = 'source-file';
    srcInput.setAttribute('aria-label', 'source CSV');
    const tgtInput = doc.createElement('input');
    tgtInput.type = 'file';
    tgtInput.id = 'target-file';
    tgtInput.setAttribute('aria-label', 'target CSV');
    const upload = () => {
      const s = srcInput.files?.[0];
      const t = tgtInput.files?.[0];
      if (s && t) actions.uploadFiles(s, t);
    };
    uploadRow.appendChild(srcInput);
    uploadRow.appendChild(tgtInput);
    uploadRow.appendChild(button(doc, 'Upload both', upload));
    el.appendChild(uploadRow);

    const skipRow = h(doc, 'div', 'action-row');
    skipRow.appendChild(
      button(doc, 'Continue without data', () => actions.proceed()),
    );
    skipRow.appendChild(keyHint(doc, 'n'));
    el.appendChild(skipRow);
    keys['n'] = () => actions.proceed();
  }
  return { el, keys };
}

function testEntryBlock(doc: Document, t: TestEntry): HTMLElement {
  const div = h(doc, 'div', `test-entry test-${t.status}`);
  div.setAttribute('data-test', t.test);
  div.appendChild(h(doc, 'h3', undefined, `${t.test} · ${t.status}`));
  if (t.error) div.appendChild(h(doc, 'p', 'test-error', t.error));
  if (t.result) {
    const dl = h(doc, 'dl', 'test-result');
    for (const [k, v] of Object.entries(t.result)) {
      if (k === 'per_dimension' && Array.isArray(v)) {
        dl.appendChild(h(doc, 'dt', undefined, k));
        dl.appendChild(h(doc, 'dd', undefined, `${v.length} dimension(s)`));
        continue;
      }
      dl.appendChild(h(doc, 'dt', undefined, k));
      dl.appendChild(
        h(
          doc,
          'dd',
          undefined,
          typeof v === 'object' && v !== null ? JSON.stringify(v) : String(v),
        ),
      );
    }
    div.appendChild(dl);
  }
  return div;
}

export function renderEvidence(ctx: ViewContext): Screen {
  const { doc, state, actions, readonly } = ctx;
  const el = h(doc, 'section', 'screen evidence');
  el.appendChild(h(doc, 'h1', undefined, 'Evidence'));

  const view = state.view;
  const haveBoth = Boolean(view?.datasets.source && view?.datasets.target);
  const keys: Keymap = {};

  if (!haveBoth) {
    el.appendChild(
      h(
        doc,
        'p',
        undefined,
        'No dataset pair on this session, so there is nothing to test; the ' +
          'diagnosis will rest on the causal direction and expert claims.',
      ),
    );
  } else if (!readonly) {
    el.appendChild(
      h(
        doc,
        'p',
        undefined,
        'Run whichever tests the data supports. Each verdict is recorded on ' +
          'the session and feeds the final classification.',
      ),
    );
    const tests: [string, string, string][] = [
      ['1', 'feature_shift', 'Per-feature distribution tests'],
      ['2', 'label_shift', 'Label-frequency test (needs labeled target)'],
      ['3', 'mmd', 'Kernel two-sample test (runs in background)'],
      ['4', 'fit_source_model', 'Fit and score a source model (background)'],
    ];
    const row = h(doc, 'div', 'test-buttons');
    for (const [key, name, label] of tests) {
      const run = () => actions.runTest(name);
      row.appendChild(keyHint(doc, key));
      row.appendChild(button(doc, label, run, 'option'));
      keys[key] = run;
    }
    el.appendChild(row);
  }

  const results = h(doc, 'div', 'test-results');
  for (const t of view?.tests ?? []) results.appendChild(testEntryBlock(doc, t));
  el.appendChild(results);

  if (state.density) {
    const charts = h(doc, 'div', 'density-charts');
    charts.appendChild(
      h(doc, 'h2', undefined, 'Density overlays (source vs target)'),
    );
    const shown = state.density.dimensions.slice(0, 6);
    for (const curve of shown) {
      const fig = h(doc, 'figure', 'density-figure');
      fig.appendChild(densityChart(doc, curve));
      fig.appendChild(
        h(doc, 'figcaption', undefined, `dimension ${curve.dimension}`),
      );
      charts.appendChild(fig);
    }
    if (state.density.dimensions.length > shown.length) {
      charts.appendChild(
        h(
          doc,
          'p',
          'density-note',
          `showing ${shown.length} of ${state.density.dimensions.length} dimensions`,
        ),
      );
    }
    el.appendChild(charts);
  }

  if (!readonly) {
    const row = h(doc, 'div', 'action-row');
    row.appendChild(
      button(doc, 'Continue to expert claims', () => actions.proceed(), 'primary'),
    );
    row.appendChild(keyHint(doc, 'Enter'));
    el.appendChild(row);
    keys['Enter'] = () => actions.proceed();
  }
  return { el, keys };
}

function triStateControl(
  doc: Document,
  claim: string,
  onSubmit: (value: TriState, justification: string) => void,
): HTMLElement {
  const wrap = h(doc, 'div', 'tri-state');
  let selected: TriState | null = null; // display defaults to Unknown until explicitly picked
  const valueButtons: HTMLButtonElement[] = [];
  const submit = doc.createElement('button');

  for (const v of ['Yes', 'No', 'Unknown'] as TriState[]) {
    const b = button(
      doc,
      v,
      () => {
        selected = v;
        for (const vb of valueButtons) vb.classList.toggle('picked', vb === b);
        sync();
      },
      'tri-value',
    );
    b.setAttribute('data-value', v);
    valueButtons.push(b);
    wrap.appendChild(b);
  }

  const just = doc.createElement('input');
  just.type = 'text';
  just.placeholder = 'justification (required)';
  just.className = 'justification';
  just.addEventListener('input', () => sync());
  wrap.appendChild(just);

  submit.type = 'button';
  submit.className = 'claim-submit';
  submit.textContent = 'Record claim';
  submit.disabled = true;
  submit.addEventListener('click', () => {
    if (selected !== null && just.value.trim()) onSubmit(selected, just.value);
  });
  wrap.appendChild(submit);
  wrap.setAttribute('data-claim', claim);

  function sync() {
    submit.disabled = selected === null || !just.value.trim();
  }
  return wrap;
}

export function renderAssertions(ctx: ViewContext): Screen {
  const { doc, state, actions, readonly } = ctx;
  const el = h(doc, 'section', 'screen assertions');
  el.appendChild(h(doc, 'h1', undefined, 'Expert claims'));
  el.appendChild(
    h(
      doc,
      'p',
      undefined,
      'These are the questions the data cannot answer by itself. Every claim ' +
        'starts at Unknown; record only what you can justify, and leave the ' +
        'rest alone.',
    ),
  );

  const submitted = new Map<string, AssertionEntry>();
  for (const a of state.view?.assertions ?? []) {
    if (!submitted.has(a.claim)) submitted.set(a.claim, a);
  }

  const keys: Keymap = {};
  const list = h(doc, 'div', 'claim-list');
  for (const [claim, prompt] of CLAIM_PROMPTS) {
    const rowEl = h(doc, 'div', 'claim-row');
    rowEl.appendChild(h(doc, 'h3', undefined, prompt));
    rowEl.appendChild(h(doc, 'p', 'claim-key', claim));
    const prior = submitted.get(claim);
    if (prior) {
      rowEl.appendChild(
        h(
          doc,
          'p',
          'claim-recorded',
          `Recorded: ${prior.value} — ${prior.justification}`,
        ),
      );
    } else if (!readonly) {
      rowEl.appendChild(
        triStateControl(doc, claim, (value, justification) =>
          actions.submitAssertion(claim, value, justification),
        ),
      );
    } else {
      rowEl.appendChild(h(doc, 'p', 'claim-recorded', 'Unknown (never recorded)'));
    }
    list.appendChild(rowEl);
  }
  el.appendChild(list);

  // free-form extra assertions recorded beyond the canonical four
  const extra = (state.view?.assertions ?? []).filter(
    (a) => !CLAIM_PROMPTS.some(([c]) => c === a.claim),
  );
  for (const a of extra) {
    list.appendChild(
      h(doc, 'p', 'claim-recorded', `${a.claim}: ${a.value} — ${a.justification}`),
    );
  }

  if (!readonly) {
    if (state.caseId && state.view && !state.view.assertions.length) {
      const c = state.cases.find((x) => x.id === state.caseId);
      if (c && c.suggested_assertions.length) {
        const row = h(doc, 'div', 'action-row');
        row.appendChild(
          button(
            doc,
            'Apply this case’s suggested answers',
            () => actions.applySuggested(),
            'option',
          ),
        );
        row.appendChild(keyHint(doc, 's'));
        el.appendChild(row);
        keys['s'] = () => actions.applySuggested();
      }
    }
    const row = h(doc, 'div', 'action-row');
    row.appendChild(button(doc, 'Finalize diagnosis', () => actions.finalize(), 'primary'));
    row.appendChild(keyHint(doc, 'Enter'));
    el.appendChild(row);
    keys['Enter'] = () => actions.finalize();
  }
  return { el, keys };
}

export function renderDiagnosis(ctx: ViewContext): Screen {
  const { doc, state, actions } = ctx;
  const el = h(doc, 'section', 'screen diagnosis');
  const view = state.view as SessionView;

  if (view.advisory !== null && view.diagnosis === null) {
    el.appendChild(h(doc, 'h1', undefined, 'No diagnosis'));
    const adv = h(doc, 'div', 'advisory');
    adv.id = 'advisory';
    adv.setAttribute('role', 'alert');
    adv.appendChild(h(doc, 'p', 'advisory-text', view.advisory));
    el.appendChild(adv);
    el.appendChild(
      h(
        doc,
        'p',
        undefined,
        'Without a causal direction no scenario is defined, so no ' +
          'recommendation would be honest. Settle the direction first, then ' +
          'run a fresh session.',
      ),
    );
    const row = h(doc, 'div', 'action-row');
    row.appendChild(button(doc, 'Start a new session', () => actions.restart(), 'primary'));
    row.appendChild(keyHint(doc, 'r'));
    el.appendChild(row);
    return { el, keys: { r: () => actions.restart() } };
  }

  const d = view.diagnosis!;
  el.appendChild(h(doc, 'h1', undefined, 'Diagnosis'));

  const head = h(doc, 'div', 'diagnosis-head');
  const kind = h(doc, 'span', 'scenario-kind', d.scenario.kind);
  kind.id = 'scenario-kind';
  const causality = h(doc, 'span', 'scenario-causality', d.scenario.causality);
  causality.id = 'scenario-causality';
  const conf = h(doc, 'span', 'confidence', d.confidence);
  conf.id = 'confidence';
  head.appendChild(h(doc, 'span', 'head-label', 'Scenario'));
  head.appendChild(kind);
  head.appendChild(h(doc, 'span', 'head-label', 'under'));
  head.appendChild(causality);
  head.appendChild(h(doc, 'span', 'head-label', 'confidence'));
  head.appendChild(conf);
  el.appendChild(head);

  if (view.case && CASE_DISPLAY[view.case]) {
    el.appendChild(h(doc, 'p', 'case-ref', caseLabel(view.case)));
  }

  el.appendChild(h(doc, 'h2', undefined, 'Why'));
  const rationale = h(doc, 'ol', 'rationale');
  for (const r of d.rationale) {
    rationale.appendChild(h(doc, 'li', 'rationale-item', r));
  }
  el.appendChild(rationale);

  el.appendChild(h(doc, 'h2', undefined, 'Recommendation'));
  const rec = h(doc, 'div', 'recommendation');
  const summary = h(doc, 'p', 'recommendation-summary', d.recommendation.summary);
  summary.id = 'recommendation-summary';
  rec.appendChild(summary);
  if (d.recommendation.executable_actions.length) {
    rec.appendChild(
      h(
        doc,
        'p',
        'recommendation-actions',
        `Toolkit entry points: ${d.recommendation.executable_actions.join(', ')}`,
      ),
    );
  }
  for (const c of d.recommendation.caveats) {
    rec.appendChild(h(doc, 'p', 'caveat', c));
  }
  for (const s of d.recommendation.see_also) {
    rec.appendChild(h(doc, 'p', 'see-also', s));
  }
  el.appendChild(rec);

  el.appendChild(h(doc, 'h2', undefined, 'Change profile'));
  const tableWrap = h(doc, 'div', 'table-scroll');
  tableWrap.appendChild(diagnosisMatrixTable(doc, d.shift_matrix));
  el.appendChild(tableWrap);

  el.appendChild(h(doc, 'h2', undefined, 'Session trail'));
  const trail = h(doc, 'ol', 'audit-trail');
  for (const ev of view.audit) {
    trail.appendChild(
      h(
        doc,
        'li',
        'audit-item',
        `${ev.event}: ${ev.step_before} → ${ev.step_after}`,
      ),
    );
  }
  el.appendChild(trail);

  const row = h(doc, 'div', 'action-row');
  row.appendChild(button(doc, 'Start a new session', () => actions.restart()));
  row.appendChild(keyHint(doc, 'r'));
  el.appendChild(row);
  return { el, keys: { r: () => actions.restart() } };
}

export function renderScreen(ctx: ViewContext, screen: WizardScreen): Screen {
  switch (screen) {
    case 'Intro':
      return renderIntro(ctx);
    case 'Causality':
      return renderCausality(ctx);
    case 'Data':
      return renderData(ctx);
    case 'Evidence':
      return renderEvidence(ctx);
    case 'Assertions':
      return renderAssertions(ctx);
    case 'Diagnosis':
      return renderDiagnosis(ctx);
  }
}
