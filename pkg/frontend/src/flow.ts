import type { CannedCase, SessionStep, SessionView } from './types.js';

/** The six screens, in order. All but Intro map 1:1 onto a session step. */
export type WizardScreen =
  | 'Intro'
  | 'Causality'
  | 'Data'
  | 'Evidence'
  | 'Assertions'
  | 'Diagnosis';

export const SCREEN_ORDER: WizardScreen[] = [
  'Intro',
  'Causality',
  'Data',
  'Evidence',
  'Assertions',
  'Diagnosis',
];

const STEP_TO_SCREEN: Record<SessionStep, WizardScreen> = {
  AwaitCausality: 'Causality',
  AwaitData: 'Data',
  Testing: 'Evidence',
  AwaitExpertAssertions: 'Assertions',
  Diagnosed: 'Diagnosis',
};

export function screenForView(view: SessionView | null): WizardScreen {
  if (view === null) return 'Intro';
  return STEP_TO_SCREEN[view.step];
}

/** Screens the user may look back at (read-only) from the current one. */
export function visitedScreens(current: WizardScreen): WizardScreen[] {
  return SCREEN_ORDER.slice(0, SCREEN_ORDER.indexOf(current) + 1);
}

export type PlanAction =
  | { kind: 'answer'; question: string; value?: string; justification?: string }
  | { kind: 'case-datasets'; caseId: string };

/** One wizard interaction may expand into several service calls; each plan
 *  entry below is a single user interaction on the fast path. */
export interface CasePlan {
  causality: PlanAction;
  data: PlanAction;
  proceed: PlanAction;
  assertions: PlanAction[];
  finalize: PlanAction;
}

export function planForCase(c: CannedCase): CasePlan {
  return {
    causality: { kind: 'answer', question: 'causality', value: c.causality },
    data: c.has_data
      ? { kind: 'case-datasets', caseId: c.id }
      : { kind: 'answer', question: 'proceed' },
    proceed: { kind: 'answer', question: 'proceed' },
    assertions: c.suggested_assertions.map((a) => ({
      kind: 'answer',
      question: a.claim,
      value: a.value,
      justification: a.justification,
    })),
    finalize: { kind: 'answer', question: 'finalize' },
  };
}
