/** Display metadata for the bundled walk-through cases.
 *
 * The service's /cases listing carries the narrative and the suggested
 * answers; what it does not carry is a short display label or the scenario
 * the case is expected to land on once the wizard is driven faithfully.
 * Both live here, keyed by case id, and the end-to-end suite holds the
 * service to them.
 */

export interface CaseDisplay {
  label: string;
  /** Scenario kind the case should diagnose as when the suggested answers
   *  are submitted unchanged. */
  expectedKind: string;
  /** 'original' marks prompt text written for this project rather than
   *  adapted from an existing questionnaire. */
  narrativeOrigin: 'adapted' | 'original';
}

export const CASE_DISPLAY: Record<string, CaseDisplay> = {
  'heart-disease': {
    label: 'Heart Disease (Covariate Shift)',
    expectedKind: 'Covariate',
    narrativeOrigin: 'adapted',
  },
  'spam-detection': {
    label: 'Spam Detection (Prior Shift)',
    expectedKind: 'Prior',
    narrativeOrigin: 'adapted',
  },
  'image-recognition': {
    label: 'Image Recognition (Class-cond. Shift)',
    expectedKind: 'ClassConditional',
    narrativeOrigin: 'original',
  },
};

export function caseLabel(id: string): string {
  return CASE_DISPLAY[id]?.label ?? id;
}
