/** Payload shapes of the diagnosis service, mirrored by hand.
 *
 * The service is the single source of truth for every one of these values;
 * the UI renders them verbatim and never derives a scenario on its own.
 */

export type TriState = 'Yes' | 'No' | 'Unknown';
export type CausalityValue = 'XtoY' | 'YtoX' | 'Unknown';

export type SessionStep =
  | 'AwaitCausality'
  | 'AwaitData'
  | 'Testing'
  | 'AwaitExpertAssertions'
  | 'Diagnosed';

export interface Bootstrap {
  api_base: string;
  token_required: boolean;
  service: string;
  version: string;
}

export interface DatasetMeta {
  name: string;
  n: number;
  d: number;
  labeled: boolean;
}

export interface TestEntry {
  test: string;
  status: 'running' | 'done' | 'failed';
  result?: Record<string, unknown>;
  error?: string | null;
}

export interface AssertionEntry {
  claim: string;
  value: TriState;
  justification: string;
}

export interface ShiftMatrixDict {
  delta_prior: TriState;
  delta_features: TriState;
  delta_class_conditionals: TriState;
  delta_posteriors: TriState;
  delta_joint: TriState;
  definitional: string[];
}

export interface RecommendationDict {
  kind: string;
  summary: string;
  executable_actions: string[];
  caveats: string[];
  see_also: string[];
}

export interface DiagnosisDict {
  scenario: { kind: string; causality: CausalityValue };
  confidence: string;
  rationale: string[];
  recommendation: RecommendationDict;
  shift_matrix: ShiftMatrixDict;
}

export interface AuditEvent {
  seq: number;
  at: number;
  event: string;
  detail: Record<string, unknown>;
  step_before: SessionStep;
  step_after: SessionStep;
}

export interface SessionView {
  session_id: string;
  step: SessionStep;
  causality: CausalityValue | null;
  level: number;
  case: string | null;
  datasets: { source: DatasetMeta | null; target: DatasetMeta | null };
  tests: TestEntry[];
  assertions: AssertionEntry[];
  answered: [string, string][];
  diagnosis: DiagnosisDict | null;
  advisory: string | null;
  audit: AuditEvent[];
  created_at: number;
  updated_at: number;
}

export interface SuggestedAssertion {
  claim: string;
  value: TriState;
  justification: string;
}

export interface CannedCase {
  id: string;
  title: string;
  narrative: string;
  causality: CausalityValue;
  has_data: boolean;
  suggested_assertions: SuggestedAssertion[];
  expected_scenario: string;
}

export interface DensityCurve {
  dimension: number;
  grid: number[];
  source: number[];
  target: number[];
}

export interface DensityPayload {
  dimensions: DensityCurve[];
}
