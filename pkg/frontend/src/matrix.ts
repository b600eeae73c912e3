import type { ShiftMatrixDict, TriState } from './types.js';

/** Intro copy: the five scenarios' change profiles.
 *
 * Mirrors the engine's catalog (held to it by the contract suite): which of
 * the five joint-decomposition quantities move under each scenario, which
 * cells are definitional rather than derived, and the causal direction each
 * scenario presumes.
 */

export const MATRIX_COLUMNS = [
  { field: 'delta_prior', label: 'P(y)' },
  { field: 'delta_features', label: 'P(x)' },
  { field: 'delta_class_conditionals', label: 'P(x|y)' },
  { field: 'delta_posteriors', label: 'P(y|x)' },
  { field: 'delta_joint', label: 'P(x,y)' },
] as const;

export interface IntroRow {
  kind: string;
  causality: string;
  cells: Record<string, TriState>;
  definitional: string[];
}

function row(
  kind: string,
  causality: string,
  values: TriState[],
  definitional: string[],
): IntroRow {
  const cells: Record<string, TriState> = {};
  MATRIX_COLUMNS.forEach((col, i) => {
    cells[col.field] = values[i]!;
  });
  return { kind, causality, cells, definitional };
}

export const INTRO_MATRIX: IntroRow[] = [
  row('Prior', 'Y→X', ['Yes', 'Yes', 'No', 'Yes', 'Yes'], [
    'delta_prior',
    'delta_class_conditionals',
  ]),
  row('ClassConditional', 'Y→X', ['No', 'Yes', 'Yes', 'Yes', 'Yes'], [
    'delta_prior',
    'delta_class_conditionals',
  ]),
  row('Covariate', 'X→Y', ['Yes', 'Yes', 'Yes', 'No', 'Yes'], [
    'delta_features',
    'delta_posteriors',
  ]),
  row('Concept', 'X→Y', ['Yes', 'No', 'Yes', 'Yes', 'Yes'], [
    'delta_features',
    'delta_posteriors',
  ]),
  row('General', 'either', ['Yes', 'Yes', 'Yes', 'Yes', 'Yes'], []),
];

function cellTd(doc: Document, value: TriState, definitional: boolean): HTMLElement {
  const td = doc.createElement('td');
  td.textContent = value;
  td.className = definitional ? 'matrix-cell definitional' : 'matrix-cell';
  return td;
}

/** The Intro table over all five scenarios. */
export function introMatrixTable(doc: Document): HTMLTableElement {
  const table = doc.createElement('table');
  table.className = 'shift-matrix';
  const head = doc.createElement('tr');
  for (const label of ['Scenario', 'Causality', ...MATRIX_COLUMNS.map((c) => c.label)]) {
    const th = doc.createElement('th');
    th.textContent = label;
    head.appendChild(th);
  }
  table.appendChild(head);
  for (const r of INTRO_MATRIX) {
    const tr = doc.createElement('tr');
    const kind = doc.createElement('th');
    kind.textContent = r.kind;
    tr.appendChild(kind);
    const causality = doc.createElement('td');
    causality.textContent = r.causality;
    tr.appendChild(causality);
    for (const col of MATRIX_COLUMNS) {
      tr.appendChild(
        cellTd(doc, r.cells[col.field]!, r.definitional.includes(col.field)),
      );
    }
    table.appendChild(tr);
  }
  return table;
}

/** A diagnosed session's single-scenario profile, from the service verbatim. */
export function diagnosisMatrixTable(
  doc: Document,
  matrix: ShiftMatrixDict,
): HTMLTableElement {
  const table = doc.createElement('table');
  table.className = 'shift-matrix';
  const head = doc.createElement('tr');
  const body = doc.createElement('tr');
  for (const col of MATRIX_COLUMNS) {
    const th = doc.createElement('th');
    th.textContent = col.label;
    head.appendChild(th);
    body.appendChild(
      cellTd(
        doc,
        matrix[col.field as keyof ShiftMatrixDict] as TriState,
        matrix.definitional.includes(col.field),
      ),
    );
  }
  table.appendChild(head);
  table.appendChild(body);
  return table;
}
