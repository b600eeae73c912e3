import type { DensityCurve } from './types.js';

/** Map one curve onto SVG polyline points within a w-by-h viewport.
 *
 * x follows the grid (assumed sorted), y is scaled against yMax so the
 * source and target curves of one dimension share a vertical scale.
 */
export function polylinePoints(
  grid: number[],
  values: number[],
  w: number,
  h: number,
  yMax: number,
): string {
  if (grid.length !== values.length || grid.length < 2) {
    throw new Error('grid and values must align and hold at least 2 points');
  }
  const x0 = grid[0]!;
  const x1 = grid[grid.length - 1]!;
  const span = x1 - x0 || 1;
  const scale = yMax > 0 ? yMax : 1;
  const pts: string[] = [];
  for (let i = 0; i < grid.length; i++) {
    const x = ((grid[i]! - x0) / span) * w;
    const y = h - (values[i]! / scale) * h;
    pts.push(`${round3(x)},${round3(y)}`);
  }
  return pts.join(' ');
}

function round3(v: number): number {
  return Math.round(v * 1000) / 1000;
}

export function curveMax(c: DensityCurve): number {
  let m = 0;
  for (const v of c.source) if (v > m) m = v;
  for (const v of c.target) if (v > m) m = v;
  return m;
}

const SVG_NS = 'http://www.w3.org/2000/svg';

/** One overlay chart: source and target densities over a shared grid. */
export function densityChart(
  doc: Document,
  curve: DensityCurve,
  w = 360,
  h = 120,
): SVGSVGElement {
  const yMax = curveMax(curve);
  const svg = doc.createElementNS(SVG_NS, 'svg') as SVGSVGElement;
  svg.setAttribute('viewBox', `0 0 ${w} ${h}`);
  svg.setAttribute('class', 'density-chart');
  svg.setAttribute('role', 'img');
  svg.setAttribute(
    'aria-label',
    `density overlay for dimension ${curve.dimension}`,
  );
  for (const [role, values] of [
    ['source', curve.source],
    ['target', curve.target],
  ] as const) {
    const line = doc.createElementNS(SVG_NS, 'polyline');
    line.setAttribute('points', polylinePoints(curve.grid, values, w, h, yMax));
    line.setAttribute('class', `density-${role}`);
    line.setAttribute('fill', 'none');
    svg.appendChild(line);
  }
  return svg;
}
