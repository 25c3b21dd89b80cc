/** Geometry helpers for the metric-space scatter and the weight chart. */

/** Indices of the two largest weights; first two dims when uniform. */
export function topTwoDims(weights: number[]): [number, number] {
  if (weights.length === 0) return [0, 0];
  if (weights.length === 1) return [0, 0];
  const order = weights
    .map((w, idx) => ({ w, idx }))
    .sort((a, b) => b.w - a.w || a.idx - b.idx);
  return [order[0].idx, order[1].idx];
}

export interface PixelPoint {
  x: number;
  y: number;
}

/** Min-max scale raw coordinates into a padded pixel box. A degenerate
 * axis (all equal values) collapses to the box center. */
export function scaleToBox(
  xs: number[],
  ys: number[],
  width: number,
  height: number,
  pad = 12,
): PixelPoint[] {
  const scale = (values: number[], extent: number): number[] => {
    const lo = Math.min(...values);
    const hi = Math.max(...values);
    const span = hi - lo;
    if (!(span > 0)) return values.map(() => extent / 2);
    return values.map((v) => pad + ((v - lo) / span) * (extent - 2 * pad));
  };
  const px = scale(xs, width);
  const py = scale(ys, height);
  // screen y grows downward; flip so larger feature values sit higher
  return px.map((x, idx) => ({ x, y: height - py[idx] }));
}

/** Uncertainty badge text for one instance's class-probability row. */
export function uncertaintyBadge(classProbs: number[]): string {
  const top = Math.max(...classProbs);
  const pct = Math.round(top * 100);
  if (top >= 0.85) return `confident ${pct}%`;
  if (top >= 0.6) return `leaning ${pct}%`;
  return `uncertain ${pct}%`;
}
