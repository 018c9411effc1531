// Quantile color scale for the ratio choropleth. The ratio distribution
// is extremely heavy-tailed, so a linear scale would paint nearly every
// zone the same color; ranks spread the palette evenly instead. Legend
// endpoints are labeled with the summary's p5/p95.

const BLUE: [number, number, number] = [26, 63, 181];
const YELLOW: [number, number, number] = [255, 224, 58];

export function lerpColor(t: number): string {
  const clamped = Math.min(1, Math.max(0, t));
  const channels = BLUE.map((b, i) =>
    Math.round(b + clamped * (YELLOW[i] - b)),
  );
  return `rgb(${channels[0]},${channels[1]},${channels[2]})`;
}

export class QuantileColorScale {
  private sorted: number[];

  constructor(
    definedRatios: number[],
    public legendLow: number,
    public legendHigh: number,
  ) {
    this.sorted = [...definedRatios].sort((a, b) => a - b);
  }

  /** Empirical quantile of a ratio among the defined ratios, in [0, 1]. */
  quantile(ratio: number): number {
    const n = this.sorted.length;
    if (n === 0) return 0;
    if (n === 1) return 0.5;
    // rank = number of values strictly below, plus half the ties
    let below = 0;
    let ties = 0;
    for (const v of this.sorted) {
      if (v < ratio) below += 1;
      else if (v === ratio) ties += 1;
      else break;
    }
    const rank = below + Math.max(0, ties - 1) / 2;
    return rank / (n - 1);
  }

  /** CSS color for a zone ratio; null ratios get the hatched style. */
  color(ratio: number | null): string {
    if (ratio === null) return "url(#hatch)";
    return lerpColor(this.quantile(ratio));
  }
}

export function formatRatio(ratio: number | null, digits = 3): string {
  if (ratio === null) return "—";
  return ratio.toFixed(digits);
}
