// Pure builders for the side panels and the profile chart. Every number
// shown comes from an API payload; these functions only format and map
// to screen coordinates.

import { formatRatio } from "./scale.js";
import type {
  BoxplotPayload,
  DdpPayload,
  MarketShareResponse,
  RawBundlePayload,
  RegionRatioResponse,
} from "./types.js";

export interface RegionPanelModel {
  ratioText: string;
  zoneCount: number;
  residentsText: string;
  usersText: string;
  comparisonText: string;
}

export function regionPanelModel(resp: RegionRatioResponse): RegionPanelModel {
  const vsRef =
    resp.ratio === null
      ? "no residents in range"
      : `${((resp.ratio / resp.reference_share) * 100).toFixed(1)}% of national reference ${resp.reference_share}`;
  return {
    ratioText: formatRatio(resp.ratio),
    zoneCount: resp.n_zones,
    residentsText: resp.residents_filtered.toLocaleString("en-US"),
    usersText: resp.tim_users.toFixed(1),
    comparisonText: vsRef,
  };
}

export interface MarketSharePanelModel {
  estimateText: string;
  spreadText: string;
  referenceText: string;
  regionLines: string[];
}

export function marketSharePanelModel(
  resp: MarketShareResponse,
): MarketSharePanelModel {
  return {
    estimateText:
      resp.point_estimate === null ? "—" : formatRatio(resp.point_estimate),
    spreadText: resp.spread_iqr === null ? "" : `IQR ${formatRatio(resp.spread_iqr)}`,
    referenceText: `national reference ${resp.reference_share}`,
    regionLines: resp.regions.map(
      (r) =>
        `${r.name || r.zone_ids.join("+")} (${r.zone_ids.length} zones, buffer ${r.buffer_m} m): ${formatRatio(r.ratio)}`,
    ),
  };
}

// --- profile chart ---------------------------------------------------------

const CHART = { width: 640, height: 320, pad: 36 };

interface ChartScale {
  sx(quarter: number): number;
  sy(value: number): number;
}

function chartScale(low: number, high: number): ChartScale {
  const span = high - low || 1;
  return {
    sx: (q) => CHART.pad + ((CHART.width - 2 * CHART.pad) * q) / 95,
    sy: (v) =>
      CHART.height - CHART.pad - ((CHART.height - 2 * CHART.pad) * (v - low)) / span,
  };
}

function linePath(values: number[], s: ChartScale): string {
  return values
    .map((v, q) => `${q === 0 ? "M" : "L"}${s.sx(q).toFixed(1)} ${s.sy(v).toFixed(1)}`)
    .join(" ");
}

/**
 * SVG string for a functional boxplot with the four layer roles:
 * shaded central region (.bp-region), median curve (.bp-median), fence
 * curves (.bp-fence) and outlier curves (.bp-outlier, one per outlier).
 * Values are plotted exactly as served, only mapped to pixels.
 */
export function boxplotSvg(payload: DdpPayload): string {
  const box = payload.boxplot;
  if (box.kind === "raw_bundle") {
    return rawBundleSvg(box);
  }
  const outlierCurves = box.outlier_ids
    .filter((id) => payload.curves[id] !== undefined)
    .map((id) => ({ id, values: payload.curves[id] }));
  const all = [
    ...box.fence_lower,
    ...box.fence_upper,
    ...outlierCurves.flatMap((c) => c.values),
  ];
  const s = chartScale(Math.min(...all), Math.max(...all));

  const regionPoints = [
    ...box.region_upper.map((v, q) => `${s.sx(q).toFixed(1)},${s.sy(v).toFixed(1)}`),
    ...box.region_lower
      .map((v, q) => `${s.sx(q).toFixed(1)},${s.sy(v).toFixed(1)}`)
      .reverse(),
  ].join(" ");

  const parts = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${CHART.width} ${CHART.height}" class="bp-chart">`,
    `<polygon class="bp-region" points="${regionPoints}"/>`,
    `<path class="bp-fence" d="${linePath(box.fence_lower, s)}"/>`,
    `<path class="bp-fence" d="${linePath(box.fence_upper, s)}"/>`,
  ];
  for (const curve of outlierCurves) {
    parts.push(
      `<path class="bp-outlier" data-day="${curve.id}" d="${linePath(curve.values, s)}"/>`,
    );
  }
  parts.push(`<path class="bp-median" d="${linePath(box.median, s)}"/>`);
  parts.push(axisLabels(s));
  parts.push("</svg>");
  return parts.join("");
}

function rawBundleSvg(bundle: RawBundlePayload): string {
  const all = Object.values(bundle.curves).flat();
  const s = chartScale(Math.min(...all), Math.max(...all));
  const parts = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${CHART.width} ${CHART.height}" class="bp-chart">`,
  ];
  for (const [id, values] of Object.entries(bundle.curves)) {
    parts.push(`<path class="bp-raw" data-day="${id}" d="${linePath(values, s)}"/>`);
  }
  parts.push(axisLabels(s));
  parts.push("</svg>");
  return parts.join("");
}

function axisLabels(s: ChartScale): string {
  const ticks = [0, 24, 48, 72, 95];
  return ticks
    .map(
      (q) =>
        `<text class="bp-tick" x="${s.sx(q).toFixed(1)}" y="${CHART.height - 10}" text-anchor="middle">${Math.floor(q / 4)}:00</text>`,
    )
    .join("");
}
