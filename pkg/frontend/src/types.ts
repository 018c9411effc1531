// Wire types for the gridlink HTTP API. The UI displays these values
// verbatim; all statistics are computed server-side.

export interface ZoneProperties {
  zone_id: string;
  residents_total: number;
  residents_under11: number;
  residents_over80: number;
  land_use: string;
  tim_users: number;
  residents_filtered: number;
  ratio: number | null;
}

export interface ZoneFeature {
  type: "Feature";
  geometry: { type: "Polygon"; coordinates: number[][][] };
  properties: ZoneProperties;
}

export interface ZoneCollection {
  type: "FeatureCollection";
  features: ZoneFeature[];
}

export interface RatioSummary {
  min: number;
  p5: number;
  p25: number;
  median: number;
  p75: number;
  p95: number;
  max: number;
  n_zones: number;
  n_undefined: number;
}

export interface SummaryPayload {
  snapshot: { date: string; quarter: number };
  summary: RatioSummary | null;
  reference_share: number;
  method: string;
}

export interface GroupInfo {
  group: string;
  n_days: number;
  days: string[];
}

export interface BoxplotPayload {
  kind: "boxplot";
  median_id: string;
  median: number[];
  region_lower: number[];
  region_upper: number[];
  fence_lower: number[];
  fence_upper: number[];
  whisker_lower: number[];
  whisker_upper: number[];
  outlier_ids: string[];
  depths: Record<string, number>;
}

export interface RawBundlePayload {
  kind: "raw_bundle";
  ids: string[];
  curves: Record<string, number[]>;
}

export interface DdpPayload {
  group: string;
  days: string[];
  curves: Record<string, number[]>;
  boxplot: BoxplotPayload | RawBundlePayload;
}

export interface RegionRatioResponse {
  zone_ids: string[];
  n_zones: number;
  tim_users: number;
  residents_filtered: number;
  ratio: number | null;
  reference_share: number;
}

export interface PinnedRegion {
  name: string;
  zone_ids: string[];
  buffer_m: number;
  ratio: number | null;
}

export interface MarketShareResponse {
  regions: PinnedRegion[];
  n_regions: number;
  point_estimate: number | null;
  spread_iqr: number | null;
  reference_share: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
}
