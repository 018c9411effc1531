import type {
  DdpPayload,
  MarketShareResponse,
  RegionRatioResponse,
  SummaryPayload,
  ZoneCollection,
  GroupInfo,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client; fetch is injectable so tests can stub the server. */
export class ApiClient {
  constructor(
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
    private base: string = "",
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, "network_error", String(err));
    }
    if (!resp.ok) {
      let code = "http_error";
      let message = `${resp.status}`;
      try {
        const body = await resp.json();
        code = body.code ?? code;
        message = body.message ?? message;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, code, message);
    }
    return (await resp.json()) as T;
  }

  getZones(): Promise<ZoneCollection> {
    return this.request("/api/zones");
  }

  getSummary(): Promise<SummaryPayload> {
    return this.request("/api/summary");
  }

  getGroups(): Promise<{ groups: GroupInfo[] }> {
    return this.request("/api/groups");
  }

  getDdp(group: string): Promise<DdpPayload> {
    return this.request(`/api/ddp/${encodeURIComponent(group)}`);
  }

  postRegionRatio(zoneIds: string[], bufferM: number): Promise<RegionRatioResponse> {
    return this.request("/api/region-ratio", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ zone_ids: zoneIds, buffer_m: bufferM }),
    });
  }

  getMarketShare(): Promise<MarketShareResponse> {
    return this.request("/api/market-share");
  }

  postRegion(
    name: string,
    zoneIds: string[],
    bufferM: number,
  ): Promise<MarketShareResponse & { saved: unknown }> {
    return this.request("/api/regions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ name, zone_ids: zoneIds, buffer_m: bufferM }),
    });
  }
}
