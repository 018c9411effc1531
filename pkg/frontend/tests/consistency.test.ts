// Criterion checks for the analyst console: every displayed number is
// sourced from the API, so the panels must echo server values exactly.

import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { marketSharePanelModel, regionPanelModel } from "../src/panels.js";
import { formatRatio } from "../src/scale.js";
import type { ZoneCollection } from "../src/types.js";

const ZONES: ZoneCollection = {
  type: "FeatureCollection",
  features: [
    feature("N0-RA", 560.25, 1900, 560.25 / 1900),
    feature("N0-RB", 10.5, 2100, 10.5 / 2100),
    feature("N0-UT", 831.0, 40, 831.0 / 40),
  ],
};

function feature(zoneId: string, users: number, residents: number, ratio: number) {
  return {
    type: "Feature" as const,
    geometry: { type: "Polygon" as const, coordinates: [[[0, 0], [1, 0], [1, 1], [0, 0]]] },
    properties: {
      zone_id: zoneId,
      residents_total: residents + 100,
      residents_under11: 60,
      residents_over80: 40,
      land_use: "residential",
      tim_users: users,
      residents_filtered: residents,
      ratio,
    },
  };
}

/** In-memory stand-in for the service: region ratios aggregate the zone
 * table; the market share is the median of pinned region ratios. */
function stubServer() {
  const pinned: { name: string; zone_ids: string[]; buffer_m: number }[] = [];

  function regionRatio(zoneIds: string[]) {
    const members = ZONES.features.filter((f) =>
      zoneIds.includes(f.properties.zone_id),
    );
    const users = members.reduce((s, f) => s + f.properties.tim_users, 0);
    const residents = members.reduce(
      (s, f) => s + f.properties.residents_filtered,
      0,
    );
    return {
      zone_ids: zoneIds.slice().sort(),
      n_zones: members.length,
      tim_users: users,
      residents_filtered: residents,
      ratio: residents > 0 ? users / residents : null,
      reference_share: 0.302,
    };
  }

  function marketShare() {
    const ratios = pinned
      .map((p) => regionRatio(p.zone_ids).ratio)
      .filter((r): r is number => r !== null)
      .sort((a, b) => a - b);
    const n = ratios.length;
    const median =
      n === 0
        ? null
        : n % 2 === 1
          ? ratios[(n - 1) / 2]
          : (ratios[n / 2 - 1] + ratios[n / 2]) / 2;
    return {
      regions: pinned.map((p) => ({
        ...p,
        ratio: regionRatio(p.zone_ids).ratio,
      })),
      n_regions: pinned.length,
      point_estimate: median,
      spread_iqr: n > 0 ? 0 : null,
      reference_share: 0.302,
    };
  }

  const fetchFn = async (input: string, init?: RequestInit): Promise<Response> => {
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    if (input === "/api/zones") return json(ZONES);
    if (input === "/api/region-ratio") {
      if (!body || !Array.isArray(body.zone_ids) || body.zone_ids.length === 0) {
        return json({ code: "malformed_body", message: "zone_ids" }, 400);
      }
      return json(regionRatio(body.zone_ids));
    }
    if (input === "/api/regions") {
      pinned.push({
        name: body.name,
        zone_ids: body.zone_ids,
        buffer_m: body.buffer_m,
      });
      return json(marketShare());
    }
    if (input === "/api/market-share") return json(marketShare());
    return json({ code: "unknown", message: input }, 404);
  };
  return { fetchFn };
}

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("single-zone selection with buffer 0", () => {
  it("displays exactly the zone's API ratio", async () => {
    const api = new ApiClient(stubServer().fetchFn);
    const zones = await api.getZones();
    for (const feature of zones.features) {
      const resp = await api.postRegionRatio([feature.properties.zone_id], 0);
      // raw value equality, not approximate
      expect(resp.ratio).toBe(feature.properties.ratio);
      // and the panel renders the same text the tooltip would
      const panel = regionPanelModel(resp);
      expect(panel.ratioText).toBe(formatRatio(feature.properties.ratio));
    }
  });
});

describe("pinning three regions", () => {
  it("shows their median as the market share", async () => {
    const api = new ApiClient(stubServer().fetchFn);
    const picks = [["N0-RA"], ["N0-RB"], ["N0-UT"]];
    const ratios: number[] = [];
    for (const zoneIds of picks) {
      const r = await api.postRegionRatio(zoneIds, 0);
      ratios.push(r.ratio as number);
      await api.postRegion("", zoneIds, 0);
    }
    const share = await api.getMarketShare();
    const expectedMedian = ratios.slice().sort((a, b) => a - b)[1];
    expect(share.n_regions).toBe(3);
    expect(share.point_estimate).toBe(expectedMedian);
    const model = marketSharePanelModel(share);
    expect(model.estimateText).toBe(formatRatio(expectedMedian));
    expect(model.regionLines).toHaveLength(3);
  });
});

describe("error propagation", () => {
  it("maps error bodies onto ApiError", async () => {
    const api = new ApiClient(stubServer().fetchFn);
    await expect(api.getDdp("nope")).rejects.toMatchObject({
      status: 404,
      code: "unknown",
    });
    await expect(api.postRegionRatio([], 0)).rejects.toBeInstanceOf(ApiError);
  });

  it("wraps network failures", async () => {
    const api = new ApiClient(() => Promise.reject(new Error("refused")));
    await expect(api.getZones()).rejects.toMatchObject({
      status: 0,
      code: "network_error",
    });
  });
});
