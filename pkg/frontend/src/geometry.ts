// GeoJSON (WGS84 lon/lat) to SVG paths. The dataset covers one city, so
// an equirectangular fit with cos(latitude) aspect correction is exact
// enough for display; no tile stack is needed.

import type { ZoneCollection, ZoneFeature } from "./types.js";

export interface FitTransform {
  x(lon: number): number;
  y(lat: number): number;
}

export function fitTransform(
  zones: ZoneCollection,
  width: number,
  height: number,
  pad = 10,
): FitTransform {
  let lonMin = Infinity;
  let lonMax = -Infinity;
  let latMin = Infinity;
  let latMax = -Infinity;
  for (const feature of zones.features) {
    for (const ring of feature.geometry.coordinates) {
      for (const [lon, lat] of ring) {
        lonMin = Math.min(lonMin, lon);
        lonMax = Math.max(lonMax, lon);
        latMin = Math.min(latMin, lat);
        latMax = Math.max(latMax, lat);
      }
    }
  }
  const midLat = (latMin + latMax) / 2;
  const aspect = Math.cos((midLat * Math.PI) / 180);
  const spanX = (lonMax - lonMin) * aspect || 1;
  const spanY = latMax - latMin || 1;
  const scale = Math.min((width - 2 * pad) / spanX, (height - 2 * pad) / spanY);
  const offsetX = (width - spanX * scale) / 2;
  const offsetY = (height - spanY * scale) / 2;
  return {
    x: (lon) => offsetX + (lon - lonMin) * aspect * scale,
    y: (lat) => height - offsetY - (lat - latMin) * scale, // north up
  };
}

export function zonePath(feature: ZoneFeature, t: FitTransform): string {
  const parts: string[] = [];
  for (const ring of feature.geometry.coordinates) {
    ring.forEach(([lon, lat], i) => {
      parts.push(`${i === 0 ? "M" : "L"}${t.x(lon).toFixed(2)} ${t.y(lat).toFixed(2)}`);
    });
    parts.push("Z");
  }
  return parts.join(" ");
}
