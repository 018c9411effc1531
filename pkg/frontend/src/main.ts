import { ApiClient, ApiError } from "./api.js";
import { debounce } from "./debounce.js";
import { fitTransform, zonePath } from "./geometry.js";
import { boxplotSvg, marketSharePanelModel, regionPanelModel } from "./panels.js";
import { QuantileColorScale, formatRatio } from "./scale.js";
import {
  ViewState,
  initialState,
  setActiveGroup,
  setBuffer,
  toggleZone,
} from "./state.js";
import type { ZoneCollection, ZoneFeature } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const MAP_W = 720;
const MAP_H = 720;

const api = new ApiClient();
let state: ViewState = initialState();
let requestToken = 0;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function showError(message: string): void {
  const banner = el<HTMLDivElement>("error-banner");
  banner.textContent = message;
  banner.classList.remove("hidden");
}

function clearError(): void {
  el<HTMLDivElement>("error-banner").classList.add("hidden");
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return String(err);
}

async function boot(): Promise<void> {
  try {
    const [zones, summary, groups] = await Promise.all([
      api.getZones(),
      api.getSummary(),
      api.getGroups(),
    ]);
    clearError();

    const defined = zones.features
      .map((f) => f.properties.ratio)
      .filter((r): r is number => r !== null);
    const scale = new QuantileColorScale(
      defined,
      summary.summary?.p5 ?? 0,
      summary.summary?.p95 ?? 1,
    );

    el<HTMLSpanElement>("snapshot-label").textContent =
      `${summary.snapshot.date}, quarter ${summary.snapshot.quarter}`;
    renderLegend(scale);
    renderMap(zones, scale);
    renderGroupSelector(groups.groups.map((g) => g.group));
    await refreshMarketShare();
  } catch (err) {
    showError(describeError(err));
  }
}

function renderLegend(scale: QuantileColorScale): void {
  el<HTMLSpanElement>("legend-low").textContent = formatRatio(scale.legendLow);
  el<HTMLSpanElement>("legend-high").textContent = formatRatio(scale.legendHigh);
}

function renderMap(zones: ZoneCollection, scale: QuantileColorScale): void {
  const svg = el<HTMLElement>("map") as unknown as SVGSVGElement;
  svg.setAttribute("viewBox", `0 0 ${MAP_W} ${MAP_H}`);
  svg.innerHTML =
    `<defs><pattern id="hatch" width="6" height="6" patternTransform="rotate(45)" ` +
    `patternUnits="userSpaceOnUse"><rect width="6" height="6" fill="#e8e8e8"/>` +
    `<line x1="0" y1="0" x2="0" y2="6" stroke="#999" stroke-width="2"/></pattern></defs>`;
  const t = fitTransform(zones, MAP_W, MAP_H);
  for (const feature of zones.features) {
    const path = document.createElementNS(SVG_NS, "path");
    path.setAttribute("d", zonePath(feature, t));
    path.setAttribute("fill", scale.color(feature.properties.ratio));
    path.setAttribute("class", "zone");
    path.dataset.zoneId = feature.properties.zone_id;
    path.addEventListener("click", () => onZoneClick(feature.properties.zone_id));
    path.addEventListener("mouseenter", () => showTooltip(feature));
    svg.appendChild(path);
  }
}

function showTooltip(feature: ZoneFeature): void {
  const p = feature.properties;
  el<HTMLDivElement>("tooltip").textContent =
    `${p.zone_id} (${p.land_use}) — users ${p.tim_users.toFixed(1)}, ` +
    `residents ${p.residents_filtered}, ratio ${formatRatio(p.ratio)}`;
}

function onZoneClick(zoneId: string): void {
  state = toggleZone(state, zoneId);
  paintSelection();
  scheduleRegionUpdate();
}

function paintSelection(): void {
  document.querySelectorAll<SVGPathElement>("#map .zone").forEach((node) => {
    const id = node.dataset.zoneId ?? "";
    node.classList.toggle("selected", state.selected.has(id));
  });
  el<HTMLSpanElement>("selection-count").textContent = String(state.selected.size);
}

const scheduleRegionUpdate = debounce(() => {
  void refreshRegionPanel();
}, 200);

async function refreshRegionPanel(): Promise<void> {
  const panel = el<HTMLDivElement>("region-panel");
  if (state.selected.size === 0) {
    panel.classList.add("empty");
    el<HTMLSpanElement>("region-ratio").textContent = "—";
    el<HTMLSpanElement>("region-detail").textContent = "select zones on the map";
    return;
  }
  const token = ++requestToken;
  try {
    const resp = await api.postRegionRatio([...state.selected], state.bufferM);
    if (token !== requestToken) return; // superseded by a newer request
    clearError();
    const model = regionPanelModel(resp);
    panel.classList.remove("empty", "stale");
    el<HTMLSpanElement>("region-ratio").textContent = model.ratioText;
    el<HTMLSpanElement>("region-detail").textContent =
      `${model.zoneCount} zones, ${model.residentsText} residents, ` +
      `${model.usersText} est. users — ${model.comparisonText}`;
  } catch (err) {
    if (token !== requestToken) return;
    panel.classList.add("stale"); // grey out the last valid value
    showError(describeError(err));
  }
}

async function refreshMarketShare(): Promise<void> {
  try {
    const resp = await api.getMarketShare();
    const model = marketSharePanelModel(resp);
    el<HTMLSpanElement>("share-estimate").textContent = model.estimateText;
    el<HTMLSpanElement>("share-spread").textContent = model.spreadText;
    el<HTMLSpanElement>("share-reference").textContent = model.referenceText;
    el<HTMLUListElement>("pinned-regions").innerHTML = model.regionLines
      .map((line) => `<li>${line}</li>`)
      .join("");
  } catch (err) {
    showError(describeError(err));
  }
}

function renderGroupSelector(groups: string[]): void {
  const select = el<HTMLSelectElement>("group-select");
  select.innerHTML = groups
    .map((g) => `<option value="${g}">group ${g}</option>`)
    .join("");
  select.addEventListener("change", () => {
    state = setActiveGroup(state, select.value);
    void refreshBoxplot();
  });
  if (groups.length > 0) {
    state = setActiveGroup(state, groups[0]);
    void refreshBoxplot();
  }
}

async function refreshBoxplot(): Promise<void> {
  const host = el<HTMLDivElement>("boxplot-host");
  if (!state.activeGroup) {
    host.innerHTML = "<p class='empty-state'>no group selected</p>";
    return;
  }
  try {
    const payload = await api.getDdp(state.activeGroup);
    clearError();
    host.innerHTML = boxplotSvg(payload);
  } catch (err) {
    if (err instanceof ApiError && err.status === 404) {
      host.innerHTML = "<p class='empty-state'>unknown group</p>";
      return;
    }
    showError(describeError(err));
  }
}

function wireControls(): void {
  const slider = el<HTMLInputElement>("buffer-slider");
  const label = el<HTMLSpanElement>("buffer-label");
  slider.addEventListener("input", () => {
    state = setBuffer(state, Number(slider.value));
    label.textContent = `${state.bufferM} m`;
    scheduleRegionUpdate();
  });
  el<HTMLButtonElement>("pin-button").addEventListener("click", () => {
    void pinRegion();
  });
  el<HTMLButtonElement>("clear-button").addEventListener("click", () => {
    state = { ...state, selected: new Set() };
    paintSelection();
    scheduleRegionUpdate();
  });
}

async function pinRegion(): Promise<void> {
  if (state.selected.size === 0) return;
  const name = el<HTMLInputElement>("region-name").value.trim();
  try {
    await api.postRegion(name, [...state.selected], state.bufferM);
    clearError();
    await refreshMarketShare();
  } catch (err) {
    showError(describeError(err));
  }
}

wireControls();
void boot();
