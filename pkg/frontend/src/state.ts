// View state and pure reducers. Replaying the same action sequence
// always yields the same state, which keeps selection -> request ->
// display idempotent.

export interface ViewState {
  selected: ReadonlySet<string>;
  bufferM: number;
  activeGroup: string | null;
}

export function initialState(): ViewState {
  return { selected: new Set(), bufferM: 0, activeGroup: null };
}

export function toggleZone(state: ViewState, zoneId: string): ViewState {
  const selected = new Set(state.selected);
  if (selected.has(zoneId)) {
    selected.delete(zoneId);
  } else {
    selected.add(zoneId);
  }
  return { ...state, selected };
}

export function clearSelection(state: ViewState): ViewState {
  return { ...state, selected: new Set() };
}

export function setBuffer(state: ViewState, bufferM: number): ViewState {
  return { ...state, bufferM: Math.max(0, bufferM) };
}

export function setActiveGroup(state: ViewState, group: string | null): ViewState {
  return { ...state, activeGroup: group };
}

export function selectionKey(state: ViewState): string {
  return [...state.selected].sort().join("|") + "@" + state.bufferM;
}
