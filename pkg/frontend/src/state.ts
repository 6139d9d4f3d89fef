/** Immutable query state: free text, deduplicated keyword chips, history. */

import { composeQuery } from "./compose.js";

export interface HistoryEntry {
  /** exact serialized request body that was sent */
  body: string;
  freeText: string;
  keywords: string[];
  k: number;
  /** image ids of the top results that came back */
  topIds: string[];
}

export interface QueryState {
  freeText: string;
  chips: readonly string[];
  k: number;
  history: readonly HistoryEntry[];
}

export function initialState(k = 20): QueryState {
  return { freeText: "", chips: [], k, history: [] };
}

export function setFreeText(state: QueryState, text: string): QueryState {
  return { ...state, freeText: text };
}

/** Add a chip; blank or duplicate chips leave the state unchanged. */
export function addKeyword(state: QueryState, chip: string): QueryState {
  const trimmed = chip.trim();
  if (trimmed === "" || state.chips.includes(trimmed)) {
    return state;
  }
  return { ...state, chips: [...state.chips, trimmed] };
}

export function removeKeyword(state: QueryState, chip: string): QueryState {
  if (!state.chips.includes(chip)) {
    return state;
  }
  return { ...state, chips: state.chips.filter((c) => c !== chip) };
}

export function composedQuery(state: QueryState): string {
  return composeQuery(state.freeText, state.chips);
}

export function recordResult(state: QueryState, entry: HistoryEntry): QueryState {
  return { ...state, history: [...state.history, entry] };
}

/** Restore text/chips/k from a history entry (the entry itself is kept). */
export function restoreFromHistory(state: QueryState, index: number): QueryState {
  const entry = state.history[index];
  if (!entry) {
    return state;
  }
  return { ...state, freeText: entry.freeText, chips: [...entry.keywords], k: entry.k };
}
