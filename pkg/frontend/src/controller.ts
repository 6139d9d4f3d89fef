/**
 * Headless search controller: owns the query state, talks to the service,
 * and notifies the view layer. All ranking and matching comes from the
 * service verbatim; this layer never reorders results.
 */

import { buildSearchBody, SearchClient, SearchHit, SearchResponse, ServiceError } from "./api.js";
import {
  addKeyword,
  composedQuery,
  initialState,
  QueryState,
  recordResult,
  removeKeyword,
  restoreFromHistory,
  setFreeText,
} from "./state.js";

export interface ControllerView {
  state: QueryState;
  results: SearchHit[] | null;
  totalCandidates: number;
  error: string | null;
  pending: boolean;
}

type Scheduler = (fn: () => void, ms: number) => unknown;
type Canceller = (handle: unknown) => void;

export interface ControllerOptions {
  k?: number;
  debounceMs?: number;
  schedule?: Scheduler;
  cancel?: Canceller;
}

export class SearchController {
  private state: QueryState;
  private results: SearchHit[] | null = null;
  private totalCandidates = 0;
  private error: string | null = null;
  private pending = false;
  private requestSeq = 0;
  private aborter: AbortController | null = null;
  private debounceHandle: unknown = null;
  private readonly debounceMs: number;
  private readonly schedule: Scheduler;
  private readonly cancelTimer: Canceller;
  private readonly listeners: Array<(view: ControllerView) => void> = [];

  constructor(
    private readonly client: SearchClient,
    options: ControllerOptions = {},
  ) {
    this.state = initialState(options.k ?? 20);
    this.debounceMs = options.debounceMs ?? 200;
    this.schedule = options.schedule ?? ((fn, ms) => setTimeout(fn, ms));
    this.cancelTimer = options.cancel ?? ((handle) => clearTimeout(handle as number));
  }

  onChange(listener: (view: ControllerView) => void): void {
    this.listeners.push(listener);
  }

  view(): ControllerView {
    return {
      state: this.state,
      results: this.results,
      totalCandidates: this.totalCandidates,
      error: this.error,
      pending: this.pending,
    };
  }

  private notify(): void {
    const snapshot = this.view();
    for (const listener of this.listeners) {
      listener(snapshot);
    }
  }

  setFreeText(text: string): void {
    this.state = setFreeText(this.state, text);
    this.notify();
  }

  /** Add a chip and auto-resubmit (debounced). No-op on duplicates. */
  addChip(chip: string): void {
    const next = addKeyword(this.state, chip);
    if (next !== this.state) {
      this.state = next;
      this.notify();
      this.scheduleResubmit();
    }
  }

  /** Remove a chip and auto-resubmit (debounced). */
  removeChip(chip: string): void {
    const next = removeKeyword(this.state, chip);
    if (next !== this.state) {
      this.state = next;
      this.notify();
      this.scheduleResubmit();
    }
  }

  composedQuery(): string {
    return composedQuery(this.state);
  }

  private scheduleResubmit(): void {
    if (this.debounceHandle !== null) {
      this.cancelTimer(this.debounceHandle);
    }
    this.debounceHandle = this.schedule(() => {
      this.debounceHandle = null;
      void this.submit();
    }, this.debounceMs);
  }

  /** Fire any debounced resubmit immediately (used by tests and unload). */
  async flush(): Promise<void> {
    if (this.debounceHandle !== null) {
      this.cancelTimer(this.debounceHandle);
      this.debounceHandle = null;
      await this.submit();
    }
  }

  /** Submit the current state; the body is built by buildSearchBody only. */
  async submit(): Promise<void> {
    const { freeText, chips, k } = this.state;
    const body = buildSearchBody(freeText, chips, k);
    await this.send(body, freeText, [...chips], k);
  }

  /**
   * Re-issue a past request. The recorded body string is sent byte-for-byte;
   * the visible text/chips are restored to match it.
   */
  async revert(index: number): Promise<void> {
    const entry = this.state.history[index];
    if (!entry) {
      return;
    }
    this.state = restoreFromHistory(this.state, index);
    this.notify();
    await this.send(entry.body, entry.freeText, [...entry.keywords], entry.k);
  }

  private async send(body: string, freeText: string, keywords: string[], k: number): Promise<void> {
    const seq = ++this.requestSeq;
    this.aborter?.abort();
    const aborter = new AbortController();
    this.aborter = aborter;
    this.pending = true;
    this.notify();

    let response: SearchResponse;
    try {
      response = await this.client.search(body, aborter.signal);
    } catch (err) {
      if (seq !== this.requestSeq) {
        return; // superseded request; newest one owns the view
      }
      this.pending = false;
      // keep the last results on screen; only surface the banner
      this.error =
        err instanceof ServiceError ? err.message : `service unreachable: ${String(err)}`;
      this.notify();
      return;
    }
    if (seq !== this.requestSeq) {
      return;
    }
    this.pending = false;
    this.error = null;
    this.results = response.results;
    this.totalCandidates = response.total_candidates;
    this.state = recordResult(this.state, {
      body,
      freeText,
      keywords,
      k,
      topIds: response.results.map((hit) => hit.image_id),
    });
    this.notify();
  }
}
