/** Typed client for the search service HTTP+JSON API. */

export interface SearchHit {
  image_id: string;
  score: number;
  matched_terms: string[];
  caption_snippet: string;
}

export interface QueryEcho {
  free_text: string;
  keywords: string[];
  k: number;
  effective_query: string;
}

export interface SearchResponse {
  results: SearchHit[];
  total_candidates: number;
  query_echo: QueryEcho;
}

export interface CaptionEntry {
  j: number;
  rect: [number, number, number, number] | null;
  text: string;
}

export interface ImageMeta {
  image_id: string;
  labels: string[];
  captions: CaptionEntry[];
  concatenated: string;
}

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    detail: string,
  ) {
    super(`service error ${status}: ${detail}`);
  }
}

/**
 * Serialize a search request body. All requests go through this one
 * function so identical (text, keywords, k) always yield identical bytes,
 * which is what makes history revert exact.
 */
export function buildSearchBody(freeText: string, keywords: readonly string[], k: number): string {
  return JSON.stringify({ free_text: freeText, keywords, k });
}

export class SearchClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = globalThis.fetch.bind(globalThis),
  ) {}

  /** POST a pre-serialized body; the caller owns its exact bytes. */
  async search(body: string, signal?: AbortSignal): Promise<SearchResponse> {
    const res = await this.fetchImpl(`${this.baseUrl}/v1/search`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body,
      signal,
    });
    if (!res.ok) {
      throw new ServiceError(res.status, await res.text());
    }
    return (await res.json()) as SearchResponse;
  }

  async imageMeta(imageId: string): Promise<ImageMeta> {
    const res = await this.fetchImpl(`${this.baseUrl}/v1/images/${encodeURIComponent(imageId)}/meta`);
    if (!res.ok) {
      throw new ServiceError(res.status, await res.text());
    }
    return (await res.json()) as ImageMeta;
  }

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/v1/images/${encodeURIComponent(imageId)}/file`;
  }
}
