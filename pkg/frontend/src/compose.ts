/**
 * Query composition shared with the backend: free text first, then the
 * keyword chips, all joined with ", ". Must stay in lockstep with the
 * server's compose_query so UI requests and evaluation queries are the same
 * function of (text, keywords).
 */
export function composeQuery(freeText: string, keywords: readonly string[]): string {
  const parts = freeText !== "" ? [freeText, ...keywords] : [...keywords];
  return parts.join(", ");
}
