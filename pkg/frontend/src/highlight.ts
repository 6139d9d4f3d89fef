/** Escape text and wrap words matching analyzed query terms in <mark>. */

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/**
 * The service reports stemmed terms ("bicycl"); treat a word as matching
 * when the stem is a prefix, with y/i tolerance at the stem boundary
 * ("happi" should light up "happy").
 */
export function wordMatchesTerm(word: string, term: string): boolean {
  const lower = word.toLowerCase();
  if (lower.startsWith(term)) {
    return true;
  }
  if (term.endsWith("i") && lower.startsWith(term.slice(0, -1) + "y")) {
    return true;
  }
  return false;
}

export function highlightTerms(text: string, terms: readonly string[]): string {
  if (terms.length === 0) {
    return escapeHtml(text);
  }
  return text
    .split(/(\p{L}[\p{L}\p{N}]*)/u)
    .map((piece, i) => {
      const escaped = escapeHtml(piece);
      if (i % 2 === 1 && terms.some((t) => wordMatchesTerm(piece, t))) {
        return `<mark>${escaped}</mark>`;
      }
      return escaped;
    })
    .join("");
}
