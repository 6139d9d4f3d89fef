/** DOM wiring: renders controller views, forwards user input back to it. */

import { SearchClient, SearchHit } from "./api.js";
import { ControllerView, SearchController } from "./controller.js";
import { highlightTerms } from "./highlight.js";

const params = new URLSearchParams(window.location.search);
const BASE_URL = params.get("service") ?? "http://127.0.0.1:8080";

const client = new SearchClient(BASE_URL);
const controller = new SearchController(client, { k: 20 });

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

const freeTextInput = $<HTMLInputElement>("free-text");
const chipInput = $<HTMLInputElement>("chip-input");
const searchForm = $<HTMLFormElement>("search-form");
const chipList = $("chip-list");
const resultGrid = $("result-grid");
const statusLine = $("status-line");
const errorBanner = $("error-banner");
const detailPane = $("detail-pane");
const historyList = $("history-list");

let hitsById = new Map<string, SearchHit>();

searchForm.addEventListener("submit", (event) => {
  event.preventDefault();
  controller.setFreeText(freeTextInput.value.trim());
  void controller.submit();
});

chipInput.addEventListener("keydown", (event) => {
  if (event.key === "Enter") {
    event.preventDefault();
    controller.addChip(chipInput.value);
    chipInput.value = "";
  }
});

function renderChips(view: ControllerView): void {
  chipList.replaceChildren();
  for (const chip of view.state.chips) {
    const el = document.createElement("span");
    el.className = "chip";
    el.textContent = chip;
    const remove = document.createElement("button");
    remove.textContent = "×";
    remove.title = `remove "${chip}"`;
    remove.addEventListener("click", () => controller.removeChip(chip));
    el.appendChild(remove);
    chipList.appendChild(el);
  }
}

function renderResults(view: ControllerView): void {
  if (view.results === null) {
    return;
  }
  hitsById = new Map(view.results.map((hit) => [hit.image_id, hit]));
  resultGrid.replaceChildren();
  for (const hit of view.results) {
    const card = document.createElement("figure");
    card.className = "card";
    const img = document.createElement("img");
    img.src = client.imageUrl(hit.image_id);
    img.alt = hit.image_id;
    img.loading = "lazy";
    img.addEventListener("error", () => img.classList.add("missing"));
    const caption = document.createElement("figcaption");
    caption.innerHTML =
      `<b>${hit.image_id}</b> <span class="score">${hit.score.toFixed(4)}</span><br>` +
      highlightTerms(hit.caption_snippet, hit.matched_terms);
    card.append(img, caption);
    card.addEventListener("click", () => void inspect(hit.image_id));
    resultGrid.appendChild(card);
  }
  statusLine.textContent =
    `${view.results.length} shown of ${view.totalCandidates} candidates ` +
    `for "${controller.composedQuery()}"`;
}

async function inspect(imageId: string): Promise<void> {
  const hit = hitsById.get(imageId);
  const terms = hit ? hit.matched_terms : [];
  detailPane.replaceChildren();
  const heading = document.createElement("h2");
  heading.textContent = imageId;
  detailPane.appendChild(heading);
  try {
    const meta = await client.imageMeta(imageId);
    if (meta.labels.length > 0) {
      const labels = document.createElement("p");
      labels.className = "labels";
      labels.textContent = `labels: ${meta.labels.join(", ")}`;
      detailPane.appendChild(labels);
    }
    for (const entry of meta.captions) {
      const p = document.createElement("p");
      const where = entry.rect === null ? "original" : `crop ${entry.j} [${entry.rect.join(", ")}]`;
      p.innerHTML = `<i>${where}:</i> ${highlightTerms(entry.text, terms)}`;
      detailPane.appendChild(p);
    }
  } catch (err) {
    const p = document.createElement("p");
    p.textContent = String(err);
    detailPane.appendChild(p);
  }
}

function renderHistory(view: ControllerView): void {
  historyList.replaceChildren();
  view.state.history.forEach((entry, index) => {
    const item = document.createElement("li");
    const button = document.createElement("button");
    const chips = entry.keywords.length > 0 ? ` + [${entry.keywords.join(", ")}]` : "";
    button.textContent = `${entry.freeText || "(no text)"}${chips} → ${entry.topIds.slice(0, 3).join(", ")}`;
    button.title = "re-run this exact query";
    button.addEventListener("click", () => void controller.revert(index));
    item.appendChild(button);
    historyList.appendChild(item);
  });
}

controller.onChange((view) => {
  freeTextInput.value = view.state.freeText;
  renderChips(view);
  renderResults(view);
  renderHistory(view);
  errorBanner.hidden = view.error === null;
  errorBanner.textContent = view.error ?? "";
  document.body.classList.toggle("pending", view.pending);
});
