/**
 * Candidate palette rendering. Candidates appear exactly in the order the
 * service returned them; the client never re-sorts.
 */

import type { CandidateResponse } from "./types.js";

export interface PaletteCallbacks {
  onSelect: (signId: string) => void;
  onFlagMissing: () => void;
}

export function renderPalette(
  container: HTMLElement,
  response: CandidateResponse,
  prototypeUrl: (signId: string) => string,
  callbacks: PaletteCallbacks,
): void {
  container.textContent = "";

  const status = container.ownerDocument.createElement("div");
  status.className = "palette-status";
  status.dataset.source = response.source;
  status.dataset.kgSize = String(response.kg_size);
  status.textContent =
    `${response.kg_size} candidates from the knowledge graph` +
    (response.source === "kg+vpe" ? ", re-ranked by the encoder" : "");
  if (response.warning) {
    status.textContent += ` (warning: ${response.warning})`;
    status.dataset.warning = response.warning;
  }
  container.appendChild(status);

  const list = container.ownerDocument.createElement("div");
  list.className = "palette-list";
  container.appendChild(list);

  for (const entry of response.candidates) {
    const card = container.ownerDocument.createElement("button");
    card.type = "button";
    card.className = "candidate";
    card.dataset.signId = entry.sign_id;

    const thumb = container.ownerDocument.createElement("img");
    thumb.src = prototypeUrl(entry.sign_id);
    thumb.alt = entry.sign_id;
    thumb.width = 64;
    thumb.height = 64;
    card.appendChild(thumb);

    const label = container.ownerDocument.createElement("span");
    label.textContent =
      entry.score !== undefined
        ? `${entry.sign_id} (${entry.score.toFixed(2)})`
        : entry.sign_id;
    card.appendChild(label);

    card.addEventListener("click", () => callbacks.onSelect(entry.sign_id));
    list.appendChild(card);
  }

  if (response.candidates.length === 0) {
    const empty = container.ownerDocument.createElement("div");
    empty.className = "palette-empty";
    empty.textContent = "no match";
    const flag = container.ownerDocument.createElement("button");
    flag.type = "button";
    flag.className = "flag-missing";
    flag.textContent = "flag missing sign";
    flag.addEventListener("click", () => callbacks.onFlagMissing());
    empty.appendChild(flag);
    container.appendChild(empty);
  }
}

export function paletteOrder(container: HTMLElement): string[] {
  return Array.from(container.querySelectorAll<HTMLElement>(".candidate")).map(
    (el) => el.dataset.signId ?? "",
  );
}
