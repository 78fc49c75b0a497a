/**
 * Annotation workbench wiring: draw a box over the image, describe the
 * sign's attributes, review the ranked candidate palette, select or flag
 * missing, submit.
 *
 * Attribute options come exclusively from the service's vocabulary
 * endpoint; the palette preserves service order; at most one candidates
 * request is in flight (newer requests cancel older ones); submissions
 * carry an idempotency key so a double click creates one record.
 */

import { AnnotationApi, ApiError } from "./api.js";
import { boxToArray, dragToBox } from "./bbox.js";
import { composeQuery, mandatoryComplete } from "./queryBuilder.js";
import { renderPalette } from "./palette.js";
import {
  initialState,
  newIdempotencyKey,
  submissionSignId,
  submitEnabled,
  UiSessionState,
} from "./state.js";
import type { AnnotationRecord, Box, CandidateResponse, Vocabularies } from "./types.js";

export type PatchExtractor = (box: Box) => Promise<string | null>;

export interface AppOptions {
  root: HTMLElement;
  api: AnnotationApi;
  imageRef: string;
  region: string;
  imageWidth: number;
  imageHeight: number;
  /** Crops the box from the subject image as base64 PNG; null skips the
   * patch (the server then answers in knowledge-graph order). */
  patchExtractor?: PatchExtractor;
}

export class AnnotatorApp {
  readonly state: UiSessionState = initialState();
  readonly elements: Record<string, HTMLElement> = {};

  private readonly options: AppOptions;
  private readonly api: AnnotationApi;
  private readonly doc: Document;
  private dragStart: { x: number; y: number } | null = null;
  private abortController: AbortController | null = null;
  private vocabularies: Vocabularies = {};
  private patchExtractor: PatchExtractor | null;

  constructor(options: AppOptions) {
    this.options = options;
    this.api = options.api;
    this.doc = options.root.ownerDocument;
    this.patchExtractor = options.patchExtractor ?? null;
  }

  setPatchExtractor(extractor: PatchExtractor): void {
    this.patchExtractor = extractor;
  }

  async init(): Promise<void> {
    this.vocabularies = await this.api.vocabularies();
    this.buildDom();
    const session = await this.api.createSession(
      this.options.imageRef,
      this.options.region,
    );
    this.state.sessionId = session.id;
  }

  // -- DOM -------------------------------------------------------------

  private el(tag: string, className: string, parent: HTMLElement): HTMLElement {
    const node = this.doc.createElement(tag);
    node.className = className;
    parent.appendChild(node);
    return node;
  }

  private buildDom(): void {
    const root = this.options.root;
    root.textContent = "";

    const pane = this.el("div", "image-pane", root);
    pane.style.position = "relative";
    pane.style.width = `${this.options.imageWidth}px`;
    pane.style.height = `${this.options.imageHeight}px`;
    const image = this.el("img", "subject", pane) as HTMLImageElement;
    image.src = this.options.imageRef;
    image.draggable = false;
    const overlay = this.el("div", "bbox-overlay", pane);
    overlay.style.position = "absolute";
    overlay.style.display = "none";

    pane.addEventListener("pointerdown", (event) => this.onPointerDown(event));
    pane.addEventListener("pointermove", (event) => this.onPointerMove(event));
    pane.addEventListener("pointerup", (event) => this.onPointerUp(event));

    const form = this.el("form", "attr-form", root);
    form.addEventListener("submit", (event) => event.preventDefault());
    this.addSelect(form, "plate", this.vocabularies["plate"] ?? [], true);
    this.addSelect(form, "bg", this.vocabularies["color"] ?? [], true);
    this.addSelect(form, "fg", this.vocabularies["color"] ?? [], false);
    this.addSelect(form, "border", this.vocabularies["color"] ?? [], false);
    this.addSelect(form, "printed", this.vocabularies["printed"] ?? [], false, true);
    this.addSelect(form, "icon", this.vocabularies["icon"] ?? [], false, true);

    const text = this.doc.createElement("input");
    text.name = "text";
    text.placeholder = "printed text";
    form.appendChild(text);
    const contains = this.doc.createElement("input");
    contains.type = "checkbox";
    contains.name = "textContains";
    form.appendChild(contains);

    const fetchButton = this.doc.createElement("button");
    fetchButton.type = "button";
    fetchButton.id = "get-candidates";
    fetchButton.textContent = "find candidates";
    fetchButton.addEventListener("click", () => void this.requestCandidates());
    form.appendChild(fetchButton);

    const palette = this.el("div", "palette", root);
    const controls = this.el("div", "controls", root);
    const missing = this.doc.createElement("input");
    missing.type = "checkbox";
    missing.id = "missing-sign";
    missing.addEventListener("change", () => {
      this.state.missingSign = missing.checked;
      if (missing.checked) {
        this.state.defaultTemplateId = this.state.selection;
      } else {
        this.state.defaultTemplateId = null;
      }
      this.refreshSubmit();
    });
    controls.appendChild(missing);

    const submit = this.doc.createElement("button");
    submit.type = "button";
    submit.id = "submit";
    submit.textContent = "submit annotation";
    submit.addEventListener("click", () => void this.submit());
    controls.appendChild(submit);

    const status = this.el("div", "status", root);
    const confirmation = this.el("div", "confirmation", root);

    Object.assign(this.elements, {
      pane, image, overlay, form, palette, controls, missing, submit,
      status, confirmation, text, contains, fetchButton,
    });
    this.refreshSubmit();
  }

  private addSelect(
    form: HTMLElement,
    name: string,
    options: string[],
    mandatory: boolean,
    multiple = false,
  ): void {
    const select = this.doc.createElement("select");
    select.name = name;
    select.multiple = multiple;
    if (!multiple) {
      const blank = this.doc.createElement("option");
      blank.value = "";
      blank.textContent = mandatory ? `${name} (required)` : `${name} (any)`;
      select.appendChild(blank);
    }
    for (const value of options) {
      const option = this.doc.createElement("option");
      option.value = value;
      option.textContent = value;
      select.appendChild(option);
    }
    select.addEventListener("change", () => {
      this.readForm();
      this.refreshSubmit();
    });
    form.appendChild(select);
    this.elements[`select-${name}`] = select;
  }

  readForm(): void {
    const get = (name: string) =>
      (this.elements[`select-${name}`] as HTMLSelectElement | undefined)?.value ?? "";
    const getMulti = (name: string) => {
      const select = this.elements[`select-${name}`] as HTMLSelectElement | undefined;
      if (!select) return [];
      return Array.from(select.selectedOptions).map((o) => o.value).filter(Boolean);
    };
    const text = this.elements.text as HTMLInputElement;
    const contains = this.elements.contains as HTMLInputElement;
    this.state.form = {
      plate: get("plate"),
      bg: get("bg"),
      fg: get("fg") || undefined,
      border: get("border") || undefined,
      printed: getMulti("printed"),
      icons: getMulti("icon"),
      text: text.value || undefined,
      textContains: contains.checked,
    };
  }

  // -- bounding box ------------------------------------------------------

  private paneCoordinates(event: PointerEvent): { x: number; y: number } {
    const rect = this.elements.pane.getBoundingClientRect();
    return { x: event.clientX - rect.left, y: event.clientY - rect.top };
  }

  private onPointerDown(event: PointerEvent): void {
    this.dragStart = this.paneCoordinates(event);
  }

  private onPointerMove(event: PointerEvent): void {
    if (!this.dragStart) return;
    const current = this.paneCoordinates(event);
    const box = dragToBox(
      this.dragStart.x, this.dragStart.y, current.x, current.y,
      this.options.imageWidth, this.options.imageHeight,
    );
    if (box) this.showOverlay(box);
  }

  private onPointerUp(event: PointerEvent): void {
    if (!this.dragStart) return;
    const current = this.paneCoordinates(event);
    const box = dragToBox(
      this.dragStart.x, this.dragStart.y, current.x, current.y,
      this.options.imageWidth, this.options.imageHeight,
    );
    this.dragStart = null;
    this.state.bbox = box;
    if (box) {
      this.showOverlay(box);
    } else {
      this.elements.overlay.style.display = "none";
    }
    this.refreshSubmit();
  }

  private showOverlay(box: Box): void {
    const overlay = this.elements.overlay;
    overlay.style.display = "block";
    overlay.style.left = `${box.x}px`;
    overlay.style.top = `${box.y}px`;
    overlay.style.width = `${box.w}px`;
    overlay.style.height = `${box.h}px`;
  }

  // -- candidates ----------------------------------------------------------

  async requestCandidates(): Promise<CandidateResponse | null> {
    this.readForm();
    if (!this.state.sessionId || !this.state.bbox) {
      this.setStatus("draw a bounding box first");
      return null;
    }
    if (!mandatoryComplete(this.state.form)) {
      this.setStatus("plate shape and background color are required");
      return null;
    }
    this.abortController?.abort();
    const controller = new AbortController();
    this.abortController = controller;
    this.setStatus("searching…");

    // snapshot the request inputs: later form edits must not leak into an
    // already-issued request
    const sessionId = this.state.sessionId;
    const bbox = this.state.bbox;
    const query = composeQuery(this.state.form);

    let patch: string | null = null;
    if (this.patchExtractor) {
      patch = await this.patchExtractor(bbox);
    }
    try {
      const response = await this.api.getCandidates(
        sessionId,
        boxToArray(bbox),
        query,
        patch ?? undefined,
        controller.signal,
      );
      if (this.abortController !== controller) return null; // superseded
      this.state.candidates = response.candidates;
      this.state.source = response.source;
      this.state.kgSize = response.kg_size;
      this.state.warning = response.warning ?? null;
      this.state.selection = null;
      this.state.defaultTemplateId = null;
      renderPalette(
        this.elements.palette,
        response,
        (signId) => this.api.prototypeUrl(signId),
        {
          onSelect: (signId) => this.select(signId),
          onFlagMissing: () => this.flagMissing(),
        },
      );
      this.setStatus("");
      this.refreshSubmit();
      return response;
    } catch (error) {
      if ((error as Error).name === "AbortError") return null;
      if (this.abortController !== controller) return null;
      this.renderError(error as Error);
      return null;
    }
  }

  private renderError(error: Error): void {
    const status = this.elements.status;
    status.textContent = "";
    status.dataset.error = "true";
    const message = this.doc.createElement("span");
    message.textContent =
      error instanceof ApiError && error.offset !== undefined
        ? `${error.message} (offset ${error.offset})`
        : `service error: ${error.message}`;
    status.appendChild(message);
    const retry = this.doc.createElement("button");
    retry.type = "button";
    retry.className = "retry";
    retry.textContent = "retry";
    retry.addEventListener("click", () => void this.requestCandidates());
    status.appendChild(retry);
  }

  private setStatus(text: string): void {
    const status = this.elements.status;
    delete status.dataset.error;
    status.textContent = text;
  }

  select(signId: string): void {
    this.state.selection = signId;
    if (this.state.missingSign) this.state.defaultTemplateId = signId;
    for (const card of Array.from(
      this.elements.palette.querySelectorAll<HTMLElement>(".candidate"),
    )) {
      card.classList.toggle("selected", card.dataset.signId === signId);
    }
    this.refreshSubmit();
  }

  flagMissing(): void {
    this.state.missingSign = true;
    (this.elements.missing as HTMLInputElement).checked = true;
    this.state.defaultTemplateId = this.state.selection;
    if (this.state.candidates.length === 0) {
      // nothing matched the full query: offer common-attribute templates
      // (plate + background only) to pick the default from
      void this.requestDefaultTemplates();
    }
    this.refreshSubmit();
  }

  /** Palette of templates matching only the mandatory attributes, used to
   * choose the default template for a missing-sign record. */
  async requestDefaultTemplates(): Promise<CandidateResponse | null> {
    if (!this.state.sessionId || !this.state.bbox) return null;
    this.readForm();
    if (!mandatoryComplete(this.state.form)) return null;
    const reduced = { plate: this.state.form.plate, bg: this.state.form.bg };
    try {
      const response = await this.api.getCandidates(
        this.state.sessionId,
        boxToArray(this.state.bbox),
        composeQuery(reduced),
      );
      this.state.candidates = response.candidates;
      renderPalette(
        this.elements.palette,
        response,
        (signId) => this.api.prototypeUrl(signId),
        {
          onSelect: (signId) => this.select(signId),
          onFlagMissing: () => this.flagMissing(),
        },
      );
      return response;
    } catch (error) {
      this.renderError(error as Error);
      return null;
    }
  }

  private refreshSubmit(): void {
    (this.elements.submit as HTMLButtonElement).disabled = !submitEnabled(this.state);
  }

  // -- submission ------------------------------------------------------

  async submit(): Promise<AnnotationRecord | null> {
    if (!submitEnabled(this.state) || !this.state.sessionId || !this.state.bbox) {
      return null;
    }
    if (this.state.idempotencyKey === null) {
      this.state.idempotencyKey = newIdempotencyKey();
    }
    const signId = submissionSignId(this.state);
    if (signId === null) return null;
    try {
      const record = await this.api.submitAnnotation(
        this.state.sessionId,
        boxToArray(this.state.bbox),
        signId,
        this.state.missingSign,
        this.state.idempotencyKey,
      );
      this.showConfirmation(record);
      this.resetForNext();
      return record;
    } catch (error) {
      this.renderError(error as Error);
      return null;
    }
  }

  private showConfirmation(record: AnnotationRecord): void {
    const confirmation = this.elements.confirmation;
    confirmation.textContent = "";
    const heading = this.doc.createElement("div");
    heading.className = "confirm-heading";
    heading.textContent = record.missing_sign
      ? `recorded ${record.sign_id} with a missing-sign flag`
      : `recorded ${record.sign_id}`;
    confirmation.appendChild(heading);
    const enrichment = this.doc.createElement("dl");
    enrichment.className = "enrichment";
    for (const [key, value] of Object.entries(record.enrichment)) {
      const term = this.doc.createElement("dt");
      term.textContent = key;
      const detail = this.doc.createElement("dd");
      detail.textContent = Array.isArray(value) ? value.join(", ") : String(value);
      enrichment.appendChild(term);
      enrichment.appendChild(detail);
    }
    confirmation.appendChild(enrichment);
  }

  /** Clear per-sign state; attribute selections persist for the next box. */
  private resetForNext(): void {
    this.state.bbox = null;
    this.state.selection = null;
    this.state.missingSign = false;
    this.state.defaultTemplateId = null;
    this.state.idempotencyKey = null;
    this.state.candidates = [];
    (this.elements.missing as HTMLInputElement).checked = false;
    this.elements.overlay.style.display = "none";
    this.elements.palette.textContent = "";
    this.refreshSubmit();
  }
}
