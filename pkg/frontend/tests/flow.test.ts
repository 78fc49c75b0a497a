/**
 * Scripted end-to-end flow in a DOM: draw bbox -> set attributes ->
 * request candidates -> select -> submit, plus cancellation, error
 * rendering, and the missing-sign path.
 */

import { beforeEach, describe, expect, it } from "vitest";

import { AnnotationApi } from "../src/api.js";
import { AnnotatorApp } from "../src/app.js";
import { paletteOrder } from "../src/palette.js";
import { MockService } from "./mockService.js";

function pointer(type: string, x: number, y: number): MouseEvent {
  return new MouseEvent(type, { clientX: x, clientY: y, bubbles: true });
}

async function makeApp(service: MockService): Promise<AnnotatorApp> {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const app = new AnnotatorApp({
    root,
    api: new AnnotationApi("http://mock", service.fetch),
    imageRef: "frame.png",
    region: "US",
    imageWidth: 640,
    imageHeight: 480,
    patchExtractor: async () => "ZmFrZS1wbmc=",
  });
  await app.init();
  return app;
}

function drawBox(app: AnnotatorApp, x0: number, y0: number, x1: number, y1: number) {
  const pane = app.elements.pane;
  pane.dispatchEvent(pointer("pointerdown", x0, y0));
  pane.dispatchEvent(pointer("pointermove", (x0 + x1) / 2, (y0 + y1) / 2));
  pane.dispatchEvent(pointer("pointerup", x1, y1));
}

function setSelect(app: AnnotatorApp, name: string, value: string) {
  const select = app.elements[`select-${name}`] as HTMLSelectElement;
  select.value = value;
  select.dispatchEvent(new Event("change", { bubbles: true }));
}

describe("annotation flow", () => {
  let service: MockService;
  let app: AnnotatorApp;

  beforeEach(async () => {
    document.body.innerHTML = "";
    service = new MockService();
    app = await makeApp(service);
  });

  it("drives bbox -> attributes -> candidates -> select -> submit", async () => {
    drawBox(app, 100, 100, 50, 50); // reverse drag normalizes
    expect(app.state.bbox).toEqual({ x: 50, y: 50, w: 50, h: 50 });
    const overlay = app.elements.overlay;
    expect(overlay.style.left).toBe("50px");
    expect(overlay.style.top).toBe("50px");
    expect(overlay.style.width).toBe("50px");
    expect(overlay.style.height).toBe("50px");

    setSelect(app, "plate", "diamond");
    setSelect(app, "bg", "yellow");
    const response = await app.requestCandidates();
    expect(response?.source).toBe("kg+vpe");

    // palette preserves service order exactly (not alphabetical)
    expect(paletteOrder(app.elements.palette)).toEqual(["s-07", "s-02", "s-09"]);
    const badge = app.elements.palette.querySelector<HTMLElement>(".palette-status")!;
    expect(badge.dataset.source).toBe("kg+vpe");
    expect(badge.dataset.kgSize).toBe("23");

    // the candidates request carried the composed query and the patch
    const post = service.posts.find((p) => p.path.endsWith("/candidates"))!;
    expect(post.body.q).toBe("plate=diamond AND bg=yellow");
    expect(post.body.patch).toBe("ZmFrZS1wbmc=");

    const submitButton = app.elements.submit as HTMLButtonElement;
    expect(submitButton.disabled).toBe(true);
    (app.elements.palette.querySelectorAll<HTMLElement>(".candidate")[1]).click();
    expect(app.state.selection).toBe("s-02");
    expect(submitButton.disabled).toBe(false);

    const record = await app.submit();
    expect(record?.sign_id).toBe("s-02");
    expect(record?.missing_sign).toBe(false);
    expect(service.records).toHaveLength(1);

    // confirmation shows the enrichment returned by the service
    const confirmation = app.elements.confirmation;
    expect(confirmation.textContent).toContain("recorded s-02");
    expect(confirmation.textContent).toContain("plate_shape");
    expect(confirmation.textContent).toContain("diamond");

    // reset for the next sign
    expect(app.state.bbox).toBeNull();
    expect(app.state.selection).toBeNull();
    expect((app.elements.submit as HTMLButtonElement).disabled).toBe(true);
  });

  it("creates exactly one record on double submit", async () => {
    drawBox(app, 10, 10, 60, 60);
    setSelect(app, "plate", "diamond");
    setSelect(app, "bg", "yellow");
    await app.requestCandidates();
    app.select("s-07");

    const first = app.submit();
    const second = app.submit(); // double click before the first resolves
    await Promise.all([first, second]);
    expect(service.records).toHaveLength(1);

    const submits = service.posts.filter((p) => p.path.endsWith("/annotations"));
    const keys = new Set(submits.map((p) => p.body.idempotency_key));
    expect(keys.size).toBe(1); // both clicks shared one idempotency key
  });

  it("blocks candidate requests without mandatory attributes", async () => {
    drawBox(app, 10, 10, 60, 60);
    const result = await app.requestCandidates();
    expect(result).toBeNull();
    expect(service.posts.filter((p) => p.path.endsWith("/candidates"))).toHaveLength(0);
    expect(app.elements.status.textContent).toContain("required");
  });

  it("cancels the older of two overlapping requests", async () => {
    drawBox(app, 10, 10, 60, 60);
    setSelect(app, "plate", "diamond");
    setSelect(app, "bg", "yellow");

    const stalled = app.requestCandidates();
    setSelect(app, "bg", "red");
    const fresh = app.requestCandidates();

    const [first, second] = await Promise.all([stalled, fresh]);
    expect(first).toBeNull();
    expect(second?.kg_size).toBe(23);
    expect(service.aborted).toEqual(["plate=diamond AND bg=yellow"]);
    expect(paletteOrder(app.elements.palette)).toEqual(["s-07", "s-02", "s-09"]);
  });

  it("renders service errors inline with a retry affordance", async () => {
    drawBox(app, 10, 10, 60, 60);
    setSelect(app, "plate", "diamond");
    setSelect(app, "bg", "yellow");
    service.failNextWith(400, {
      error: "query-syntax", message: "expected a value", offset: 17,
    });
    const result = await app.requestCandidates();
    expect(result).toBeNull();
    const status = app.elements.status;
    expect(status.dataset.error).toBe("true");
    expect(status.textContent).toContain("offset 17");
    expect(status.querySelector(".retry")).not.toBeNull();
  });

  it("offers the missing-sign path on an empty result", async () => {
    drawBox(app, 10, 10, 60, 60);
    setSelect(app, "plate", "circle");
    setSelect(app, "bg", "blue");
    service.candidateResponse = { candidates: [], source: "kg-only", kg_size: 0 };
    await app.requestCandidates();

    const flag = app.elements.palette.querySelector<HTMLElement>(".flag-missing");
    expect(flag).not.toBeNull();

    // flagging fetches common-attribute default templates to choose from
    service.candidateResponse = {
      candidates: [
        { sign_id: "default-1", prototype_image_ref: "p/d1.png" },
        { sign_id: "default-2", prototype_image_ref: "p/d2.png" },
      ],
      source: "kg-only",
      kg_size: 2,
    };
    flag!.click();
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(app.state.missingSign).toBe(true);
    expect(paletteOrder(app.elements.palette)).toEqual(["default-1", "default-2"]);

    const defaultsQuery = service.posts
      .filter((p) => p.path.endsWith("/candidates"))
      .at(-1)!;
    expect(defaultsQuery.body.q).toBe("plate=circle AND bg=blue");

    app.select("default-1");
    expect(app.state.defaultTemplateId).toBe("default-1");
    const record = await app.submit();
    expect(record?.missing_sign).toBe(true);
    const submitted = service.posts.filter((p) => p.path.endsWith("/annotations"));
    expect(submitted[0].body.missing_sign).toBe(true);
    expect(submitted[0].body.sign_id).toBe("default-1");
  });

  it("builds attribute options from the service vocabularies", () => {
    const plateSelect = app.elements["select-plate"] as HTMLSelectElement;
    const values = Array.from(plateSelect.options).map((o) => o.value).filter(Boolean);
    expect(values).toEqual(["octagon", "diamond", "rectangle", "circle",
                            "triangle-down"]);
  });
});
