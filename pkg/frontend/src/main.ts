/** Browser entry point: boots the workbench from URL parameters. */

import { AnnotationApi } from "./api.js";
import { AnnotatorApp } from "./app.js";
import type { Box } from "./types.js";

function canvasPatchExtractor(image: HTMLImageElement) {
  return async (box: Box): Promise<string | null> => {
    const canvas = document.createElement("canvas");
    canvas.width = Math.round(box.w);
    canvas.height = Math.round(box.h);
    const context = canvas.getContext("2d");
    if (!context) return null;
    context.drawImage(
      image,
      box.x, box.y, box.w, box.h,
      0, 0, canvas.width, canvas.height,
    );
    const dataUrl = canvas.toDataURL("image/png");
    return dataUrl.split(",", 2)[1] ?? null;
  };
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const apiBase = params.get("api") ?? "http://127.0.0.1:8000";
  const imageRef = params.get("image") ?? "drive/frame0001.png";
  const region = params.get("region") ?? "US";

  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");

  const api = new AnnotationApi(apiBase);
  const app = new AnnotatorApp({
    root,
    api,
    imageRef,
    region,
    imageWidth: Number(params.get("w") ?? 640),
    imageHeight: Number(params.get("h") ?? 480),
  });
  await app.init();

  const image = app.elements.image as HTMLImageElement;
  app.setPatchExtractor(canvasPatchExtractor(image));
}

void boot();
