/**
 * Browser entry point: wires the editor session to a canvas.
 *
 * Drag orbits the camera, shift-drag box-selects (alt-shift-drag removes
 * from the selection), Delete/Backspace removes the selection, Ctrl-Z
 * undoes, and the toolbar buttons load/export PLY files.
 */

import { EditorSession, Rect } from "./session.js";

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el;
}

let session: EditorSession | null = null;

const canvas = $("viewport") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const status = $("status");

function setStatus(text: string): void {
  status.textContent = text;
}

function redraw(): void {
  if (session === null) return;
  session.view.width = canvas.width;
  session.view.height = canvas.height;
  const rgb = session.renderView();
  const img = ctx.createImageData(canvas.width, canvas.height);
  for (let p = 0; p < canvas.width * canvas.height; p++) {
    img.data[4 * p] = Math.round(255 * Math.min(1, rgb[3 * p]));
    img.data[4 * p + 1] = Math.round(255 * Math.min(1, rgb[3 * p + 1]));
    img.data[4 * p + 2] = Math.round(255 * Math.min(1, rgb[3 * p + 2]));
    img.data[4 * p + 3] = 255;
  }
  ctx.putImageData(img, 0, 0);
  setStatus(
    `${session.remaining}/${session.file.count} splats, ` +
    `${session.selected.size} selected, ${session.deleted.size} deleted`,
  );
}

($("file-input") as HTMLInputElement).addEventListener("change", async (ev) => {
  const input = ev.target as HTMLInputElement;
  const file = input.files?.[0];
  if (file === undefined) return;
  try {
    session = EditorSession.load(
      new Uint8Array(await file.arrayBuffer()), canvas.width, canvas.height,
    );
    for (const w of session.file.warnings) console.warn(w.message);
    redraw();
  } catch (err) {
    setStatus(`load failed: ${err}`);
  }
});

$("export-btn").addEventListener("click", () => {
  if (session === null) return;
  const buf = session.export().slice();
  const blob = new Blob([buf.buffer as ArrayBuffer], { type: "application/octet-stream" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = "edited.ply";
  a.click();
  URL.revokeObjectURL(a.href);
});

$("delete-btn").addEventListener("click", () => {
  if (session !== null && session.deleteSelection() > 0) redraw();
});

$("undo-btn").addEventListener("click", () => {
  if (session !== null && session.undo() > 0) redraw();
});

// --- pointer interaction -------------------------------------------------

interface Drag {
  mode: "orbit" | "select";
  startX: number;
  startY: number;
  lastX: number;
  lastY: number;
  remove: boolean;
}

let drag: Drag | null = null;

canvas.addEventListener("pointerdown", (ev) => {
  if (session === null) return;
  canvas.setPointerCapture(ev.pointerId);
  drag = {
    mode: ev.shiftKey ? "select" : "orbit",
    startX: ev.offsetX,
    startY: ev.offsetY,
    lastX: ev.offsetX,
    lastY: ev.offsetY,
    remove: ev.altKey,
  };
});

canvas.addEventListener("pointermove", (ev) => {
  if (session === null || drag === null) return;
  if (drag.mode === "orbit") {
    session.view.azimuth -= 0.01 * (ev.offsetX - drag.lastX);
    session.view.elevation = Math.min(
      1.5, Math.max(-1.5, session.view.elevation + 0.01 * (ev.offsetY - drag.lastY)),
    );
    redraw();
  } else {
    redraw();
    ctx.strokeStyle = drag.remove ? "#f66" : "#6cf";
    ctx.strokeRect(
      drag.startX, drag.startY,
      ev.offsetX - drag.startX, ev.offsetY - drag.startY,
    );
  }
  drag.lastX = ev.offsetX;
  drag.lastY = ev.offsetY;
});

canvas.addEventListener("pointerup", (ev) => {
  if (session === null || drag === null) return;
  if (drag.mode === "select") {
    const rect: Rect = {
      x0: drag.startX, y0: drag.startY, x1: ev.offsetX, y1: ev.offsetY,
    };
    session.boxSelect(rect, drag.remove ? "remove" : "add");
    redraw();
  }
  drag = null;
});

canvas.addEventListener("wheel", (ev) => {
  if (session === null) return;
  ev.preventDefault();
  session.view.distance *= Math.exp(0.001 * ev.deltaY);
  redraw();
});

window.addEventListener("keydown", (ev) => {
  if (session === null) return;
  if (ev.key === "Delete" || ev.key === "Backspace") {
    if (session.deleteSelection() > 0) redraw();
  } else if (ev.key === "z" && (ev.ctrlKey || ev.metaKey)) {
    if (session.undo() > 0) redraw();
  } else if (ev.key === "Escape") {
    session.clearSelection();
    redraw();
  }
});

setStatus("load a splat PLY to begin");
