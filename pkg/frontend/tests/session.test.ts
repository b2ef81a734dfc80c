import { describe, expect, it } from "vitest";

import { EditorSession } from "../src/session.js";
import { buildPly, cloudRecords, record } from "./helpers.js";

/** Session over a 3x3 grid of splats in the y/z plane, camera on +x axis. */
function gridSession(): EditorSession {
  const recs = [];
  for (const y of [-1, 0, 1]) {
    for (const z of [-1, 0, 1]) {
      recs.push(record({ position: [0, y, z] }));
    }
  }
  const s = EditorSession.load(buildPly(recs), 200, 200);
  s.view.azimuth = 0;
  s.view.elevation = 0;
  s.view.distance = 5;
  s.view.target = [0, 0, 0];
  s.view.focal = 50;
  return s;
}

describe("EditorSession", () => {
  it("box-selects only the splats whose centers project inside the rect", () => {
    const s = gridSession();
    // center of the viewport catches only the middle splat (y=0, z=0)
    const n = s.boxSelect({ x0: 95, y0: 95, x1: 105, y1: 105 });
    expect(n).toBe(1);
    expect([...s.selected]).toEqual([4]);
  });

  it("supports add/remove selection modes and rect corner order", () => {
    const s = gridSession();
    expect(s.boxSelect({ x0: 199, y0: 199, x1: 0, y1: 0 })).toBe(9);
    expect(s.selected.size).toBe(9);
    // selecting again adds nothing
    expect(s.boxSelect({ x0: 0, y0: 0, x1: 199, y1: 199 })).toBe(0);
    // remove the middle splat
    expect(s.boxSelect({ x0: 95, y0: 95, x1: 105, y1: 105 }, "remove")).toBe(1);
    expect(s.selected.size).toBe(8);
    expect(s.selected.has(4)).toBe(false);
  });

  it("ignores empty rects and splats behind the camera", () => {
    const s = gridSession();
    expect(s.boxSelect({ x0: 3, y0: 3, x1: 4, y1: 4 })).toBe(0);
    // aim away so the camera (at x = -15) has the grid behind it
    s.view.target = [-20, 0, 0];
    expect(s.boxSelect({ x0: 0, y0: 0, x1: 199, y1: 199 })).toBe(0);
  });

  it("deletes the selection and restores it with undo, batch by batch", () => {
    const s = gridSession();
    s.boxSelect({ x0: 95, y0: 95, x1: 105, y1: 105 });
    expect(s.deleteSelection()).toBe(1);
    expect(s.remaining).toBe(8);
    expect(s.selected.size).toBe(0);

    s.boxSelect({ x0: 0, y0: 0, x1: 199, y1: 199 });
    expect(s.deleteSelection()).toBe(8);
    expect(s.remaining).toBe(0);
    expect(s.undoStack.length).toBe(2);

    expect(s.undo()).toBe(8);
    expect(s.remaining).toBe(8);
    expect(s.deleted.has(4)).toBe(true);
    expect(s.undo()).toBe(1);
    expect(s.remaining).toBe(9);
    expect(s.undo()).toBe(0); // empty stack is a no-op
  });

  it("does not select or render deleted splats", () => {
    const s = gridSession();
    s.boxSelect({ x0: 95, y0: 95, x1: 105, y1: 105 });
    s.deleteSelection();
    expect(s.boxSelect({ x0: 0, y0: 0, x1: 199, y1: 199 })).toBe(8);
    const img = s.renderView();
    expect(img.length).toBe(200 * 200 * 3);
  });

  it("deleting nothing is a no-op that leaves the undo stack alone", () => {
    const s = gridSession();
    expect(s.deleteSelection()).toBe(0);
    expect(s.undoStack.length).toBe(0);
  });

  it("exports the untouched file bitwise when nothing was edited", () => {
    const bytes = buildPly(cloudRecords(25));
    const s = EditorSession.load(bytes);
    expect(Buffer.from(s.export()).equals(Buffer.from(bytes))).toBe(true);
  });

  it("export drops exactly the deleted records and counts reconcile", () => {
    const recs = cloudRecords(25);
    const s = EditorSession.load(buildPly(recs));
    s.selected = new Set([2, 7, 11]);
    s.deleteSelection();
    const out = EditorSession.load(s.export());
    expect(out.file.count).toBe(22);
    expect(s.remaining).toBe(22);
    let k = 0;
    for (let i = 0; i < 25; i++) {
      if ([2, 7, 11].includes(i)) continue;
      expect(out.file.position(k)).toEqual(s.file.position(i));
      k++;
    }
  });
});
