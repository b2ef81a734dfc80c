/**
 * Editing session over a loaded splat file.
 *
 * Tracks the set of deleted splat indices plus an undo stack of index sets,
 * so deletes are reversible and export is just "write the file minus the
 * deleted records".
 */

import { OrbitCamera, defaultCamera, project } from "./camera.js";
import { SplatFile, parseSplatPly } from "./ply.js";
import { RenderStyle, renderSplats } from "./render.js";

export type SelectMode = "add" | "remove";

export interface Rect {
  /** Pixel bounds, inclusive of any projected center inside them. */
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export class EditorSession {
  file: SplatFile;
  deleted: Set<number>;
  selected: Set<number>;
  /** Each entry is the set of indices removed by one delete operation. */
  undoStack: number[][];
  view: OrbitCamera;

  constructor(file: SplatFile, width = 800, height = 600) {
    this.file = file;
    this.deleted = new Set();
    this.selected = new Set();
    this.undoStack = [];
    this.view = defaultCamera(width, height);
  }

  static load(bytes: Uint8Array, width = 800, height = 600): EditorSession {
    return new EditorSession(parseSplatPly(bytes), width, height);
  }

  /** Number of splats still in the scene. */
  get remaining(): number {
    return this.file.count - this.deleted.size;
  }

  renderView(style: RenderStyle = {}): Float32Array {
    return renderSplats(this.file, this.view, this.deleted, {
      selected: this.selected,
      ...style,
    });
  }

  /**
   * Select or deselect every surviving splat whose projected center falls
   * inside `rect` in the current view.  Returns how many changed state.
   */
  boxSelect(rect: Rect, mode: SelectMode = "add"): number {
    const xMin = Math.min(rect.x0, rect.x1);
    const xMax = Math.max(rect.x0, rect.x1);
    const yMin = Math.min(rect.y0, rect.y1);
    const yMax = Math.max(rect.y0, rect.y1);
    let changed = 0;
    for (let i = 0; i < this.file.count; i++) {
      if (this.deleted.has(i)) continue;
      const p = project(this.view, this.file.position(i));
      if (p.z <= 0) continue;
      if (p.u < xMin || p.u > xMax || p.v < yMin || p.v > yMax) continue;
      if (mode === "add") {
        if (!this.selected.has(i)) {
          this.selected.add(i);
          changed++;
        }
      } else if (this.selected.delete(i)) {
        changed++;
      }
    }
    return changed;
  }

  clearSelection(): void {
    this.selected.clear();
  }

  /** Delete the current selection; returns how many splats were removed. */
  deleteSelection(): number {
    if (this.selected.size === 0) return 0;
    const batch = [...this.selected].sort((a, b) => a - b);
    for (const i of batch) this.deleted.add(i);
    this.undoStack.push(batch);
    this.selected.clear();
    return batch.length;
  }

  /** Restore the most recent delete; returns how many splats came back. */
  undo(): number {
    const batch = this.undoStack.pop();
    if (batch === undefined) return 0;
    for (const i of batch) this.deleted.delete(i);
    return batch.length;
  }

  /**
   * Serialize the surviving splats as a binary PLY.  Record order and every
   * 32-bit value are preserved from the loaded file.
   */
  export(): Uint8Array {
    return this.file.serialize((i) => !this.deleted.has(i));
  }
}
