/**
 * Bit-preserving reader/writer for binary splat PLY files.
 *
 * The file is kept as a header description plus one raw byte record per
 * vertex.  Edits only ever drop whole records, so exporting writes back the
 * surviving records untouched -- every 32-bit float survives bit-exact.
 */

export class PlyError extends Error {}

/** Property names every splat PLY must carry, in no particular order. */
export const REQUIRED_PROPERTIES: readonly string[] = (() => {
  const names = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"];
  for (let i = 0; i < 45; i++) names.push(`f_rest_${i}`);
  names.push("opacity", "scale_0", "scale_1", "scale_2");
  for (let i = 0; i < 4; i++) names.push(`rot_${i}`);
  return names;
})();

const TYPE_SIZES: Record<string, number> = {
  char: 1, uchar: 1, int8: 1, uint8: 1,
  short: 2, ushort: 2, int16: 2, uint16: 2,
  int: 4, uint: 4, int32: 4, uint32: 4, float: 4, float32: 4,
  double: 8, float64: 8,
};

export interface PlyProperty {
  name: string;
  type: string;
  /** Byte offset of this property within a vertex record. */
  offset: number;
}

export interface ParseWarning {
  message: string;
}

export class SplatFile {
  /** Number of vertex records. */
  count: number;
  /** Size in bytes of one vertex record. */
  recordSize: number;
  /** All properties present in the file, in declaration order. */
  properties: PlyProperty[];
  /** Raw vertex payload, `count * recordSize` bytes. */
  body: Uint8Array;
  /** Non-fatal oddities found while parsing (e.g. unknown properties). */
  warnings: ParseWarning[];

  private offsets: Map<string, number>;

  constructor(
    count: number,
    properties: PlyProperty[],
    body: Uint8Array,
    warnings: ParseWarning[],
  ) {
    this.count = count;
    this.properties = properties;
    this.body = body;
    this.warnings = warnings;
    this.recordSize = properties.reduce((s, p) => s + TYPE_SIZES[p.type], 0);
    this.offsets = new Map(properties.map((p) => [p.name, p.offset]));
  }

  /** Read one required float32 field of vertex `i`. */
  float(i: number, name: string): number {
    const off = this.offsets.get(name);
    if (off === undefined) throw new PlyError(`no such property: ${name}`);
    const view = new DataView(this.body.buffer, this.body.byteOffset);
    return view.getFloat32(i * this.recordSize + off, true);
  }

  position(i: number): [number, number, number] {
    return [this.float(i, "x"), this.float(i, "y"), this.float(i, "z")];
  }

  /** Serialize with only the records whose index passes `keep`. */
  serialize(keep?: (i: number) => boolean): Uint8Array {
    const indices: number[] = [];
    for (let i = 0; i < this.count; i++) {
      if (keep === undefined || keep(i)) indices.push(i);
    }
    const headerLines = [
      "ply",
      "format binary_little_endian 1.0",
      `element vertex ${indices.length}`,
    ];
    for (const p of this.properties) {
      headerLines.push(`property ${p.type} ${p.name}`);
    }
    headerLines.push("end_header");
    const header = new TextEncoder().encode(headerLines.join("\n") + "\n");
    const out = new Uint8Array(header.length + indices.length * this.recordSize);
    out.set(header, 0);
    let at = header.length;
    for (const i of indices) {
      const start = i * this.recordSize;
      out.set(this.body.subarray(start, start + this.recordSize), at);
      at += this.recordSize;
    }
    return out;
  }
}

function headerEnd(bytes: Uint8Array): number {
  // Find "end_header\n" scanning raw bytes so binary payload is never decoded.
  const marker = new TextEncoder().encode("end_header\n");
  outer: for (let i = 0; i + marker.length <= bytes.length; i++) {
    for (let j = 0; j < marker.length; j++) {
      if (bytes[i + j] !== marker[j]) continue outer;
    }
    return i + marker.length;
  }
  throw new PlyError("malformed PLY: no end_header");
}

/** Parse a binary little-endian splat PLY from raw bytes. */
export function parseSplatPly(bytes: Uint8Array): SplatFile {
  const bodyStart = headerEnd(bytes);
  const headerText = new TextDecoder().decode(bytes.subarray(0, bodyStart));
  const lines = headerText.split("\n").map((l) => l.trim()).filter((l) => l.length > 0);
  if (lines[0] !== "ply") throw new PlyError("not a PLY file: bad magic");

  let count = -1;
  let formatOk = false;
  const properties: PlyProperty[] = [];
  const warnings: ParseWarning[] = [];
  let offset = 0;
  let inVertex = false;

  for (const line of lines.slice(1)) {
    const tok = line.split(/\s+/);
    if (tok[0] === "comment") continue;
    if (tok[0] === "format") {
      if (tok[1] === "ascii") throw new PlyError("ASCII PLY is not supported");
      if (tok[1] !== "binary_little_endian") {
        throw new PlyError(`unsupported PLY format: ${tok[1]}`);
      }
      formatOk = true;
    } else if (tok[0] === "element") {
      inVertex = tok[1] === "vertex";
      if (inVertex) count = parseInt(tok[2], 10);
    } else if (tok[0] === "property" && inVertex) {
      const type = tok[1];
      const name = tok[2];
      const size = TYPE_SIZES[type];
      if (size === undefined) throw new PlyError(`unknown property type: ${type}`);
      if (!REQUIRED_PROPERTIES.includes(name)) {
        warnings.push({ message: `skipping unknown property: ${name}` });
      }
      properties.push({ name, type, offset });
      offset += size;
    }
  }

  if (!formatOk) throw new PlyError("malformed PLY: missing format line");
  if (count < 0) throw new PlyError("malformed PLY: missing vertex element");
  for (const name of REQUIRED_PROPERTIES) {
    if (!properties.some((p) => p.name === name)) {
      throw new PlyError(`missing required property: ${name}`);
    }
  }

  const recordSize = offset;
  const need = count * recordSize;
  const body = bytes.subarray(bodyStart);
  if (body.length < need) {
    throw new PlyError(
      `truncated PLY: need ${need} payload bytes, found ${body.length}`,
    );
  }
  return new SplatFile(count, properties, body.slice(0, need), warnings);
}
