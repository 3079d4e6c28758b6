// Binary tensor container (.fmap): the wire contract with the analysis
// pipeline. Layout, little-endian:
//   magic "FMAP\0\1" (6 bytes) | manifest length (uint64) | manifest (UTF-8
//   JSON) | raw float32 blobs at manifest offsets (relative to blob start).

export interface FmapTensor {
  name: string;
  shape: number[]; // 1-4 positive dims, row-major data
  data: Float32Array;
}

export type Metadata = Record<string, unknown>;

const MAGIC = Buffer.from([0x46, 0x4d, 0x41, 0x50, 0x00, 0x01]); // "FMAP\0\1"
const FORMAT_VERSION = 1;

function product(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

export function encodeContainer(tensors: FmapTensor[], metadata: Metadata): Buffer {
  const seen = new Set<string>();
  for (const t of tensors) {
    if (seen.has(t.name)) {
      throw new Error(`duplicate tensor name: ${t.name}`);
    }
    seen.add(t.name);
    if (t.shape.length < 1 || t.shape.length > 4 || t.shape.some((d) => d <= 0)) {
      throw new Error(`${t.name}: invalid shape [${t.shape}]`);
    }
    if (product(t.shape) !== t.data.length) {
      throw new Error(`${t.name}: shape [${t.shape}] does not match ${t.data.length} values`);
    }
  }

  let offset = 0;
  const entries = tensors.map((t) => {
    const entry = {
      name: t.name,
      shape: t.shape,
      byte_offset: offset,
      byte_length: 4 * t.data.length,
    };
    offset += 4 * t.data.length;
    return entry;
  });

  // Key order matches the reader's documented manifest layout.
  const manifest = Buffer.from(
    JSON.stringify({ format_version: FORMAT_VERSION, entries, metadata }),
    'utf-8'
  );
  const header = Buffer.alloc(MAGIC.length + 8);
  MAGIC.copy(header, 0);
  header.writeBigUInt64LE(BigInt(manifest.length), MAGIC.length);

  const blobs = Buffer.alloc(offset);
  let cursor = 0;
  const view = new DataView(blobs.buffer, blobs.byteOffset, blobs.byteLength);
  for (const t of tensors) {
    for (let i = 0; i < t.data.length; i++) {
      view.setFloat32(cursor, t.data[i], true); // force little-endian
      cursor += 4;
    }
  }
  return Buffer.concat([header, manifest, blobs]);
}

export function decodeContainer(raw: Buffer): { tensors: FmapTensor[]; metadata: Metadata } {
  if (raw.length < MAGIC.length + 8 || !raw.subarray(0, MAGIC.length).equals(MAGIC)) {
    throw new Error('bad magic');
  }
  const manifestLen = Number(raw.readBigUInt64LE(MAGIC.length));
  const blobStart = MAGIC.length + 8 + manifestLen;
  if (blobStart > raw.length) {
    throw new Error('manifest length exceeds file size');
  }
  const manifest = JSON.parse(raw.subarray(MAGIC.length + 8, blobStart).toString('utf-8'));
  if (manifest.format_version !== FORMAT_VERSION) {
    throw new Error(`unsupported format_version ${manifest.format_version}`);
  }
  const blobSize = raw.length - blobStart;
  const tensors: FmapTensor[] = [];
  for (const entry of manifest.entries) {
    const expected = 4 * product(entry.shape);
    if (entry.byte_length !== expected) {
      throw new Error(`${entry.name}: byte_length ${entry.byte_length} != ${expected}`);
    }
    if (entry.byte_offset + entry.byte_length > blobSize) {
      throw new Error(`${entry.name}: range exceeds blob region`);
    }
    const data = new Float32Array(product(entry.shape));
    const view = new DataView(raw.buffer, raw.byteOffset + blobStart + entry.byte_offset);
    for (let i = 0; i < data.length; i++) {
      data[i] = view.getFloat32(4 * i, true);
    }
    tensors.push({ name: entry.name, shape: entry.shape, data });
  }
  return { tensors, metadata: manifest.metadata ?? {} };
}
