// Synthetic 10-class 8x8 grayscale dataset: one blocky low-frequency
// prototype per class plus gaussian pixel noise, clipped to [0, 1].

import { Prng } from './prng';

export const IMAGE_SIZE = 8;
export const NUM_CLASSES = 10;
const NOISE_STD = 0.08;

export interface LabeledBatch {
  images: Float32Array; // NHWC (n, 8, 8, 1) for tf.js
  labels: Int32Array;
  count: number;
}

function makePrototypes(rng: Prng): Float32Array[] {
  const protos: Float32Array[] = [];
  for (let c = 0; c < NUM_CLASSES; c++) {
    // 4x4 random field upsampled 2x into blocks
    const coarse = Array.from({ length: 16 }, () => rng.uniform(0, 1));
    let lo = Infinity;
    let hi = -Infinity;
    for (const v of coarse) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
    const proto = new Float32Array(IMAGE_SIZE * IMAGE_SIZE);
    for (let y = 0; y < IMAGE_SIZE; y++) {
      for (let x = 0; x < IMAGE_SIZE; x++) {
        const v = coarse[Math.floor(y / 2) * 4 + Math.floor(x / 2)];
        proto[y * IMAGE_SIZE + x] = (v - lo) / (hi - lo + 1e-9);
      }
    }
    protos.push(proto);
  }
  return protos;
}

export function generateDataset(
  rng: Prng,
  trainCount: number,
  evalCount: number
): { train: LabeledBatch; eval: LabeledBatch } {
  const protos = makePrototypes(rng);

  const sample = (count: number): LabeledBatch => {
    const labels = new Int32Array(rng.shuffle([...Array(count).keys()].map((i) => i % NUM_CLASSES)));
    const images = new Float32Array(count * IMAGE_SIZE * IMAGE_SIZE);
    for (let i = 0; i < count; i++) {
      const proto = protos[labels[i]];
      for (let p = 0; p < proto.length; p++) {
        const v = proto[p] + rng.gaussian(0, NOISE_STD);
        images[i * proto.length + p] = Math.min(1, Math.max(0, v));
      }
    }
    return { images, labels, count };
  };

  return { train: sample(trainCount), eval: sample(evalCount) };
}
