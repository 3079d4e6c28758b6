// Fixture exporter: trains the desk-scale CNN on the synthetic dataset and
// writes everything the analysis pipeline consumes:
//
//   weights.fmap    trained weights, NCHW / (out, in) layout
//   features.fmap   post-relu feature maps of n sampled training images
//   dataset.fmap    evaluation images (NCHW) + labels
//   logits.fmap     reference logits on the evaluation set
//   model.json      model description referencing weights.fmap
//   profile.json    per-layer param/MAC counts
//
// Deterministic for a fixed seed: seeded data generation, seeded weight init,
// shuffle-free training, no timestamps.

import * as fs from 'fs';
import * as path from 'path';

import * as tf from '@tensorflow/tfjs';

import { buildModelDescription, buildProfile, CONV_LAYERS, HEAD, QUANTIZABLE } from './arch';
import { generateDataset, LabeledBatch, NUM_CLASSES } from './dataset';
import { encodeContainer, FmapTensor } from './fmap';
import { Prng } from './prng';
import {
  accuracy,
  buildModel,
  convWeightNCHW,
  denseWeightNCHW,
  toImageTensor,
  toNCHW,
  train,
} from './trainer';

export interface ExportSpec {
  outDir: string;
  seed: number;
  sampleCount: number; // images in the feature dump
  trainCount: number;
  evalCount: number;
  epochs: number;
}

export const DEFAULTS: ExportSpec = {
  outDir: '',
  seed: 7,
  sampleCount: 32,
  trainCount: 512,
  evalCount: 256,
  epochs: 40,
};

function writeJson(file: string, payload: object): void {
  fs.writeFileSync(file, JSON.stringify(payload, null, 2) + '\n');
}

function gather(batch: LabeledBatch, indices: number[]): LabeledBatch {
  const pixels = batch.images.length / batch.count;
  const images = new Float32Array(indices.length * pixels);
  const labels = new Int32Array(indices.length);
  indices.forEach((src, dst) => {
    images.set(batch.images.subarray(src * pixels, (src + 1) * pixels), dst * pixels);
    labels[dst] = batch.labels[src];
  });
  return { images, labels, count: indices.length };
}

export async function exportFixture(spec: ExportSpec): Promise<{ evalAccuracy: number }> {
  if (spec.sampleCount < 1) {
    throw new Error('sampleCount must be >= 1');
  }
  fs.mkdirSync(spec.outDir, { recursive: true });

  const rng = new Prng(spec.seed);
  const { train: trainSet, eval: evalSet } = generateDataset(rng, spec.trainCount, spec.evalCount);

  const { classifier, capture } = buildModel(spec.seed);
  await train(classifier, trainSet, spec.epochs);
  const evalAccuracy = accuracy(classifier, evalSet);

  // weights
  const weightTensors: FmapTensor[] = [];
  for (const layer of CONV_LAYERS) {
    const { weight, bias } = await convWeightNCHW(classifier, layer.name);
    weightTensors.push({ name: `${layer.name}.weight`, shape: weight.shape, data: weight.data });
    weightTensors.push({ name: `${layer.name}.bias`, shape: bias.shape, data: bias.data });
  }
  const head = await denseWeightNCHW(classifier, HEAD.name);
  weightTensors.push({ name: `${HEAD.name}.weight`, shape: head.weight.shape, data: head.weight.data });
  weightTensors.push({ name: `${HEAD.name}.bias`, shape: head.bias.shape, data: head.bias.data });
  fs.writeFileSync(
    path.join(spec.outDir, 'weights.fmap'),
    encodeContainer(weightTensors, { kind: 'weights', model: 'fixture_cnn' })
  );

  // model description + profile
  writeJson(path.join(spec.outDir, 'model.json'), buildModelDescription('weights.fmap'));
  writeJson(path.join(spec.outDir, 'profile.json'), {
    model: 'fixture_cnn',
    layers: buildProfile(),
  });

  // evaluation dataset (NCHW) + reference logits
  const evalXs = toImageTensor(evalSet);
  const evalNchw = await toNCHW(evalXs);
  fs.writeFileSync(
    path.join(spec.outDir, 'dataset.fmap'),
    encodeContainer(
      [
        { name: 'images', shape: evalNchw.shape, data: evalNchw.data },
        {
          name: 'labels',
          shape: [evalSet.count],
          data: Float32Array.from(evalSet.labels),
        },
      ],
      { kind: 'dataset', class_count: NUM_CLASSES }
    )
  );
  const logits = classifier.predict(evalXs) as tf.Tensor;
  fs.writeFileSync(
    path.join(spec.outDir, 'logits.fmap'),
    encodeContainer(
      [{ name: 'logits', shape: logits.shape.slice(), data: (await logits.data()) as Float32Array }],
      { kind: 'logits', source: 'tfjs', tolerance: '1e-4' }
    )
  );
  logits.dispose();
  evalXs.dispose();

  // feature dump: n sampled training images through the capture model
  const picked = rng.sampleWithoutReplacement(trainSet.count, Math.min(spec.sampleCount, trainSet.count));
  const sampled = gather(trainSet, picked);
  const sampledXs = toImageTensor(sampled);
  const outputs = capture.predict(sampledXs) as tf.Tensor[];
  const featureTensors: FmapTensor[] = [];
  for (let i = 0; i < QUANTIZABLE.length; i++) {
    const nchw = await toNCHW(outputs[i]);
    featureTensors.push({ name: QUANTIZABLE[i].name, shape: nchw.shape, data: nchw.data });
  }
  fs.writeFileSync(
    path.join(spec.outDir, 'features.fmap'),
    encodeContainer(featureTensors, {
      kind: 'features',
      layer_order: QUANTIZABLE.map((l) => l.name),
      class_ids: Array.from(sampled.labels),
      image_ids: picked,
      sample_count: sampled.count,
    })
  );
  outputs.forEach((t) => t.dispose());
  sampledXs.dispose();

  return { evalAccuracy };
}

function parseArgs(argv: string[]): ExportSpec {
  const spec = { ...DEFAULTS };
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (value === undefined) {
      throw new Error(`missing value for ${key}`);
    }
    switch (key) {
      case '--out':
        spec.outDir = value;
        break;
      case '--seed':
        spec.seed = Number(value);
        break;
      case '--samples':
        spec.sampleCount = Number(value);
        break;
      case '--train':
        spec.trainCount = Number(value);
        break;
      case '--eval':
        spec.evalCount = Number(value);
        break;
      case '--epochs':
        spec.epochs = Number(value);
        break;
      default:
        throw new Error(`unknown flag ${key}`);
    }
  }
  if (!spec.outDir) {
    throw new Error('usage: export --out <dir> [--seed N] [--samples N] [--train N] [--eval N] [--epochs N]');
  }
  return spec;
}

if (require.main === module) {
  exportFixture(parseArgs(process.argv.slice(2)))
    .then(({ evalAccuracy }) => {
      console.log(`eval accuracy ${evalAccuracy.toFixed(4)}`);
    })
    .catch((err) => {
      console.error(`error: ${err.message}`);
      process.exit(1);
    });
}
