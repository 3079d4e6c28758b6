// Builds and trains the fixture CNN in tf.js, and exposes the trained
// tensors the exporter needs: weights in NCHW order, post-relu feature maps,
// and logits.
//
// The engine on the analysis side uses symmetric zero padding, so every conv
// here is an explicit ZeroPadding2D followed by a 'valid' convolution;
// tf.js's 'same' padding would pad asymmetrically for stride 2.

import * as tf from '@tensorflow/tfjs';

import { CONV_LAYERS, HEAD } from './arch';
import { IMAGE_SIZE, NUM_CLASSES, LabeledBatch } from './dataset';

export interface TrainedModel {
  /** single-output model used for training/prediction */
  classifier: tf.LayersModel;
  /** same layers, one output per quantizable layer (post-activation) + logits */
  capture: tf.LayersModel;
}

export function buildModel(seed: number): TrainedModel {
  const input = tf.input({ shape: [IMAGE_SIZE, IMAGE_SIZE, 1] });
  let x = input as tf.SymbolicTensor;
  const captured: tf.SymbolicTensor[] = [];

  CONV_LAYERS.forEach((spec, i) => {
    const padded = tf.layers
      .zeroPadding2d({ padding: [[spec.padding, spec.padding], [spec.padding, spec.padding]] })
      .apply(x) as tf.SymbolicTensor;
    const conv = tf.layers
      .conv2d({
        name: spec.name,
        filters: spec.outChannels,
        kernelSize: spec.kernel,
        strides: spec.stride,
        padding: 'valid',
        useBias: true,
        kernelInitializer: tf.initializers.glorotUniform({ seed: seed * 1000 + i }),
        biasInitializer: 'zeros',
      })
      .apply(padded) as tf.SymbolicTensor;
    x = tf.layers.reLU().apply(conv) as tf.SymbolicTensor;
    captured.push(x);
  });

  x = tf.layers.globalAveragePooling2d({}).apply(x) as tf.SymbolicTensor;
  const logits = tf.layers
    .dense({
      name: HEAD.name,
      units: NUM_CLASSES,
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed * 1000 + 99 }),
      biasInitializer: 'zeros',
    })
    .apply(x) as tf.SymbolicTensor;
  captured.push(logits);

  return {
    classifier: tf.model({ inputs: input, outputs: logits }),
    capture: tf.model({ inputs: input, outputs: captured }),
  };
}

export function toImageTensor(batch: LabeledBatch): tf.Tensor4D {
  return tf.tensor4d(batch.images, [batch.count, IMAGE_SIZE, IMAGE_SIZE, 1]);
}

export async function train(
  model: tf.LayersModel,
  batch: LabeledBatch,
  epochs: number
): Promise<void> {
  // Softmax folded into the loss so the model keeps emitting raw logits.
  model.compile({
    optimizer: tf.train.adam(0.01),
    loss: (labels, logits) => tf.losses.softmaxCrossEntropy(labels, logits),
  });
  const xs = toImageTensor(batch);
  const ys = tf.oneHot(tf.tensor1d(batch.labels, 'int32'), NUM_CLASSES);
  // shuffle off: the data is pre-shuffled and fit() must stay deterministic
  await model.fit(xs, ys, { epochs, batchSize: 32, shuffle: false, verbose: 0 });
  xs.dispose();
  ys.dispose();
}

export function accuracy(model: tf.LayersModel, batch: LabeledBatch): number {
  return tf.tidy(() => {
    const xs = toImageTensor(batch);
    const preds = (model.predict(xs) as tf.Tensor).argMax(1);
    const labels = tf.tensor1d(batch.labels, 'int32');
    return preds.equal(labels).mean().dataSync()[0];
  });
}

/** conv kernels come out [kh, kw, in, out]; the container wants [out, in, kh, kw] */
export async function convWeightNCHW(model: tf.LayersModel, name: string) {
  const [kernel, bias] = model.getLayer(name).getWeights();
  const transposed = kernel.transpose([3, 2, 0, 1]);
  const weight = {
    shape: transposed.shape.slice(),
    data: (await transposed.data()) as Float32Array,
  };
  transposed.dispose();
  return { weight, bias: { shape: bias.shape.slice(), data: (await bias.data()) as Float32Array } };
}

/** dense kernels come out [in, out]; the container wants [out, in] */
export async function denseWeightNCHW(model: tf.LayersModel, name: string) {
  const [kernel, bias] = model.getLayer(name).getWeights();
  const transposed = kernel.transpose([1, 0]);
  const weight = {
    shape: transposed.shape.slice(),
    data: (await transposed.data()) as Float32Array,
  };
  transposed.dispose();
  return { weight, bias: { shape: bias.shape.slice(), data: (await bias.data()) as Float32Array } };
}

/** NHWC activation tensor -> NCHW Float32Array + shape */
export async function toNCHW(t: tf.Tensor): Promise<{ shape: number[]; data: Float32Array }> {
  if (t.rank === 4) {
    const moved = t.transpose([0, 3, 1, 2]);
    const out = { shape: moved.shape.slice(), data: (await moved.data()) as Float32Array };
    moved.dispose();
    return out;
  }
  // dense outputs: (n, units) -> declare as (n, units, 1, 1), same layout
  return { shape: [...t.shape, 1, 1], data: (await t.data()) as Float32Array };
}
