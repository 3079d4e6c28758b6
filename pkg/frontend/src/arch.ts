// Fixture CNN architecture, shared by the trainer, the exported model
// description and the analytic profile.

import { IMAGE_SIZE, NUM_CLASSES } from './dataset';

export interface ConvSpec {
  kind: 'conv2d';
  name: string;
  outChannels: number;
  inChannels: number;
  kernel: number;
  stride: number;
  padding: number;
}

export interface DenseSpec {
  kind: 'dense';
  name: string;
  outFeatures: number;
  inFeatures: number;
}

export type QuantizableSpec = ConvSpec | DenseSpec;

export const CONV_LAYERS: ConvSpec[] = [
  { kind: 'conv2d', name: 'conv1', outChannels: 8, inChannels: 1, kernel: 3, stride: 1, padding: 1 },
  { kind: 'conv2d', name: 'conv2', outChannels: 12, inChannels: 8, kernel: 3, stride: 2, padding: 1 },
  { kind: 'conv2d', name: 'conv3', outChannels: 16, inChannels: 12, kernel: 3, stride: 1, padding: 1 },
  { kind: 'conv2d', name: 'conv4', outChannels: 16, inChannels: 16, kernel: 3, stride: 1, padding: 1 },
];

export const HEAD: DenseSpec = {
  kind: 'dense',
  name: 'head',
  outFeatures: NUM_CLASSES,
  inFeatures: CONV_LAYERS[CONV_LAYERS.length - 1].outChannels,
};

export const QUANTIZABLE: QuantizableSpec[] = [...CONV_LAYERS, HEAD];

export interface LayerProfile {
  layer_id: string;
  param_count: number;
  mac_count: number;
  pinned_bits: null;
}

function convOut(size: number, spec: ConvSpec): number {
  return Math.floor((size + 2 * spec.padding - spec.kernel) / spec.stride) + 1;
}

/** Parameter and MAC counts per quantizable layer; biases excluded. */
export function buildProfile(): LayerProfile[] {
  const profile: LayerProfile[] = [];
  let h = IMAGE_SIZE;
  let w = IMAGE_SIZE;
  for (const spec of CONV_LAYERS) {
    const outH = convOut(h, spec);
    const outW = convOut(w, spec);
    const params = spec.outChannels * spec.inChannels * spec.kernel * spec.kernel;
    profile.push({
      layer_id: spec.name,
      param_count: params,
      mac_count: outH * outW * params,
      pinned_bits: null,
    });
    h = outH;
    w = outW;
  }
  profile.push({
    layer_id: HEAD.name,
    param_count: HEAD.outFeatures * HEAD.inFeatures,
    mac_count: HEAD.outFeatures * HEAD.inFeatures,
    pinned_bits: null,
  });
  return profile;
}

/** Model description consumed by the analysis pipeline's inference engine. */
export function buildModelDescription(weightsFile: string): object {
  const layers: object[] = [];
  for (const spec of CONV_LAYERS) {
    layers.push({
      kind: 'conv2d',
      name: spec.name,
      out_channels: spec.outChannels,
      in_channels: spec.inChannels,
      kernel: spec.kernel,
      stride: spec.stride,
      padding: spec.padding,
      weight: `${spec.name}.weight`,
      bias: `${spec.name}.bias`,
    });
    layers.push({ kind: 'relu' });
  }
  layers.push({ kind: 'global_avgpool' });
  layers.push({ kind: 'flatten' });
  layers.push({
    kind: 'dense',
    name: HEAD.name,
    out_features: HEAD.outFeatures,
    in_features: HEAD.inFeatures,
    weight: `${HEAD.name}.weight`,
    bias: `${HEAD.name}.bias`,
  });
  return {
    name: 'fixture_cnn',
    input_shape: [1, IMAGE_SIZE, IMAGE_SIZE],
    weights: weightsFile,
    layers,
  };
}
