import assert from 'node:assert/strict';
import { test } from 'node:test';

import { buildModelDescription, buildProfile, CONV_LAYERS, HEAD } from '../src/arch';

test('param counts follow out_c * in_c * k * k (biases excluded)', () => {
  const profile = buildProfile();
  const expected: Record<string, number> = { conv1: 72, conv2: 864, conv3: 1728, conv4: 2304, head: 160 };
  for (const layer of profile) {
    assert.equal(layer.param_count, expected[layer.layer_id], layer.layer_id);
  }
  for (let i = 0; i < CONV_LAYERS.length; i++) {
    const spec = CONV_LAYERS[i];
    assert.equal(
      profile[i].param_count,
      spec.outChannels * spec.inChannels * spec.kernel * spec.kernel
    );
  }
  assert.equal(profile[profile.length - 1].param_count, HEAD.outFeatures * HEAD.inFeatures);
});

test('mac counts follow out_h * out_w * out_c * in_c * k * k', () => {
  const profile = buildProfile();
  // spatial sizes walked by hand: 8x8 -> 8x8 -> 4x4 -> 4x4 -> 4x4
  const expected: Record<string, number> = {
    conv1: 8 * 8 * 72,
    conv2: 4 * 4 * 864,
    conv3: 4 * 4 * 1728,
    conv4: 4 * 4 * 2304,
    head: 160,
  };
  for (const layer of profile) {
    assert.equal(layer.mac_count, expected[layer.layer_id], layer.layer_id);
  }
});

test('model description covers every quantizable layer with weight refs', () => {
  const desc = buildModelDescription('weights.fmap') as {
    input_shape: number[];
    weights: string;
    layers: Array<Record<string, unknown>>;
  };
  assert.deepEqual(desc.input_shape, [1, 8, 8]);
  assert.equal(desc.weights, 'weights.fmap');
  const quantizable = desc.layers.filter((l) => l.kind === 'conv2d' || l.kind === 'dense');
  assert.deepEqual(
    quantizable.map((l) => l.name),
    ['conv1', 'conv2', 'conv3', 'conv4', 'head']
  );
  for (const layer of quantizable) {
    assert.equal(layer.weight, `${layer.name}.weight`);
    assert.equal(layer.bias, `${layer.name}.bias`);
  }
  const kinds = desc.layers.map((l) => l.kind);
  assert.ok(kinds.includes('relu') && kinds.includes('global_avgpool') && kinds.includes('flatten'));
});
