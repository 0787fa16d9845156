import { readFileSync } from 'fs';
import { join } from 'path';
import { fileURLToPath } from 'url';
import { describe, expect, it } from 'vitest';

import { cdfPoints, render, PlotSpec } from '../src/plots.js';
import { MARGIN, PLOT_H, PLOT_W } from '../src/svg.js';

const FX = fileURLToPath(new URL('./fixtures', import.meta.url));
const fifoTasks = join(FX, 'fifo', 'tasks.csv');
const hybridTasks = join(FX, 'hybrid', 'tasks.csv');
const hybridUtil = join(FX, 'hybrid', 'util.csv');
const fifoSummary = join(FX, 'fifo', 'summary.json');
const hybridSummary = join(FX, 'hybrid', 'summary.json');

const Y_BASE = MARGIN.top + PLOT_H;

const spec = (s: Omit<PlotSpec, 'out'>): PlotSpec => ({ ...s, out: 'unused.svg' });

function pathDs(svg: string): string[] {
  return [...svg.matchAll(/<path d="([^"]+)"/g)].map((m) => m[1]);
}

function bars(svg: string): { x: number; y: number; w: number; h: number }[] {
  // data bars are anchored to the axis baseline; that filters out the
  // background rect and the legend swatches
  return [...svg.matchAll(/<rect x="([\d.]+)" y="([\d.]+)" width="([\d.]+)" height="([\d.]+)"/g)]
    .map((m) => ({ x: +m[1], y: +m[2], w: +m[3], h: +m[4] }))
    .filter((r) => Math.abs(r.y + r.h - Y_BASE) < 0.01);
}

describe('all five kinds render from the golden artifacts', () => {
  const cases: [string, PlotSpec][] = [
    ['cdf', spec({ kind: 'cdf', inputs: [fifoTasks, hybridTasks], col: 'exec_us' })],
    ['bars_log', spec({ kind: 'bars_log', inputs: [hybridSummary] })],
    ['timeseries', spec({ kind: 'timeseries', inputs: [hybridUtil] })],
    ['cost_bars', spec({ kind: 'cost_bars', inputs: [fifoSummary, hybridSummary] })],
    ['scatter', spec({ kind: 'scatter', inputs: [fifoSummary, hybridSummary] })],
  ];
  it.each(cases)('%s', (_name, s) => {
    const svg = render(s);
    expect(svg.startsWith('<svg ')).toBe(true);
    expect(svg.trimEnd().endsWith('</svg>')).toBe(true);
    expect(svg.length).toBeGreaterThan(800);
  });

  it('timeseries also reads a summary series', () => {
    const svg = render(spec({
      kind: 'timeseries', inputs: [hybridSummary], col: 'limit_us',
    }));
    expect(svg).toContain('limit_us');
  });
});

describe('cdf', () => {
  it('staircase steps sit at the exact sample values', () => {
    expect(cdfPoints([777_000])).toEqual([[777_000, 0], [777_000, 1]]);
    expect(cdfPoints([3, 1])).toEqual([[1, 0], [1, 0.5], [3, 0.5], [3, 1]]);
  });

  it('a one-task file renders a single vertical step at its value', () => {
    const svg = render(spec({
      kind: 'cdf', inputs: [join(FX, 'single_task.csv')], col: 'exec_us',
    }));
    // domain is [0, 777000], so the step lands on the right edge, spanning
    // cumulative 0 -> 1
    const xStep = (MARGIN.left + PLOT_W).toFixed(2);
    const d = pathDs(svg)[0];
    expect(d).toBe(`M${xStep} ${Y_BASE.toFixed(2)} L${xStep} ${MARGIN.top.toFixed(2)}`);
  });

  it('two identical series produce overlapping curves', () => {
    const svg = render(spec({ kind: 'cdf', inputs: [fifoTasks, fifoTasks], col: 'turn_us' }));
    const [a, b] = pathDs(svg);
    expect(a).toBe(b);
  });
});

describe('bars_log', () => {
  it('counts spanning 1..10^4 stay inside the plot area', () => {
    const svg = render(spec({
      kind: 'bars_log', inputs: [join(FX, 'bars_wide.json')], col: 'slice_preemptions',
    }));
    const rects = bars(svg);
    expect(rects).toHaveLength(5);
    for (const r of rects) {
      expect(r.y).toBeGreaterThanOrEqual(MARGIN.top);
      expect(r.h).toBeGreaterThanOrEqual(0);
    }
    // decade heights: log10 of {1,10^2,10^4} over a 4-decade axis
    expect(rects[0].h).toBeCloseTo(0, 2);
    expect(rects[2].h).toBeCloseTo(PLOT_H / 2, 2);
    expect(rects[4].h).toBeCloseTo(PLOT_H, 2);
  });
});

describe('render is pure', () => {
  const deepFreeze = (o: object): void => {
    Object.values(o).forEach((v) => v && typeof v === 'object' && deepFreeze(v));
    Object.freeze(o);
  };

  it('never mutates the spec or the input files', () => {
    const s = spec({
      kind: 'cdf', inputs: [fifoTasks, hybridTasks], col: 'exec_us',
      labels: ['a', 'b'],
    });
    deepFreeze(s);
    const before = s.inputs.map((p) => readFileSync(p, 'utf8'));
    render(s); // strict mode: a write to a frozen object throws
    expect(s.inputs.map((p) => readFileSync(p, 'utf8'))).toEqual(before);
  });

  it('is byte-stable for fixed inputs', () => {
    const s = spec({ kind: 'scatter', inputs: [fifoSummary, hybridSummary] });
    expect(render(s)).toBe(render(s));
  });
});
