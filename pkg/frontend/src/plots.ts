/**
 * The five figure families rendered from run artifacts:
 *
 *   cdf        metric CDFs from tasks.csv columns, one curve per input run
 *   bars_log   per-core preemption counts from summary.json, log Y
 *   timeseries group utilization from util.csv, or a summary.json series
 *   cost_bars  total billed cost per run, one summary.json per bar
 *   scatter    cost vs p99 response across runs
 *
 * render() is pure with respect to its inputs: files are only read, the
 * spec is never written to, and the output is byte-stable for fixed inputs.
 */

import { basename } from 'path';
import { readSummary, readTasksColumn, readUtil, SchemaError, Summary } from './schema.js';
import {
  frame, fmt, legend, linearScale, log10Scale, SvgDoc,
  MARGIN, PALETTE, PLOT_H, PLOT_W,
} from './svg.js';

export const KINDS = ['cdf', 'bars_log', 'timeseries', 'cost_bars', 'scatter'] as const;
export type Kind = (typeof KINDS)[number];

export interface PlotSpec {
  kind: Kind;
  inputs: string[];
  out: string;
  col?: string;
  labels?: string[];
}

const X0 = MARGIN.left;
const Y0 = MARGIN.top + PLOT_H;

/** Staircase points for an empirical CDF; steps sit at the exact sample values. */
export function cdfPoints(values: number[]): [number, number][] {
  if (values.length === 0) {
    throw new SchemaError('cdf of an empty sample');
  }
  const vs = [...values].sort((a, b) => a - b);
  const n = vs.length;
  const pts: [number, number][] = [[vs[0], 0]];
  vs.forEach((v, i) => {
    pts.push([v, (i + 1) / n]);
    if (i + 1 < n) {
      pts.push([vs[i + 1], (i + 1) / n]);
    }
  });
  return pts;
}

function seriesLabels(spec: PlotSpec, fallback: string[]): string[] {
  const labels = spec.labels ?? [];
  return fallback.map((name, i) => labels[i] ?? name);
}

function secondsTicks(x: ReturnType<typeof linearScale>): { at: number; label: string }[] {
  return x.ticks.map((v) => ({ at: x(v), label: fmt(v / 1e6) }));
}

function renderCdf(spec: PlotSpec): string {
  const col = spec.col ?? 'exec_us';
  const series = spec.inputs.map((p) => cdfPoints(readTasksColumn(p, col)));
  const xMax = Math.max(...series.map((pts) => pts[pts.length - 1][0]));
  const x = linearScale(0, xMax, X0, X0 + PLOT_W);
  const y = linearScale(0, 1, Y0, MARGIN.top); // cumulative probability on [0,1]
  const doc = new SvgDoc();
  frame(
    doc,
    secondsTicks(x),
    y.ticks.map((v) => ({ at: y(v), label: fmt(v) })),
    `${col} (s)`,
    'fraction of tasks',
  );
  series.forEach((pts, i) => {
    doc.path(pts.map(([v, p]) => [x(v), y(p)]), PALETTE[i % PALETTE.length]);
  });
  legend(doc, seriesLabels(spec, spec.inputs.map((p) => basename(p, '.csv'))));
  return doc.toString();
}

function onlyInput(spec: PlotSpec): string {
  if (spec.inputs.length !== 1) {
    throw new SchemaError(`${spec.kind} takes exactly one input, got ${spec.inputs.length}`);
  }
  return spec.inputs[0];
}

function renderBarsLog(spec: PlotSpec): string {
  const summary = readSummary(onlyInput(spec));
  const col = spec.col;
  const value = (c: Record<string, unknown>): number => {
    if (col === undefined) {
      return (c.slice_preemptions as number) + (c.limit_preemptions as number);
    }
    if (!(col in c)) {
      throw new SchemaError(`${spec.inputs[0]}: missing column "${col}"`);
    }
    return c[col] as number;
  };
  const cores = summary.per_core;
  const counts = cores.map((c) => value(c as unknown as Record<string, unknown>));
  const rise = log10Scale(Math.max(...counts), 0, PLOT_H);
  const x = linearScale(0, cores.length, X0, X0 + PLOT_W);
  const doc = new SvgDoc();
  frame(
    doc,
    cores.map((c, i) => ({ at: x(i + 0.5), label: String(c.core_id) }))
      .filter((_, i) => cores.length <= 16 || i % Math.ceil(cores.length / 16) === 0),
    rise.ticks.map((v) => ({ at: Y0 - rise(v), label: String(v) })),
    'core',
    col ?? 'preemptions',
  );
  const groups = [...new Set(cores.map((c) => c.group))].sort();
  const width = (PLOT_W / cores.length) * 0.8;
  cores.forEach((core, i) => {
    const h = rise(counts[i]);
    const color = PALETTE[groups.indexOf(core.group) % PALETTE.length];
    doc.rect(x(i + 0.1), Y0 - h, width, h, color);
  });
  legend(doc, groups);
  return doc.toString();
}

function utilSeries(path: string): { labels: string[]; lines: [number, number][][] } {
  // one line per core group: mean busy fraction over each window
  const rows = readUtil(path);
  const byGroup = new Map<string, Map<number, number[]>>();
  for (const r of rows) {
    const windows = byGroup.get(r.group) ?? new Map();
    byGroup.set(r.group, windows);
    const vals = windows.get(r.window_start_us) ?? [];
    vals.push(r.busy_fraction);
    windows.set(r.window_start_us, vals);
  }
  const labels = [...byGroup.keys()].sort();
  const lines = labels.map((g) => {
    const windows = byGroup.get(g)!;
    return [...windows.keys()]
      .sort((a, b) => a - b)
      .map((w): [number, number] => {
        const vals = windows.get(w)!;
        return [w, vals.reduce((s, v) => s + v, 0) / vals.length];
      });
  });
  return { labels, lines };
}

function summarySeries(path: string, col: string): { labels: string[]; lines: [number, number][][] } {
  const summary = readSummary(path);
  if (!(col in summary.series)) {
    throw new SchemaError(`${path}: missing column "${col}"`);
  }
  const rows = summary.series[col];
  const width = rows[0]?.length ?? 0;
  if (width === 3) { // group-size rows carry both groups per tick
    return {
      labels: ['fifo', 'cfs'],
      lines: [rows.map((r): [number, number] => [r[0], r[1]]),
              rows.map((r): [number, number] => [r[0], r[2]])],
    };
  }
  return { labels: [col], lines: [rows.map((r): [number, number] => [r[0], r[1]])] };
}

function renderTimeseries(spec: PlotSpec): string {
  const path = onlyInput(spec);
  const { labels, lines } = path.endsWith('.json')
    ? summarySeries(path, spec.col ?? 'limit_us')
    : utilSeries(path);
  const xMax = Math.max(...lines.map((l) => l[l.length - 1][0]));
  const yTop = Math.max(1, ...lines.flatMap((l) => l.map(([, v]) => v)));
  const x = linearScale(0, xMax, X0, X0 + PLOT_W);
  const y = linearScale(0, yTop, Y0, MARGIN.top);
  const doc = new SvgDoc();
  frame(
    doc,
    secondsTicks(x),
    y.ticks.map((v) => ({ at: y(v), label: fmt(v) })),
    'time (s)',
    spec.col ?? 'mean busy fraction',
  );
  lines.forEach((line, i) => {
    doc.path(line.map(([t, v]) => [x(t), y(v)]), PALETTE[i % PALETTE.length]);
  });
  legend(doc, seriesLabels(spec, labels));
  return doc.toString();
}

function loadSummaries(spec: PlotSpec): { summaries: Summary[]; labels: string[] } {
  const summaries = spec.inputs.map(readSummary);
  return { summaries, labels: seriesLabels(spec, summaries.map((s) => s.run_id)) };
}

function renderCostBars(spec: PlotSpec): string {
  const { summaries, labels } = loadSummaries(spec);
  const costs = summaries.map((s) => Number(s.total_cost_usd));
  const yTop = Math.max(...costs);
  const rise = linearScale(0, yTop, 0, PLOT_H);
  const x = linearScale(0, costs.length, X0, X0 + PLOT_W);
  const doc = new SvgDoc();
  frame(
    doc,
    costs.map((_, i) => ({ at: x(i + 0.5), label: labels[i] })),
    rise.ticks.map((v) => ({ at: Y0 - rise(v), label: v.toFixed(4) })),
    'run',
    'total cost (USD)',
  );
  const width = (PLOT_W / costs.length) * 0.6;
  costs.forEach((c, i) => {
    doc.rect(x(i + 0.2), Y0 - rise(c), width, rise(c), PALETTE[i % PALETTE.length]);
  });
  return doc.toString();
}

function renderScatter(spec: PlotSpec): string {
  const { summaries, labels } = loadSummaries(spec);
  const pts = summaries.map((s): [number, number] => [
    s.aggregates.response.p99,
    Number(s.total_cost_usd),
  ]);
  const x = linearScale(0, Math.max(...pts.map(([r]) => r)), X0, X0 + PLOT_W);
  const y = linearScale(0, Math.max(...pts.map(([, c]) => c)), Y0, MARGIN.top);
  const doc = new SvgDoc();
  frame(
    doc,
    secondsTicks(x),
    y.ticks.map((v) => ({ at: y(v), label: v.toFixed(4) })),
    'p99 response (s)',
    'total cost (USD)',
  );
  pts.forEach(([r, c], i) => {
    doc.circle(x(r), y(c), 4, PALETTE[i % PALETTE.length]);
    doc.text(x(r), y(c) - 8, labels[i]);
  });
  return doc.toString();
}

export function render(spec: PlotSpec): string {
  switch (spec.kind) {
    case 'cdf': return renderCdf(spec);
    case 'bars_log': return renderBarsLog(spec);
    case 'timeseries': return renderTimeseries(spec);
    case 'cost_bars': return renderCostBars(spec);
    case 'scatter': return renderScatter(spec);
    default:
      throw new SchemaError(`unknown plot kind "${(spec as PlotSpec).kind}"`);
  }
}
