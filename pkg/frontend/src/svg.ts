/**
 * Just enough hand-built SVG for the five figure families: fixed canvas,
 * linear/log scales, axis frames. Number formatting is pinned to two
 * decimals so a rebuilt figure is byte-identical.
 */

export const WIDTH = 640;
export const HEIGHT = 400;
export const MARGIN = { top: 24, right: 24, bottom: 48, left: 64 };

export const PLOT_W = WIDTH - MARGIN.left - MARGIN.right;
export const PLOT_H = HEIGHT - MARGIN.top - MARGIN.bottom;

export const PALETTE = ['#1f77b4', '#ff7f0e', '#2ca02c', '#d62728', '#9467bd', '#8c564b'];

export const fmt = (n: number): string => n.toFixed(2);

export interface Scale {
  (v: number): number;
  ticks: number[];
}

export function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const span = hi - lo || 1; // degenerate domain: everything maps to outLo
  const f = ((v: number) => outLo + ((v - lo) / span) * (outHi - outLo)) as Scale;
  f.ticks = [0, 0.25, 0.5, 0.75, 1].map((t) => lo + t * (hi - lo));
  return f;
}

/** Decade scale for counts; the domain floor is pinned to 1. */
export function log10Scale(hi: number, outLo: number, outHi: number): Scale {
  const decades = Math.max(1, Math.ceil(Math.log10(Math.max(hi, 10))));
  const f = ((v: number) =>
    outLo + (Math.log10(Math.max(v, 1)) / decades) * (outHi - outLo)) as Scale;
  f.ticks = Array.from({ length: decades + 1 }, (_, i) => 10 ** i);
  return f;
}

const esc = (s: string): string =>
  s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;').replace(/"/g, '&quot;');

export class SvgDoc {
  private parts: string[] = [];

  rect(x: number, y: number, w: number, h: number, fill: string): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}"/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke = '#333'): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="${stroke}"/>`,
    );
  }

  path(points: [number, number][], stroke: string): void {
    const d = points
      .map(([x, y], i) => `${i === 0 ? 'M' : 'L'}${fmt(x)} ${fmt(y)}`)
      .join(' ');
    this.parts.push(`<path d="${d}" fill="none" stroke="${stroke}" stroke-width="1.5"/>`);
  }

  circle(cx: number, cy: number, r: number, fill: string): void {
    this.parts.push(`<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${fmt(r)}" fill="${fill}"/>`);
  }

  text(x: number, y: number, s: string, opts: { anchor?: string; size?: number; angle?: number } = {}): void {
    const anchor = opts.anchor ?? 'middle';
    const size = opts.size ?? 11;
    const rot = opts.angle ? ` transform="rotate(${opts.angle} ${fmt(x)} ${fmt(y)})"` : '';
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-family="sans-serif" font-size="${size}"` +
        ` text-anchor="${anchor}"${rot}>${esc(s)}</text>`,
    );
  }

  toString(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}"` +
      ` viewBox="0 0 ${WIDTH} ${HEIGHT}">\n<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>\n` +
      this.parts.join('\n') +
      '\n</svg>\n'
    );
  }
}

/** Axis frame with tick marks and labels; tick values already in axis units. */
export function frame(
  doc: SvgDoc,
  xTicks: { at: number; label: string }[],
  yTicks: { at: number; label: string }[],
  xLabel: string,
  yLabel: string,
): void {
  const x0 = MARGIN.left;
  const y0 = MARGIN.top + PLOT_H;
  doc.line(x0, y0, x0 + PLOT_W, y0);
  doc.line(x0, MARGIN.top, x0, y0);
  for (const t of xTicks) {
    doc.line(t.at, y0, t.at, y0 + 5);
    doc.text(t.at, y0 + 18, t.label);
  }
  for (const t of yTicks) {
    doc.line(x0 - 5, t.at, x0, t.at);
    doc.text(x0 - 8, t.at + 4, t.label, { anchor: 'end' });
  }
  doc.text(x0 + PLOT_W / 2, HEIGHT - 10, xLabel);
  doc.text(16, MARGIN.top + PLOT_H / 2, yLabel, { angle: -90 });
}

export function legend(doc: SvgDoc, labels: string[]): void {
  labels.forEach((label, i) => {
    const y = MARGIN.top + 14 * i + 6;
    const x = MARGIN.left + PLOT_W - 130;
    doc.rect(x, y - 8, 10, 10, PALETTE[i % PALETTE.length]);
    doc.text(x + 16, y, label, { anchor: 'start' });
  });
}
