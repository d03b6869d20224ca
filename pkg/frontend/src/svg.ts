/**
 * Minimal deterministic SVG chart builder.
 *
 * Only presentation lives here: scales, axes, line/point/rect marks,
 * and text.  Every coordinate is rounded to a fixed precision so the
 * same inputs always serialize to the same bytes.
 */

export interface Margins {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const WIDTH = 640;
export const HEIGHT = 420;
export const MARGINS: Margins = { top: 34, right: 20, bottom: 46, left: 62 };

const AXIS_COLOR = '#444444';
const GRID_COLOR = '#dddddd';

/** Palette shared by all figures, in series order. */
export const COLORS = ['#1f6fb2', '#d95f02', '#2a9d5c', '#7b5aa6', '#c23b80'];

function fmt(x: number): string {
  // fixed screen-space rounding keeps output byte-stable
  return (Math.round(x * 100) / 100).toString();
}

/** Compact tick label: plain notation in a sane range, exponent outside. */
export function tickLabel(x: number): string {
  if (x === 0) return '0';
  const ax = Math.abs(x);
  if (ax >= 1e4 || ax < 1e-3) {
    return x.toExponential(0).replace('+', '');
  }
  return parseFloat(x.toPrecision(6)).toString();
}

export interface Scale {
  (x: number): number;
  readonly domain: [number, number];
  readonly ticks: number[];
}

function niceStep(span: number, target: number): number {
  const raw = span / target;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  for (const m of [1, 2, 5, 10]) {
    if (raw <= m * mag) return m * mag;
  }
  return 10 * mag;
}

/** Linear scale with round-valued ticks covering [lo, hi]. */
export function linearScale(lo: number, hi: number, rLo: number, rHi: number): Scale {
  if (!(hi > lo)) {
    const pad = Math.abs(lo) > 0 ? Math.abs(lo) * 0.5 : 1;
    hi = lo + pad;
    lo = lo - pad;
  }
  const step = niceStep(hi - lo, 5);
  const t0 = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let t = t0; t <= hi + step * 1e-9; t += step) {
    ticks.push(Math.abs(t) < step * 1e-9 ? 0 : t);
  }
  const f = (x: number) => rLo + ((x - lo) / (hi - lo)) * (rHi - rLo);
  return Object.assign(f, { domain: [lo, hi] as [number, number], ticks });
}

/** Log10 scale; ticks at powers of ten inside the domain. */
export function logScale(lo: number, hi: number, rLo: number, rHi: number): Scale {
  if (!(lo > 0) || !(hi > 0)) {
    throw new Error(`log scale needs positive domain, got [${lo}, ${hi}]`);
  }
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi);
  const span = lhi - llo || 1;
  const ticks: number[] = [];
  for (let e = Math.ceil(llo - 1e-9); e <= lhi + 1e-9; e++) {
    ticks.push(Math.pow(10, e));
  }
  if (ticks.length < 2) {
    ticks.length = 0;
    ticks.push(lo, hi);
  }
  const f = (x: number) => rLo + ((Math.log10(x) - llo) / span) * (rHi - rLo);
  return Object.assign(f, { domain: [lo, hi] as [number, number], ticks });
}

/** Accumulates SVG elements and serializes the finished document. */
export class SvgDoc {
  private parts: string[] = [];

  constructor(readonly width: number = WIDTH, readonly height: number = HEIGHT) {}

  raw(s: string): void {
    this.parts.push(s);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, opts = ''): void {
    this.raw(`<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="${stroke}"${opts ? ' ' + opts : ''}/>`);
  }

  polyline(pts: Array<[number, number]>, stroke: string, opts = ''): void {
    const body = pts.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(' ');
    const width = opts.includes('stroke-width=') ? '' : ' stroke-width="1.5"';
    this.raw(`<polyline points="${body}" fill="none" stroke="${stroke}"${width}${opts ? ' ' + opts : ''}/>`);
  }

  circle(cx: number, cy: number, r: number, fill: string): void {
    this.raw(`<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${r}" fill="${fill}"/>`);
  }

  rect(x: number, y: number, w: number, h: number, fill: string, opts = ''): void {
    this.raw(`<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(Math.max(w, 0))}" height="${fmt(Math.max(h, 0))}" fill="${fill}"${opts ? ' ' + opts : ''}/>`);
  }

  text(x: number, y: number, s: string, opts = ''): void {
    const esc = s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
    const size = opts.includes('font-size=') ? '' : ' font-size="12"';
    this.raw(`<text x="${fmt(x)}" y="${fmt(y)}" font-family="sans-serif"${size}${opts ? ' ' + opts : ''}>${esc}</text>`);
  }

  /** Frame, grid lines, tick labels, and axis titles for a scale pair. */
  axes(sx: Scale, sy: Scale, xLabel: string, yLabel: string, m: Margins = MARGINS): void {
    const x0 = m.left;
    const x1 = this.width - m.right;
    const y0 = this.height - m.bottom;
    const y1 = m.top;
    for (const t of sx.ticks) {
      const px = sx(t);
      if (px < x0 - 0.5 || px > x1 + 0.5) continue;
      this.line(px, y0, px, y1, GRID_COLOR);
      this.text(px, y0 + 16, tickLabel(t), 'text-anchor="middle" fill="#333333"');
    }
    for (const t of sy.ticks) {
      const py = sy(t);
      if (py > y0 + 0.5 || py < y1 - 0.5) continue;
      this.line(x0, py, x1, py, GRID_COLOR);
      this.text(x0 - 6, py + 4, tickLabel(t), 'text-anchor="end" fill="#333333"');
    }
    this.line(x0, y0, x1, y0, AXIS_COLOR);
    this.line(x0, y0, x0, y1, AXIS_COLOR);
    this.text((x0 + x1) / 2, this.height - 8, xLabel, 'text-anchor="middle" fill="#111111"');
    this.text(14, (y0 + y1) / 2, yLabel, `text-anchor="middle" fill="#111111" transform="rotate(-90 14 ${fmt((y0 + y1) / 2)})"`);
  }

  title(s: string): void {
    this.text(MARGINS.left, 18, s, 'font-size="14" fill="#111111"');
  }

  /** One legend row per series, top-right corner. */
  legend(entries: Array<[string, string]>, dashed: boolean[] = []): void {
    const x = this.width - MARGINS.right - 150;
    entries.forEach(([label, color], i) => {
      const y = MARGINS.top + 8 + 16 * i;
      this.line(x, y, x + 22, y, color, dashed[i] ? 'stroke-width="1.5" stroke-dasharray="5,3"' : 'stroke-width="1.5"');
      this.text(x + 28, y + 4, label, 'fill="#333333"');
    });
  }

  render(): string {
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">`,
      `<rect x="0" y="0" width="${this.width}" height="${this.height}" fill="#ffffff"/>`,
      ...this.parts,
      '</svg>',
      '',
    ].join('\n');
  }
}

/** Data range of a series, ignoring non-finite entries. */
export function finiteExtent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo > hi) {
    throw new Error('no finite values to plot');
  }
  return [lo, hi];
}

/** Diverging blue-white-red map on [-1, 1], for heatmap cells. */
export function divergingColor(t: number): string {
  const clamp = Math.max(-1, Math.min(1, t));
  const mix = (a: number, b: number, w: number) => Math.round(a + (b - a) * w);
  let r: number;
  let g: number;
  let b: number;
  if (clamp < 0) {
    const w = -clamp;
    r = mix(255, 33, w);
    g = mix(255, 102, w);
    b = mix(255, 172, w);
  } else {
    r = mix(255, 178, clamp);
    g = mix(255, 24, clamp);
    b = mix(255, 43, clamp);
  }
  return `rgb(${r},${g},${b})`;
}
