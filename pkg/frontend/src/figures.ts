/**
 * The seven figure kinds rendered from artifact directories.
 *
 * Strictly a replot layer: slopes, intervals, moments, and action
 * values are read from CSV meta fields written by the experiment
 * runner, never recomputed here.  The only arithmetic is mapping data
 * to screen coordinates.
 */

import { ArtifactError, Manifest, Table, column, metaField, readManifest, readTable } from './artifacts.js';
import {
  COLORS,
  HEIGHT,
  MARGINS,
  SvgDoc,
  WIDTH,
  divergingColor,
  finiteExtent,
  linearScale,
  logScale,
} from './svg.js';

export interface FigureOptions {
  /** Draw reference overlays (guide lines, recorded density curves). */
  overlay: boolean;
  /** Force linear axes where the default is log-log. */
  linearAxes: boolean;
}

export const DEFAULT_OPTIONS: FigureOptions = { overlay: true, linearAxes: false };

type Renderer = (dir: string, manifest: Manifest, opts: FigureOptions) => string;

const X0 = MARGINS.left;
const X1 = WIDTH - MARGINS.right;
const Y0 = HEIGHT - MARGINS.bottom;
const Y1 = MARGINS.top;

/** Display form of a meta value: shortened, but sourced verbatim. */
function short(raw: string, digits = 4): string {
  const x = Number(raw);
  return Number.isFinite(x) ? parseFloat(x.toPrecision(digits)).toString() : raw;
}

function expectKind(dir: string, manifest: Manifest, producer: string, figure: string): void {
  if (manifest.kind !== producer) {
    throw new ArtifactError(
      dir,
      `figure '${figure}' needs a '${producer}' artifact, found kind '${manifest.kind}'`,
    );
  }
}

/** CSV table fetch with a pointed message when the run was binary. */
function requireCsv(dir: string, base: string, manifest: Manifest): Table {
  const name = `${base}.csv`;
  if (manifest.files[name] === undefined && manifest.files[`${base}.bin`] !== undefined) {
    throw new ArtifactError(
      `${dir}/${base}.bin`,
      'binary payload; the plot layer reads the CSV contract, re-run with --format csv',
    );
  }
  return readTable(dir, name, manifest);
}

function pairs(xs: number[], ys: number[]): Array<[number, number]> {
  const out: Array<[number, number]> = [];
  for (let i = 0; i < xs.length; i++) {
    const x = xs[i] as number;
    const y = ys[i] as number;
    if (Number.isFinite(x) && Number.isFinite(y)) out.push([x, y]);
  }
  return out;
}

function renderSimulateTrajectory(dir: string, manifest: Manifest, opts: FigureOptions): string {
  expectKind(dir, manifest, 'simulate', 'simulate-trajectory');
  const u = requireCsv(dir, 'u_path', manifest);
  const v = requireCsv(dir, 'v_path', manifest);
  const path = `${dir}/u_path.csv`;
  const t = column(u, 't', path);
  const modes = u.columns.filter((c) => c.startsWith('mode_')).slice(0, 3);
  if (modes.length === 0) {
    throw new ArtifactError(path, 'no mode columns');
  }
  const series = modes.map((m) => column(u, m, path));
  const vFirst = column(v, 'mode_1', `${dir}/v_path.csv`);

  let lo = Infinity;
  let hi = -Infinity;
  for (const s of [...series, vFirst]) {
    const [a, b] = finiteExtent(s);
    lo = Math.min(lo, a);
    hi = Math.max(hi, b);
  }
  const [tLo, tHi] = finiteExtent(t);
  const sx = linearScale(tLo, tHi, X0, X1);
  const sy = linearScale(lo, hi, Y0, Y1);

  const doc = new SvgDoc();
  doc.title(`slow/fast trajectory (eps = ${short(metaField(u, 'epsilon', path))})`);
  doc.axes(sx, sy, 't', 'mode coefficient');
  series.forEach((s, i) => {
    doc.polyline(pairs(t, s).map(([x, y]) => [sx(x), sy(y)]), COLORS[i % COLORS.length] as string);
  });
  if (opts.overlay) {
    doc.polyline(pairs(t, vFirst).map(([x, y]) => [sx(x), sy(y)]), '#888888', 'stroke-dasharray="5,3"');
  }
  const entries: Array<[string, string]> = modes.map((m, i) => [
    `u ${m.replace('_', ' ')}`,
    COLORS[i % COLORS.length] as string,
  ]);
  const dashed = modes.map(() => false);
  if (opts.overlay) {
    entries.push(['v mode 1', '#888888']);
    dashed.push(true);
  }
  doc.legend(entries, dashed);
  return doc.render();
}

function renderAverageRate(dir: string, manifest: Manifest, opts: FigureOptions): string {
  expectKind(dir, manifest, 'average-rate', 'average-rate');
  const table = requireCsv(dir, 'rate', manifest);
  const path = `${dir}/rate.csv`;
  const eps = column(table, 'epsilon', path);
  const err = column(table, 'mean_error', path);
  const pts = pairs(eps, err);
  if (pts.length === 0) {
    throw new ArtifactError(path, 'no finite rows');
  }
  const [eLo, eHi] = finiteExtent(eps);
  const [rLo, rHi] = finiteExtent(err);
  const log = !opts.linearAxes;
  const sx = log ? logScale(eLo / 1.3, eHi * 1.3, X0, X1) : linearScale(0, eHi * 1.1, X0, X1);
  const sy = log ? logScale(rLo / 1.5, rHi * 1.5, Y0, Y1) : linearScale(0, rHi * 1.1, Y0, Y1);

  const doc = new SvgDoc();
  doc.title('averaging error vs eps');
  doc.axes(sx, sy, 'eps', 'mean sup-error');
  if (opts.overlay && log) {
    // reference line of slope 1/2 through the largest-eps point
    const [ax, ay] = pts[0] as [number, number];
    const guide = pts.map(([x]) => [sx(x), sy(ay * Math.sqrt(x / ax))] as [number, number]);
    doc.polyline(guide, '#999999', 'stroke-dasharray="6,4"');
    doc.text(X1 - 8, Y1 + 30, 'slope 1/2 guide', 'text-anchor="end" fill="#777777"');
  }
  doc.polyline(pts.map(([x, y]) => [sx(x), sy(y)]), COLORS[0] as string);
  for (const [x, y] of pts) {
    doc.circle(sx(x), sy(y), 3.2, COLORS[0] as string);
  }
  const slope = short(metaField(table, 'slope', path), 3);
  const se = short(metaField(table, 'slope_se', path), 2);
  doc.text(X1 - 8, Y1 + 14, `fitted slope ${slope} +/- ${se}`, 'text-anchor="end" fill="#111111"');
  return doc.render();
}

function renderDeviationHist(dir: string, manifest: Manifest, opts: FigureOptions): string {
  expectKind(dir, manifest, 'deviation', 'deviation-hist');
  const table = requireCsv(dir, 'samples', manifest);
  const path = `${dir}/samples.csv`;
  const z = column(table, 'z_eps_mode1', path).filter((x) => Number.isFinite(x));
  if (z.length === 0) {
    throw new ArtifactError(path, 'no finite deviation samples');
  }
  const mean = Number(metaField(table, 'limit_mean', path));
  const varRec = Number(metaField(table, 'limit_var', path));
  const sd = Math.sqrt(Math.max(varRec, 0));

  const [zLo, zHi] = finiteExtent(z);
  const lo = Math.min(zLo, mean - 3.5 * sd);
  const hi = Math.max(zHi, mean + 3.5 * sd);
  const nBins = 30;
  const w = (hi - lo) / nBins;
  const counts = new Array<number>(nBins).fill(0);
  for (const x of z) {
    const b = Math.min(nBins - 1, Math.max(0, Math.floor((x - lo) / w)));
    counts[b] = (counts[b] as number) + 1;
  }
  // density normalization puts bars and the recorded curve on one axis
  const dens = counts.map((c) => c / (z.length * w));
  let peak = Math.max(...dens);
  if (sd > 0) peak = Math.max(peak, 1 / (sd * Math.sqrt(2 * Math.PI)));

  const sx = linearScale(lo, hi, X0, X1);
  const sy = linearScale(0, peak * 1.08, Y0, Y1);
  const doc = new SvgDoc();
  doc.title(`deviation endpoint law (eps = ${short(metaField(table, 'epsilon', path))})`);
  doc.axes(sx, sy, 'z(T), mode 1', 'density');
  dens.forEach((d, i) => {
    const xa = sx(lo + i * w);
    const xb = sx(lo + (i + 1) * w);
    doc.rect(xa, sy(d), xb - xa - 0.5, Y0 - sy(d), '#9ec7e8', 'stroke="#5a92c4" stroke-width="0.5"');
  });
  if (opts.overlay && sd > 0) {
    const curve: Array<[number, number]> = [];
    for (let i = 0; i <= 160; i++) {
      const x = lo + ((hi - lo) * i) / 160;
      const d = Math.exp(-0.5 * ((x - mean) / sd) ** 2) / (sd * Math.sqrt(2 * Math.PI));
      curve.push([sx(x), sy(d)]);
    }
    doc.polyline(curve, COLORS[1] as string, 'stroke-width="2"');
    doc.text(X1 - 8, Y1 + 30, 'recorded limit density', 'text-anchor="end" fill="#777777"');
  }
  doc.text(X1 - 8, Y1 + 14, `KS = ${short(metaField(table, 'ks', path), 3)}`, 'text-anchor="end" fill="#111111"');
  return doc.render();
}

function renderInstantonHeatmap(dir: string, manifest: Manifest, _opts: FigureOptions): string {
  expectKind(dir, manifest, 'instanton', 'instanton-heatmap');
  const table = requireCsv(dir, 'instanton_path', manifest);
  const path = `${dir}/instanton_path.csv`;
  const t = column(table, 't', path);
  const modeCols = table.columns.filter((c) => c.startsWith('mode_'));
  if (modeCols.length === 0) {
    throw new ArtifactError(path, 'no mode columns');
  }
  const grid = modeCols.map((m) => column(table, m, path));
  let peak = 0;
  for (const row of grid) {
    for (const x of row) {
      if (Number.isFinite(x)) peak = Math.max(peak, Math.abs(x));
    }
  }
  if (peak === 0) peak = 1;

  const nT = t.length;
  const nM = modeCols.length;
  const doc = new SvgDoc();
  doc.title(`instanton path, action = ${short(metaField(table, 'action', path))}`);
  const cellW = (X1 - X0) / nT;
  const cellH = (Y0 - Y1) / nM;
  for (let m = 0; m < nM; m++) {
    for (let k = 0; k < nT; k++) {
      const val = (grid[m] as number[])[k] as number;
      const color = Number.isFinite(val) ? divergingColor(val / peak) : '#bbbbbb';
      // mode 1 at the bottom row, matching the y axis direction
      doc.rect(X0 + k * cellW, Y0 - (m + 1) * cellH, cellW + 0.4, cellH + 0.4, color);
    }
  }
  const sx = linearScale(finiteExtent(t)[0], finiteExtent(t)[1], X0, X1);
  for (const tick of sx.ticks) {
    if (tick < sx.domain[0] || tick > sx.domain[1]) continue;
    doc.text(sx(tick), Y0 + 16, `${tick}`, 'text-anchor="middle" fill="#333333"');
  }
  for (let m = 0; m < nM; m++) {
    doc.text(X0 - 6, Y0 - (m + 0.5) * cellH + 4, `${m + 1}`, 'text-anchor="end" fill="#333333"');
  }
  doc.line(X0, Y0, X1, Y0, '#444444');
  doc.line(X0, Y0, X0, Y1, '#444444');
  doc.text((X0 + X1) / 2, HEIGHT - 8, 't', 'text-anchor="middle" fill="#111111"');
  doc.text(14, (Y0 + Y1) / 2, 'mode', `text-anchor="middle" fill="#111111" transform="rotate(-90 14 ${(Y0 + Y1) / 2})"`);
  const conv = metaField(table, 'converged', path) === '1' ? 'converged' : 'not converged';
  doc.text(X1 - 8, Y1 + 14, `${conv} in ${metaField(table, 'n_iters', path)} iters`, 'text-anchor="end" fill="#111111"');
  return doc.render();
}

function renderAmplitudeTrajectory(dir: string, manifest: Manifest, _opts: FigureOptions): string {
  expectKind(dir, manifest, 'ssm-compare', 'amplitude-trajectory');
  const table = requireCsv(dir, 'amplitude', manifest);
  const path = `${dir}/amplitude.csv`;
  const t = column(table, 't', path);
  const a = column(table, 'a', path);
  const pts = pairs(t, a);
  if (pts.length === 0) {
    throw new ArtifactError(path, 'no finite rows');
  }
  const [tLo, tHi] = finiteExtent(t);
  const [aLo, aHi] = finiteExtent(a);
  const sx = linearScale(tLo, tHi, X0, X1);
  const sy = linearScale(Math.min(aLo, 0), aHi * 1.05, Y0, Y1);
  const doc = new SvgDoc();
  const lp = short(metaField(table, 'lam_prime', path));
  const ep = short(metaField(table, 'epsilon', path));
  doc.title(`amplitude on the superslow manifold (lam' = ${lp}, eps = ${ep})`);
  doc.axes(sx, sy, 't', 'a(t)');
  doc.polyline(pts.map(([x, y]) => [sx(x), sy(y)]), COLORS[0] as string);
  return doc.render();
}

function renderDriftDifference(dir: string, manifest: Manifest, _opts: FigureOptions): string {
  expectKind(dir, manifest, 'ssm-compare', 'drift-difference');
  const table = requireCsv(dir, 'drift_difference', manifest);
  const path = `${dir}/drift_difference.csv`;
  const a = column(table, 'a', path);
  const sf = column(table, 'sf_drift', path);
  const ldp = column(table, 'ldp_drift', path);
  const diff = column(table, 'difference', path);
  const [aLo, aHi] = finiteExtent(a);
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of [sf, ldp, diff]) {
    const [l, h] = finiteExtent(s);
    lo = Math.min(lo, l);
    hi = Math.max(hi, h);
  }
  const sx = linearScale(aLo, aHi, X0, X1);
  const sy = linearScale(lo, hi, Y0, Y1);
  const doc = new SvgDoc();
  doc.title(`amplitude drifts (lam' = ${short(metaField(table, 'lam_prime', path))}, eps = ${short(metaField(table, 'epsilon', path))})`);
  doc.axes(sx, sy, 'a', 'drift');
  doc.polyline(pairs(a, sf).map(([x, y]) => [sx(x), sy(y)]), COLORS[0] as string);
  doc.polyline(pairs(a, ldp).map(([x, y]) => [sx(x), sy(y)]), COLORS[1] as string);
  doc.polyline(pairs(a, diff).map(([x, y]) => [sx(x), sy(y)]), COLORS[2] as string, 'stroke-dasharray="5,3"');
  doc.legend(
    [
      ['slow-fast model', COLORS[0] as string],
      ['averaged model', COLORS[1] as string],
      ['difference', COLORS[2] as string],
    ],
    [false, false, true],
  );
  return doc.render();
}

function renderLdpProbe(dir: string, manifest: Manifest, opts: FigureOptions): string {
  expectKind(dir, manifest, 'ldp-probe', 'ldp-probe');
  const table = requireCsv(dir, 'probe', manifest);
  const path = `${dir}/probe.csv`;
  const eps = column(table, 'epsilon', path);
  const val = column(table, 'eps_log_p', path);
  const pts = pairs(eps, val);
  if (pts.length === 0) {
    throw new ArtifactError(path, 'no epsilon with a positive hit count');
  }
  const lower = Number(metaField(table, 'i_phi', path)) + Number(metaField(table, 'gamma', path));
  const [eLo, eHi] = finiteExtent(eps);
  const [vLo, vHi] = finiteExtent(val);
  const sx = linearScale(0, eHi * 1.1, X0, X1);
  const sy = linearScale(Math.min(vLo, -lower) * 1.12, Math.max(vHi, 0), Y0, Y1);

  const doc = new SvgDoc();
  doc.title(`tube probability vs the action bound (delta = ${short(metaField(table, 'delta', path))})`);
  doc.axes(sx, sy, 'eps', 'eps log p');
  if (opts.overlay) {
    const row0 = table.rows[0] as number[];
    const lb = row0[table.columns.indexOf('lower_bound')] as number;
    const iRef = -Number(metaField(table, 'i_phi', path));
    doc.line(X0, sy(lb), X1, sy(lb), '#c23b3b', 'stroke-dasharray="6,4"');
    doc.text(X0 + 6, sy(lb) - 5, '-(I + gamma) bound', 'fill="#c23b3b"');
    doc.line(X0, sy(iRef), X1, sy(iRef), '#999999', 'stroke-dasharray="3,3"');
    doc.text(X0 + 6, sy(iRef) - 5, '-I', 'fill="#777777"');
  }
  doc.polyline(pts.map(([x, y]) => [sx(x), sy(y)]), COLORS[0] as string);
  for (const [x, y] of pts) {
    doc.circle(sx(x), sy(y), 3.5, COLORS[0] as string);
  }
  const skipped = val.filter((x) => !Number.isFinite(x)).length;
  if (skipped > 0) {
    doc.text(X1 - 8, Y1 + 14, `${skipped} eps below Monte-Carlo reach`, 'text-anchor="end" fill="#777777"');
  }
  return doc.render();
}

export const FIGURE_KINDS: Record<string, Renderer> = {
  'simulate-trajectory': renderSimulateTrajectory,
  'average-rate': renderAverageRate,
  'deviation-hist': renderDeviationHist,
  'instanton-heatmap': renderInstantonHeatmap,
  'amplitude-trajectory': renderAmplitudeTrajectory,
  'drift-difference': renderDriftDifference,
  'ldp-probe': renderLdpProbe,
};

/** Render one figure kind from an artifact directory into SVG text. */
export function renderFigure(kind: string, dir: string, opts: FigureOptions = DEFAULT_OPTIONS): string {
  const renderer = FIGURE_KINDS[kind];
  if (renderer === undefined) {
    throw new Error(`unknown figure kind '${kind}' (have ${Object.keys(FIGURE_KINDS).join(', ')})`);
  }
  const manifest = readManifest(dir);
  return renderer(dir, manifest, opts);
}
