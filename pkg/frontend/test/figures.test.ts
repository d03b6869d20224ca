import { cpSync, mkdtempSync, readFileSync, rmSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { fileURLToPath } from 'node:url';
import { afterEach, describe, expect, it } from 'vitest';

import { ArtifactError } from '../dist/artifacts.js';
import { DEFAULT_OPTIONS, FIGURE_KINDS, renderFigure } from '../dist/figures.js';

const GOLDEN = fileURLToPath(new URL('./golden', import.meta.url));

/** Figure kind -> golden artifact directory that feeds it. */
const SOURCES: Record<string, string> = {
  'simulate-trajectory': 'simulate',
  'average-rate': 'average-rate',
  'deviation-hist': 'deviation',
  'instanton-heatmap': 'instanton',
  'amplitude-trajectory': 'ssm-compare',
  'drift-difference': 'ssm-compare',
  'ldp-probe': 'ldp-probe',
};

const scratch: string[] = [];

function tempCopy(golden: string): string {
  const dir = mkdtempSync(join(tmpdir(), 'plots-fig-'));
  scratch.push(dir);
  cpSync(join(GOLDEN, golden), dir, { recursive: true });
  return dir;
}

afterEach(() => {
  while (scratch.length > 0) {
    rmSync(scratch.pop() as string, { recursive: true, force: true });
  }
});

describe('renderFigure', () => {
  it('covers every declared kind', () => {
    expect(Object.keys(SOURCES).sort()).toEqual(Object.keys(FIGURE_KINDS).sort());
  });

  for (const [kind, golden] of Object.entries(SOURCES)) {
    it(`renders ${kind} from the ${golden} golden`, () => {
      const svg = renderFigure(kind, join(GOLDEN, golden));
      expect(svg.startsWith('<svg ')).toBe(true);
      expect(svg.trimEnd().endsWith('</svg>')).toBe(true);
      expect(svg.length).toBeGreaterThan(1000);
    });

    it(`renders ${kind} deterministically`, () => {
      const a = renderFigure(kind, join(GOLDEN, golden));
      const b = renderFigure(kind, join(GOLDEN, golden));
      expect(a).toBe(b);
    });
  }

  it('annotates the recorded slope, never a refit', () => {
    const dir = join(GOLDEN, 'average-rate');
    const meta = readFileSync(join(dir, 'rate.csv'), 'utf-8')
      .split('\n')[5] as string;
    const recorded = Number(/slope=([^ ]+)/.exec(meta)?.[1]);
    const svg = renderFigure('average-rate', dir);
    const shown = parseFloat(recorded.toPrecision(3)).toString();
    expect(svg).toContain(`fitted slope ${shown}`);
    expect(svg).toContain('slope 1/2 guide');
  });

  it('drops overlays when asked', () => {
    const svg = renderFigure('average-rate', join(GOLDEN, 'average-rate'), {
      ...DEFAULT_OPTIONS,
      overlay: false,
    });
    expect(svg).not.toContain('slope 1/2 guide');
  });

  it('supports linear axes for the rate figure', () => {
    const svg = renderFigure('average-rate', join(GOLDEN, 'average-rate'), {
      ...DEFAULT_OPTIONS,
      linearAxes: true,
    });
    expect(svg.startsWith('<svg ')).toBe(true);
  });

  it('overlays the recorded limit density on the deviation histogram', () => {
    const svg = renderFigure('deviation-hist', join(GOLDEN, 'deviation'));
    expect(svg).toContain('recorded limit density');
    expect(svg).toContain('KS = ');
    expect(svg).toContain('<rect');
  });

  it('annotates the instanton action and iteration count from meta', () => {
    const svg = renderFigure('instanton-heatmap', join(GOLDEN, 'instanton'));
    expect(svg).toContain('action = 1.021');
    expect(svg).toContain('converged in 589 iters');
  });

  it('draws the probe bound lines', () => {
    const svg = renderFigure('ldp-probe', join(GOLDEN, 'ldp-probe'));
    expect(svg).toContain('-(I + gamma) bound');
  });

  it('rejects an unknown figure kind', () => {
    expect(() => renderFigure('spectrogram', join(GOLDEN, 'simulate'))).toThrow(
      /unknown figure kind 'spectrogram'/,
    );
  });

  it('rejects a kind mismatch between figure and artifact', () => {
    expect(() => renderFigure('average-rate', join(GOLDEN, 'simulate'))).toThrow(
      /needs a 'average-rate' artifact/,
    );
  });

  it('refuses corrupt input and names the file', () => {
    const dir = tempCopy('deviation');
    const victim = join(dir, 'samples.csv');
    const text = readFileSync(victim, 'utf-8');
    writeFileSync(victim, `${text}tail-garbage`);
    try {
      renderFigure('deviation-hist', dir);
      expect.unreachable();
    } catch (err) {
      expect(err).toBeInstanceOf(ArtifactError);
      expect((err as Error).message).toContain(victim);
    }
  });

  it('refuses an empty artifact directory', () => {
    const dir = mkdtempSync(join(tmpdir(), 'plots-empty-'));
    scratch.push(dir);
    expect(() => renderFigure('simulate-trajectory', dir)).toThrow(/empty artifact directory/);
  });
});
