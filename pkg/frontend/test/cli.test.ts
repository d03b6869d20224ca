import { spawnSync } from 'node:child_process';
import { cpSync, mkdtempSync, readFileSync, rmSync, statSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { fileURLToPath } from 'node:url';
import { afterEach, describe, expect, it } from 'vitest';

const GOLDEN = fileURLToPath(new URL('./golden', import.meta.url));
const CLI = fileURLToPath(new URL('../dist/cli.js', import.meta.url));

const KINDS: Array<[string, string]> = [
  ['simulate-trajectory', 'simulate'],
  ['average-rate', 'average-rate'],
  ['deviation-hist', 'deviation'],
  ['instanton-heatmap', 'instanton'],
  ['amplitude-trajectory', 'ssm-compare'],
  ['drift-difference', 'ssm-compare'],
  ['ldp-probe', 'ldp-probe'],
];

const scratch: string[] = [];

function tempDir(): string {
  const dir = mkdtempSync(join(tmpdir(), 'plots-cli-'));
  scratch.push(dir);
  return dir;
}

function plot(...args: string[]) {
  return spawnSync(process.execPath, [CLI, ...args], { encoding: 'utf-8' });
}

afterEach(() => {
  while (scratch.length > 0) {
    rmSync(scratch.pop() as string, { recursive: true, force: true });
  }
});

describe('plot CLI', () => {
  it('renders every figure kind from the goldens', () => {
    const out = tempDir();
    for (const [kind, golden] of KINDS) {
      const file = join(out, `${kind}.svg`);
      const res = plot(kind, '--in', join(GOLDEN, golden), '--out', file);
      expect(res.status, `${kind}: ${res.stderr}`).toBe(0);
      expect(statSync(file).size).toBeGreaterThan(1000);
      expect(readFileSync(file, 'utf-8')).toContain('</svg>');
    }
  });

  it('exits 2 without arguments', () => {
    const res = plot();
    expect(res.status).toBe(2);
    expect(res.stderr).toContain('usage:');
  });

  it('exits 2 on an unknown kind', () => {
    const res = plot('volcano', '--in', join(GOLDEN, 'simulate'), '--out', join(tempDir(), 'x.svg'));
    expect(res.status).toBe(2);
    expect(res.stderr).toContain("unknown figure kind 'volcano'");
  });

  it('exits 2 on an unknown flag', () => {
    const res = plot('average-rate', '--in', join(GOLDEN, 'average-rate'), '--oops', 'x');
    expect(res.status).toBe(2);
  });

  it('exits 1 on a corrupt artifact and names the file', () => {
    const dir = tempDir();
    cpSync(join(GOLDEN, 'ldp-probe'), dir, { recursive: true });
    const victim = join(dir, 'probe.csv');
    writeFileSync(victim, readFileSync(victim, 'utf-8').replace('150', '151'));
    const res = plot('ldp-probe', '--in', dir, '--out', join(dir, 'x.svg'));
    expect(res.status).toBe(1);
    expect(res.stderr).toContain(victim);
    expect(res.stderr).toContain('checksum mismatch');
  });

  it('exits 1 on an empty artifact directory', () => {
    const dir = tempDir();
    const res = plot('ldp-probe', '--in', dir, '--out', join(tempDir(), 'x.svg'));
    expect(res.status).toBe(1);
    expect(res.stderr).toContain('empty artifact directory');
  });

  it('honors --no-overlay', () => {
    const out = tempDir();
    const file = join(out, 'rate.svg');
    const res = plot('average-rate', '--in', join(GOLDEN, 'average-rate'), '--out', file, '--no-overlay');
    expect(res.status).toBe(0);
    expect(readFileSync(file, 'utf-8')).not.toContain('slope 1/2 guide');
  });
});
