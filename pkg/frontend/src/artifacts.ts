/**
 * Readers for slowfast-ldp artifact directories.
 *
 * Every table is a CSV with an eight-line commented header; every run
 * directory carries a manifest.json with sha256 checksums.  Reading a
 * table goes through the manifest first: a file that is absent from the
 * manifest or fails its checksum is refused before a single row is
 * parsed.
 */

import { createHash } from 'node:crypto';
import { existsSync, readFileSync, readdirSync, statSync } from 'node:fs';
import { join } from 'node:path';

export const CSV_FORMAT = 'slowfast-ldp csv 1';
export const MANIFEST_FORMAT = 'slowfast-ldp manifest 1';

/** Failure tied to one artifact file; message always includes the path. */
export class ArtifactError extends Error {
  readonly path: string;

  constructor(path: string, detail: string) {
    super(`${path}: ${detail}`);
    this.name = 'ArtifactError';
    this.path = path;
  }
}

export interface Manifest {
  format: string;
  kind: string;
  configHash: string;
  seed: number;
  version: string;
  status: string;
  files: Record<string, string>;
}

export interface Table {
  kind: string;
  configHash: string;
  seed: number;
  version: string;
  meta: Record<string, string>;
  columns: string[];
  /** Row-major numeric data; non-numeric cells become NaN. */
  rows: number[][];
}

function sha256(buf: Buffer): string {
  return createHash('sha256').update(buf).digest('hex');
}

/** Load and validate manifest.json from an artifact directory. */
export function readManifest(dir: string): Manifest {
  if (!existsSync(dir) || !statSync(dir).isDirectory()) {
    throw new ArtifactError(dir, 'not an artifact directory');
  }
  if (readdirSync(dir).length === 0) {
    throw new ArtifactError(dir, 'empty artifact directory');
  }
  const path = join(dir, 'manifest.json');
  if (!existsSync(path)) {
    throw new ArtifactError(path, 'missing manifest');
  }
  let raw: unknown;
  try {
    raw = JSON.parse(readFileSync(path, 'utf-8'));
  } catch {
    throw new ArtifactError(path, 'manifest is not valid JSON');
  }
  const m = raw as Record<string, unknown>;
  if (m['format'] !== MANIFEST_FORMAT) {
    throw new ArtifactError(path, `unsupported manifest format ${String(m['format'])}`);
  }
  if (typeof m['files'] !== 'object' || m['files'] === null) {
    throw new ArtifactError(path, 'manifest has no file map');
  }
  return {
    format: String(m['format']),
    kind: String(m['kind']),
    configHash: String(m['config_hash']),
    seed: Number(m['seed']),
    version: String(m['version']),
    status: String(m['status']),
    files: m['files'] as Record<string, string>,
  };
}

/** Read one file after proving it against the manifest checksum. */
export function readVerified(dir: string, name: string, manifest: Manifest): Buffer {
  const path = join(dir, name);
  const expected = manifest.files[name];
  if (expected === undefined) {
    throw new ArtifactError(path, 'not listed in manifest.json');
  }
  if (!existsSync(path)) {
    throw new ArtifactError(path, 'listed in manifest but missing on disk');
  }
  const buf = readFileSync(path);
  const actual = sha256(buf);
  if (actual !== expected) {
    throw new ArtifactError(path, `checksum mismatch (manifest ${expected.slice(0, 12)}..., file ${actual.slice(0, 12)}...)`);
  }
  return buf;
}

function headerField(path: string, line: string | undefined, idx: number, name: string): string {
  const prefix = `# ${name}:`;
  if (line === undefined || !line.startsWith(prefix)) {
    throw new ArtifactError(path, `header line ${idx + 1} should start with '${prefix}'`);
  }
  return line.slice(prefix.length).trim();
}

function parseMeta(path: string, line: string): Record<string, string> {
  const meta: Record<string, string> = {};
  for (const tok of line.split(' ')) {
    if (tok === '') continue;
    const eq = tok.indexOf('=');
    if (eq < 0) {
      throw new ArtifactError(path, `bad meta token '${tok}'`);
    }
    meta[tok.slice(0, eq)] = tok.slice(eq + 1);
  }
  return meta;
}

/** Parse the eight-line header and numeric body of a CSV artifact. */
export function parseTable(path: string, text: string): Table {
  const lines = text.split('\n');
  if (lines.length < 8) {
    throw new ArtifactError(path, 'truncated header');
  }
  if (lines[0] !== `# ${CSV_FORMAT}`) {
    throw new ArtifactError(path, `bad format line '${lines[0]}'`);
  }
  const kind = headerField(path, lines[1], 1, 'kind');
  const configHash = headerField(path, lines[2], 2, 'config');
  const seed = Number(headerField(path, lines[3], 3, 'seed'));
  const version = headerField(path, lines[4], 4, 'version');
  const meta = parseMeta(path, headerField(path, lines[5], 5, 'meta'));
  const columns = headerField(path, lines[6], 6, 'columns').split(',');
  if (lines[7] !== '# end-header') {
    throw new ArtifactError(path, `missing end-header marker, got '${lines[7]}'`);
  }
  const rows: number[][] = [];
  for (let i = 8; i < lines.length; i++) {
    const line = lines[i];
    if (line === undefined || line === '') continue;
    const cells = line.split(',');
    if (cells.length !== columns.length) {
      throw new ArtifactError(path, `row ${i - 7} has ${cells.length} cells, expected ${columns.length}`);
    }
    rows.push(cells.map(Number));
  }
  return { kind, configHash, seed, version, meta, columns, rows };
}

/** Checksum-gated table read. */
export function readTable(dir: string, name: string, manifest: Manifest): Table {
  const buf = readVerified(dir, name, manifest);
  return parseTable(join(dir, name), buf.toString('utf-8'));
}

/** Pull one column out of a table by name. */
export function column(table: Table, name: string, path: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new ArtifactError(path, `no column '${name}' (have ${table.columns.join(', ')})`);
  }
  return table.rows.map((row) => row[idx] as number);
}

/** Required meta field, as its verbatim string. */
export function metaField(table: Table, key: string, path: string): string {
  const val = table.meta[key];
  if (val === undefined) {
    throw new ArtifactError(path, `no meta field '${key}'`);
  }
  return val;
}
