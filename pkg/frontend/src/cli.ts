#!/usr/bin/env node
/**
 * plot <figure-kind> --in DIR --out FILE [--no-overlay] [--linear-axes]
 *
 * Renders one SVG figure from a slowfast-ldp artifact directory.
 * Exits 0 on success, 1 on missing or corrupt artifacts (the message
 * names the offending file), 2 on usage errors.
 */

import { writeFileSync } from 'node:fs';
import { pathToFileURL } from 'node:url';
import { parseArgs } from 'node:util';

import { ArtifactError } from './artifacts.js';
import { DEFAULT_OPTIONS, FIGURE_KINDS, renderFigure } from './figures.js';

const USAGE = `usage: plot <figure-kind> --in DIR --out FILE [--no-overlay] [--linear-axes]
figure kinds: ${Object.keys(FIGURE_KINDS).join(', ')}`;

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        in: { type: 'string' },
        out: { type: 'string' },
        'no-overlay': { type: 'boolean', default: false },
        'linear-axes': { type: 'boolean', default: false },
      },
    });
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n${USAGE}\n`);
    return 2;
  }
  const kind = parsed.positionals[0];
  const dir = parsed.values.in;
  const out = parsed.values.out;
  if (kind === undefined || dir === undefined || out === undefined || parsed.positionals.length > 1) {
    process.stderr.write(`${USAGE}\n`);
    return 2;
  }
  if (FIGURE_KINDS[kind] === undefined) {
    process.stderr.write(`unknown figure kind '${kind}'\n${USAGE}\n`);
    return 2;
  }
  const opts = {
    ...DEFAULT_OPTIONS,
    overlay: !parsed.values['no-overlay'],
    linearAxes: Boolean(parsed.values['linear-axes']),
  };
  try {
    const svg = renderFigure(kind, dir, opts);
    writeFileSync(out, svg, 'utf-8');
  } catch (err) {
    if (err instanceof ArtifactError) {
      process.stderr.write(`artifact error: ${err.message}\n`);
      return 1;
    }
    process.stderr.write(`plot failed: ${(err as Error).message}\n`);
    return 1;
  }
  return 0;
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
