#!/usr/bin/env node
import { writeFileSync } from 'fs';
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';
import { KINDS, Kind, render } from './plots.js';

const args = yargs(hideBin(process.argv))
  .usage('$0 --kind cdf --in tasks.csv --col exec_us --out fig.svg')
  .option('kind', { choices: KINDS, demandOption: true })
  .option('in', { type: 'string', array: true, demandOption: true, describe: 'input artifact(s)' })
  .option('col', { type: 'string', describe: 'column or series to plot' })
  .option('label', { type: 'string', array: true, describe: 'series label(s), one per input' })
  .option('out', { type: 'string', demandOption: true, describe: 'output image (SVG)' })
  .strict()
  .parseSync();

try {
  const svg = render({
    kind: args.kind as Kind,
    inputs: args.in,
    col: args.col,
    labels: args.label,
    out: args.out,
  });
  writeFileSync(args.out, svg);
} catch (err) {
  console.error(`plot: ${err instanceof Error ? err.message : err}`);
  process.exit(1);
}
