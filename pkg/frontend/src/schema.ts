/**
 * Readers for the three frozen run artifacts. Nothing here knows about the
 * simulator; the files are the whole contract.
 */

import { readFileSync } from 'fs';
import Papa from 'papaparse';

export const TASKS_COLUMNS = [
  'task_id', 'arrival_us', 'first_run_us', 'completion_us', 'demand_us',
  'memory_mb', 'preemptions', 'exec_us', 'resp_us', 'turn_us', 'cost_usd',
] as const;

export const UTIL_COLUMNS = ['window_start_us', 'core_id', 'busy_fraction', 'group'] as const;

export interface UtilRow {
  window_start_us: number;
  core_id: number;
  busy_fraction: number;
  group: string;
}

export interface PerCore {
  core_id: number;
  group: string;
  busy_us: number;
  overhead_us: number;
  slice_preemptions: number;
  limit_preemptions: number;
}

export interface Summary {
  run_id: string;
  policy: string;
  n_tasks: number;
  total_cost_usd: string;
  aggregates: Record<string, Record<string, number>>;
  per_core: PerCore[];
  series: Record<string, number[][]>;
}

export class SchemaError extends Error {}

function parseCsv(path: string): Record<string, string>[] {
  const parsed = Papa.parse<Record<string, string>>(readFileSync(path, 'utf8'), {
    header: true,
    delimiter: ',',
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new SchemaError(`${path}: ${e.message} (row ${e.row})`);
  }
  return parsed.data;
}

function requireColumns(path: string, row: Record<string, string>, wanted: readonly string[]): void {
  for (const col of wanted) {
    if (!(col in row)) {
      throw new SchemaError(`${path}: missing column "${col}"`);
    }
  }
}

function numeric(path: string, row: Record<string, string>, col: string): number {
  const v = Number(row[col]);
  if (!Number.isFinite(v)) {
    throw new SchemaError(`${path}: column "${col}" has non-numeric value "${row[col]}"`);
  }
  return v;
}

/** One numeric column out of tasks.csv, schema-checked against the full header. */
export function readTasksColumn(path: string, col: string): number[] {
  const rows = parseCsv(path);
  if (rows.length === 0) {
    throw new SchemaError(`${path}: no data rows`);
  }
  requireColumns(path, rows[0], TASKS_COLUMNS);
  if (!TASKS_COLUMNS.includes(col as (typeof TASKS_COLUMNS)[number])) {
    throw new SchemaError(`${path}: missing column "${col}"`);
  }
  return rows.map((r) => numeric(path, r, col));
}

export function readUtil(path: string): UtilRow[] {
  const rows = parseCsv(path);
  if (rows.length === 0) {
    throw new SchemaError(`${path}: no data rows`);
  }
  requireColumns(path, rows[0], UTIL_COLUMNS);
  return rows.map((r) => ({
    window_start_us: numeric(path, r, 'window_start_us'),
    core_id: numeric(path, r, 'core_id'),
    busy_fraction: numeric(path, r, 'busy_fraction'),
    group: r.group,
  }));
}

export function readSummary(path: string): Summary {
  const raw = JSON.parse(readFileSync(path, 'utf8'));
  for (const key of ['run_id', 'total_cost_usd', 'aggregates', 'per_core', 'series']) {
    if (!(key in raw)) {
      throw new SchemaError(`${path}: missing column "${key}"`);
    }
  }
  return raw as Summary;
}
