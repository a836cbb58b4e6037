/* tslint:disable */
/* eslint-disable */

/**
 * Per-period capacity probabilities `P(B = k)` for a preset.
 */
export function capacity_pmf(preset: string): Float64Array;

/**
 * Performance report of a two-level policy, as JSON.
 */
export function evaluate_tsp(preset: string, express_fee: number, lastminute_fee: number, switch_age: number, cutoff_age: number): string;

/**
 * Names of the built-in benchmark settings.
 */
export function preset_names(): string[];

/**
 * Sweep of the express fee up to the switch age over `steps` points of
 * `[0, regular price]`, with the other parameters held. Returns `[fee, E[M], E[G^V]]` triples,
 * flattened.
 */
export function profit_curve(preset: string, lastminute_fee: number, switch_age: number, cutoff_age: number, steps: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly capacity_pmf: (a: number, b: number) => [number, number, number, number];
    readonly evaluate_tsp: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly preset_names: () => [number, number];
    readonly profit_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_drop_slice: (a: number, b: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
