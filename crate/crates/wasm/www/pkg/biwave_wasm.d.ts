/* tslint:disable */
/* eslint-disable */

/**
 * Outcome of one scenario run, flattened for JavaScript.
 */
export class DemoRun {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `|rho|` row-major: one row per time.
     */
    magnitudes(table: string): Float64Array;
    passed(): boolean;
    /**
     * The full report as JSON (assertions, diagnostics, flags).
     */
    report_json(): string;
    table_names(): string[];
    times(table: string): Float64Array;
    x(table: string): Float64Array;
}

/**
 * Preset config for `name` as pretty JSON.
 */
export function demoConfig(name: string): string;

/**
 * Run a scenario from a JSON config.
 */
export function runScenario(name: string, config_json: string): DemoRun;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demorun_free: (a: number, b: number) => void;
    readonly demoConfig: (a: number, b: number) => [number, number, number, number];
    readonly demorun_magnitudes: (a: number, b: number, c: number) => [number, number];
    readonly demorun_passed: (a: number) => number;
    readonly demorun_report_json: (a: number) => [number, number];
    readonly demorun_table_names: (a: number) => [number, number];
    readonly demorun_times: (a: number, b: number, c: number) => [number, number];
    readonly demorun_x: (a: number, b: number, c: number) => [number, number];
    readonly runScenario: (a: number, b: number, c: number, d: number) => [number, number, number];
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
