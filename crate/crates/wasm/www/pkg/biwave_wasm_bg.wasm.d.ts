/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demorun_free: (a: number, b: number) => void;
export const demoConfig: (a: number, b: number) => [number, number, number, number];
export const demorun_magnitudes: (a: number, b: number, c: number) => [number, number];
export const demorun_passed: (a: number) => number;
export const demorun_report_json: (a: number) => [number, number];
export const demorun_table_names: (a: number) => [number, number];
export const demorun_times: (a: number, b: number, c: number) => [number, number];
export const demorun_x: (a: number, b: number, c: number) => [number, number];
export const runScenario: (a: number, b: number, c: number, d: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_start: () => void;
