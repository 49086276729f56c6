/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const kappaCurve: (a: number, b: number, c: bigint, d: number, e: number) => [number, number, number, number];
export const mStarCurve: (a: number, b: number, c: bigint, d: number) => [number, number, number, number];
export const tvRun: (a: number, b: number, c: bigint, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
