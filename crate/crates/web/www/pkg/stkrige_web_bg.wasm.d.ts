/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_scene_free: (a: number, b: number) => void;
export const scene_grid_n: (a: number) => number;
export const scene_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: bigint) => [number, number, number];
export const scene_observations: (a: number) => [number, number];
export const scene_predict: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const scene_score: (a: number, b: number, c: number) => number;
export const scene_side: (a: number) => number;
export const scene_truth: (a: number) => [number, number];
export const variogram_curves: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
