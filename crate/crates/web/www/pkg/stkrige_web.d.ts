/* tslint:disable */
/* eslint-disable */

/**
 * A simulated field: scattered observations over an hour and the true
 * values on a grid at the middle of that hour.
 */
export class Scene {
    free(): void;
    [Symbol.dispose](): void;
    constructor(family: string, sill: number, nugget: number, range: number, k: number, n_obs: number, grid_n: number, seed: bigint);
    /**
     * Observation coordinates and values as consecutive (x, y, t, value).
     */
    observations(): Float64Array;
    predict(method: string, k: number, c: number): Float64Array;
    /**
     * RMSE of a predicted grid against the simulated truth.
     */
    score(values: Float64Array): number;
    truth(): Float64Array;
    readonly grid_n: number;
    readonly side: number;
}

export function variogram_curves(family: string, sill: number, nugget: number, range: number, k: number, h_max: number, n: number, time_lags: Float64Array): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_scene_free: (a: number, b: number) => void;
    readonly scene_grid_n: (a: number) => number;
    readonly scene_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: bigint) => [number, number, number];
    readonly scene_observations: (a: number) => [number, number];
    readonly scene_predict: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly scene_score: (a: number, b: number, c: number) => number;
    readonly scene_side: (a: number) => number;
    readonly scene_truth: (a: number) => [number, number];
    readonly variogram_curves: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
