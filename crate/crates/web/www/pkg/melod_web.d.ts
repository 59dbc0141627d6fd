/* tslint:disable */
/* eslint-disable */

/**
 * Per-step relative energy errors of both multiscale methods.
 */
export class Comparison {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly lod: Float64Array;
    readonly melod: Float64Array;
}

/**
 * Piecewise constant data on the triangles of the fine mesh.
 */
export class TriangleField {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Vertex coordinates, six numbers `x0 y0 x1 y1 x2 y2` per triangle.
     */
    readonly coords: Float64Array;
    /**
     * One value per triangle.
     */
    readonly values: Float64Array;
}

export function basisFunction(kind: string, contrast: number, seed: number, fine_level: number, coarse_level: number, k: number, attached: string, shown: string): TriangleField;

export function coefficientField(kind: string, contrast: number, seed: number, fine_level: number): TriangleField;

export function compare(kind: string, contrast: number, seed: number, fine_level: number, coarse_level: number, k: number, n_steps: number): Comparison;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_comparison_free: (a: number, b: number) => void;
    readonly __wbg_trianglefield_free: (a: number, b: number) => void;
    readonly basisFunction: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number, k: number) => [number, number, number];
    readonly coefficientField: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly compare: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
    readonly comparison_lod: (a: number) => [number, number];
    readonly comparison_melod: (a: number) => [number, number];
    readonly trianglefield_coords: (a: number) => [number, number];
    readonly trianglefield_values: (a: number) => [number, number];
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
