/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_game_free: (a: number, b: number) => void;
export const game_done: (a: number) => number;
export const game_manual: (a: number) => [number, number];
export const game_new: (a: number, b: number, c: number, d: number, e: bigint, f: number) => [number, number, number];
export const game_render: (a: number) => [number, number];
export const game_step: (a: number, b: number, c: number) => [number, number, number, number];
export const game_subgoal: (a: number, b: number, c: bigint, d: number) => [number, number, number, number];
export const game_transcript: (a: number) => [number, number];
export const gumbel_frequency: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
