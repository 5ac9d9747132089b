/* tslint:disable */
/* eslint-disable */

export class Game {
    free(): void;
    [Symbol.dispose](): void;
    done(): boolean;
    manual(): string;
    constructor(env: string, stage: string, seed: bigint, agents: number);
    render(): string;
    step(policy: string): string;
    subgoal(agent: number, seed: bigint, tau: number): string;
    transcript(): string;
}

export function gumbel_frequency(logit: number, tau: number, samples: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_game_free: (a: number, b: number) => void;
    readonly game_done: (a: number) => number;
    readonly game_manual: (a: number) => [number, number];
    readonly game_new: (a: number, b: number, c: number, d: number, e: bigint, f: number) => [number, number, number];
    readonly game_render: (a: number) => [number, number];
    readonly game_step: (a: number, b: number, c: number) => [number, number, number, number];
    readonly game_subgoal: (a: number, b: number, c: bigint, d: number) => [number, number, number, number];
    readonly game_transcript: (a: number) => [number, number];
    readonly gumbel_frequency: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
