/* tslint:disable */
/* eslint-disable */

export class BlobDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Adversarial counterparts of every point at level `beta`, interleaved `x, y`.
     */
    adversarial(beta: number): Float64Array;
    /**
     * Accuracy on the adversarial counterparts at level `beta`.
     */
    adversarial_accuracy(beta: number): number;
    /**
     * `[x_min, x_max, y_min, y_max]` of the points, padded by 15%.
     */
    bounds(): Float64Array;
    /**
     * Intra-class distance histogram and recommended β for the standardized points.
     */
    calibrate(bins: number, fraction: number): Calibration;
    /**
     * Predicted class on a `resolution × resolution` grid over
     * [`bounds`](Self::bounds), top row first.
     */
    decision_field(resolution: number): Uint8Array;
    /**
     * Row-major class-sorted distance matrix of the embedding.
     */
    distance_matrix(): Float64Array;
    dunn(): number;
    labels(): Uint32Array;
    /**
     * Mean last-hidden-layer distance between points and their adversarial counterparts.
     */
    manifold_distance(beta: number): number;
    constructor(classes: number, per_class: number, separation: number, seed: number);
    /**
     * Interleaved `x, y` coordinates.
     */
    points(): Float64Array;
    /**
     * Labels in the order used by [`distance_matrix`](Self::distance_matrix).
     */
    sorted_labels(): Uint32Array;
    /**
     * Trains from scratch and returns the training accuracy. With
     * `lambda_m > 0` the manifold term switches on halfway through the
     * first stage.
     */
    train(lambda_m: number, beta: number, epochs: number, seed: number): number;
    trained(): boolean;
}

export class Calibration {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    counts(): Float64Array;
    /**
     * `bins + 1` bin edges.
     */
    edges(): Float64Array;
    readonly global_min: number;
    readonly recommended: number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_blobdemo_free: (a: number, b: number) => void;
    readonly __wbg_calibration_free: (a: number, b: number) => void;
    readonly blobdemo_adversarial: (a: number, b: number) => [number, number, number, number];
    readonly blobdemo_adversarial_accuracy: (a: number, b: number) => [number, number, number];
    readonly blobdemo_bounds: (a: number) => [number, number];
    readonly blobdemo_calibrate: (a: number, b: number, c: number) => [number, number, number];
    readonly blobdemo_decision_field: (a: number, b: number) => [number, number, number, number];
    readonly blobdemo_distance_matrix: (a: number) => [number, number, number, number];
    readonly blobdemo_dunn: (a: number) => [number, number, number];
    readonly blobdemo_labels: (a: number) => [number, number];
    readonly blobdemo_manifold_distance: (a: number, b: number) => [number, number, number];
    readonly blobdemo_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly blobdemo_points: (a: number) => [number, number];
    readonly blobdemo_sorted_labels: (a: number) => [number, number];
    readonly blobdemo_train: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly blobdemo_trained: (a: number) => number;
    readonly calibration_counts: (a: number) => [number, number];
    readonly calibration_edges: (a: number) => [number, number];
    readonly calibration_global_min: (a: number) => number;
    readonly calibration_recommended: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
