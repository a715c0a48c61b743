/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_blobdemo_free: (a: number, b: number) => void;
export const __wbg_calibration_free: (a: number, b: number) => void;
export const blobdemo_adversarial: (a: number, b: number) => [number, number, number, number];
export const blobdemo_adversarial_accuracy: (a: number, b: number) => [number, number, number];
export const blobdemo_bounds: (a: number) => [number, number];
export const blobdemo_calibrate: (a: number, b: number, c: number) => [number, number, number];
export const blobdemo_decision_field: (a: number, b: number) => [number, number, number, number];
export const blobdemo_distance_matrix: (a: number) => [number, number, number, number];
export const blobdemo_dunn: (a: number) => [number, number, number];
export const blobdemo_labels: (a: number) => [number, number];
export const blobdemo_manifold_distance: (a: number, b: number) => [number, number, number];
export const blobdemo_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const blobdemo_points: (a: number) => [number, number];
export const blobdemo_sorted_labels: (a: number) => [number, number];
export const blobdemo_train: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const blobdemo_trained: (a: number) => number;
export const calibration_counts: (a: number) => [number, number];
export const calibration_edges: (a: number) => [number, number];
export const calibration_global_min: (a: number) => number;
export const calibration_recommended: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
