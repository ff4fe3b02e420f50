/** Shared request/response shapes for the extraction service. */

/** Dense segmentation mask: row-major category indices, 0 = void. */
export interface MaskArray {
  width: number;
  height: number;
  /** Number of non-void categories L; pixel values lie in [0, L]. */
  segCategories: number;
  /** width*height values, row-major. */
  pixels: readonly number[] | Int32Array;
}

export interface DetectionRecord {
  /** 1-based object category index, or a name resolved server-side. */
  category: number | string;
  /** [xMin, yMin, xMax, yMax] in pixel coordinates. */
  bbox: readonly [number, number, number, number];
  confidence: number;
}

export interface DetectionList {
  imageWidth: number;
  imageHeight: number;
  /** Object vocabulary size N. */
  objCategories: number;
  detections: readonly DetectionRecord[];
}

/** Extraction knobs, mirroring the CLI flags of the same names. */
export interface ExtractOptions {
  /** --bins: number of inter-object distance bins K (default 3). */
  bins?: number;
  /** --rho: distance-to-bin scale factor (default 3). */
  rho?: number;
  /** --conf-threshold: detections below it are dropped (default 0.2). */
  confThreshold?: number;
}

/** All extracted feature blocks; absent blocks are null. */
export interface FeatureSet {
  /** L x 7 log-rescaled Hu shape invariants per segmentation category. */
  shmf: number[][] | null;
  /** L x 5 coverage/position/spread rows per segmentation category. */
  ssf: number[][] | null;
  /** Length-N object occurrence counts. */
  sfv: number[] | null;
  /** N x N x K inter-object distance-bin counts. */
  sfm: number[][][] | null;
}

export interface ExtractionNotes {
  droppedLowConfidence: number;
  clamped: number;
}

/** Error raised for non-2xx service responses, carrying the server's message. */
export class SceneFeatClientError extends Error {
  readonly errorType: string;
  readonly status: number;

  constructor(status: number, errorType: string, message: string) {
    super(message);
    this.name = "SceneFeatClientError";
    this.status = status;
    this.errorType = errorType;
  }
}
