/**
 * HTTP client for the scenefeat extraction service.
 *
 * The client performs no feature arithmetic of its own: it ships
 * caller-provided arrays to the service and decodes the exact wire values
 * (hexadecimal float literals for reals, plain integers for counts), so
 * results are bit-identical to the service's file outputs.
 */

import { parseHexFloat } from "./hexfloat.js";
import {
  DetectionList,
  ExtractionNotes,
  ExtractOptions,
  FeatureSet,
  MaskArray,
  SceneFeatClientError,
} from "./types.js";

interface BlockDoc {
  shape: number[];
  values: (string | number)[];
}

interface FeaturesDocument {
  schema: string;
  seg_categories: number;
  obj_categories: number;
  bins: number;
  blocks: {
    shmf: BlockDoc | null;
    ssf: BlockDoc | null;
    sfv: BlockDoc | null;
    sfm: BlockDoc | null;
    global: BlockDoc | null;
  };
}

function reshapeRows(flat: number[], rows: number, cols: number): number[][] {
  const out: number[][] = [];
  for (let r = 0; r < rows; r++) {
    out.push(flat.slice(r * cols, (r + 1) * cols));
  }
  return out;
}

function decodeRealBlock(block: BlockDoc | null): number[][] | null {
  if (block === null) return null;
  const [rows, cols] = block.shape;
  const flat = block.values.map((v) => parseHexFloat(v as string));
  return reshapeRows(flat, rows, cols);
}

function decodeSfm(block: BlockDoc | null): number[][][] | null {
  if (block === null) return null;
  const [n, , k] = block.shape;
  const values = block.values as number[];
  const out: number[][][] = [];
  for (let i = 0; i < n; i++) {
    const plane: number[][] = [];
    for (let j = 0; j < n; j++) {
      const base = (i * n + j) * k;
      plane.push(values.slice(base, base + k));
    }
    out.push(plane);
  }
  return out;
}

export function decodeFeaturesDocument(doc: FeaturesDocument): FeatureSet {
  return {
    shmf: decodeRealBlock(doc.blocks.shmf),
    ssf: decodeRealBlock(doc.blocks.ssf),
    sfv: doc.blocks.sfv === null ? null : (doc.blocks.sfv.values as number[]).slice(),
    sfm: decodeSfm(doc.blocks.sfm),
  };
}

function maskPayload(mask: MaskArray) {
  return {
    width: mask.width,
    height: mask.height,
    seg_categories: mask.segCategories,
    pixels: Array.from(mask.pixels),
  };
}

function detectionsPayload(detections: DetectionList) {
  return {
    image_width: detections.imageWidth,
    image_height: detections.imageHeight,
    obj_categories: detections.objCategories,
    detections: detections.detections.map((d) => ({
      category: d.category,
      bbox: [...d.bbox],
      confidence: d.confidence,
    })),
  };
}

function paramsPayload(options: ExtractOptions) {
  return {
    bins: options.bins ?? 3,
    rho: options.rho ?? 3.0,
    confidence_threshold: options.confThreshold ?? 0.2,
  };
}

export class SceneFeatClient {
  readonly baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      let errorType = "HTTPError";
      let message = `HTTP ${resp.status}`;
      try {
        const payload = (await resp.json()) as {
          error?: { type?: string; message?: string };
          detail?: unknown;
        };
        if (payload.error) {
          errorType = payload.error.type ?? errorType;
          message = payload.error.message ?? message;
        } else if (payload.detail) {
          errorType = "InvalidRequest";
          message = JSON.stringify(payload.detail);
        }
      } catch {
        // keep the generic message
      }
      throw new SceneFeatClientError(resp.status, errorType, message);
    }
    return (await resp.json()) as T;
  }

  async health(): Promise<{ status: string; version: string }> {
    const resp = await fetch(`${this.baseUrl}/v1/health`);
    if (!resp.ok) {
      throw new SceneFeatClientError(resp.status, "HTTPError", `HTTP ${resp.status}`);
    }
    return (await resp.json()) as { status: string; version: string };
  }

  /**
   * Extract every available feature family for one scene.
   *
   * Either input may be omitted; absent inputs yield null blocks. The
   * optional `notes` sink receives the loader's drop/clamp counters.
   */
  async extractAll(
    mask: MaskArray | null,
    detections: DetectionList | null = null,
    options: ExtractOptions = {},
    notes?: (notes: ExtractionNotes) => void,
  ): Promise<FeatureSet> {
    const body: Record<string, unknown> = { params: paramsPayload(options) };
    if (mask !== null) body.mask = maskPayload(mask);
    if (detections !== null) body.detections = detectionsPayload(detections);
    const resp = await this.post<{
      features: FeaturesDocument;
      dropped_low_confidence: number;
      clamped: number;
    }>("/v1/extract", body);
    notes?.({
      droppedLowConfidence: resp.dropped_low_confidence,
      clamped: resp.clamped,
    });
    return decodeFeaturesDocument(resp.features);
  }

  /** Per-category Hu shape invariants (L x 7). */
  async extractShmf(mask: MaskArray, options: ExtractOptions = {}): Promise<number[][]> {
    const features = await this.extractAll(mask, null, options);
    return features.shmf!;
  }

  /** Per-category coverage/position/spread rows (L x 5). */
  async extractSsf(mask: MaskArray, options: ExtractOptions = {}): Promise<number[][]> {
    const features = await this.extractAll(mask, null, options);
    return features.ssf!;
  }

  /** Object occurrence counts (length N). */
  async extractSfv(detections: DetectionList, options: ExtractOptions = {}): Promise<number[]> {
    const features = await this.extractAll(null, detections, options);
    return features.sfv!;
  }

  /** Inter-object distance-bin counts (N x N x K). */
  async extractSfm(
    detections: DetectionList,
    options: ExtractOptions = {},
  ): Promise<number[][][]> {
    const features = await this.extractAll(null, detections, options);
    return features.sfm!;
  }
}
