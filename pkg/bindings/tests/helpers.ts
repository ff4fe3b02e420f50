import { readFileSync } from "node:fs";
import { join } from "node:path";

import { parseHexFloat } from "../src/hexfloat.js";
import type { DetectionList, MaskArray } from "../src/types.js";

export const TMP = join(__dirname, "..", ".tmp");

export function testContext(): { baseUrl: string; datasets: string[] } {
  return JSON.parse(readFileSync(join(TMP, "context.json"), "utf-8"));
}

/** Minimal binary-PGM reader for the dataset masks. */
export function readPgm(path: string, segCategories: number): MaskArray {
  const data = readFileSync(path);
  if (data.subarray(0, 2).toString("ascii") !== "P5") {
    throw new Error(`${path}: expected a binary PGM`);
  }
  const fields: number[] = [];
  let pos = 2;
  while (fields.length < 3) {
    while (pos < data.length && /\s/.test(String.fromCharCode(data[pos]))) pos++;
    if (data[pos] === 0x23) {
      while (pos < data.length && data[pos] !== 0x0a) pos++;
      continue;
    }
    let token = "";
    while (pos < data.length && !/\s/.test(String.fromCharCode(data[pos]))) {
      token += String.fromCharCode(data[pos]);
      pos++;
    }
    fields.push(parseInt(token, 10));
  }
  pos++; // single whitespace byte after maxval
  const [width, height, maxval] = fields;
  const pixels = new Int32Array(width * height);
  if (maxval < 256) {
    for (let k = 0; k < pixels.length; k++) pixels[k] = data[pos + k];
  } else {
    for (let k = 0; k < pixels.length; k++) {
      pixels[k] = (data[pos + 2 * k] << 8) | data[pos + 2 * k + 1];
    }
  }
  return { width, height, segCategories, pixels };
}

/** Reader for the detections documents (hex-float coordinates). */
export function readDetections(path: string): DetectionList {
  const doc = JSON.parse(readFileSync(path, "utf-8"));
  return {
    imageWidth: doc.image_width,
    imageHeight: doc.image_height,
    objCategories: doc.obj_categories,
    detections: doc.detections.map(
      (rec: { category: number; bbox: string[]; confidence: string }) => ({
        category: rec.category,
        bbox: rec.bbox.map((v) => parseHexFloat(v)) as [number, number, number, number],
        confidence: parseHexFloat(rec.confidence),
      }),
    ),
  };
}

export interface ManifestRow {
  id: string;
  label: string;
  mask: string;
  detections: string;
}

export function readManifest(dir: string): { rows: ManifestRow[]; config: Record<string, number> } {
  const lines = readFileSync(join(dir, "manifest.tsv"), "utf-8").trimEnd().split("\n");
  const config = JSON.parse(lines[0].replace(/^# \S+ /, ""));
  const rows = lines.slice(2).map((line) => {
    const [id, label, , mask, detections] = line.split("\t");
    return { id, label, mask, detections };
  });
  return { rows, config };
}
