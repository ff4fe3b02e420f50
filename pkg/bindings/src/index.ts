export { SceneFeatClient, decodeFeaturesDocument } from "./client.js";
export { formatHexFloat, parseHexFloat, parseHexFloatArray } from "./hexfloat.js";
export type {
  DetectionList,
  DetectionRecord,
  ExtractionNotes,
  ExtractOptions,
  FeatureSet,
  MaskArray,
} from "./types.js";
export { SceneFeatClientError } from "./types.js";
