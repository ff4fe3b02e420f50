/**
 * C99 hexadecimal float literals, the exact wire encoding for real values.
 *
 * The service and its file formats serialize every float64 as produced by
 * CPython's float.hex(): `[sign]0x<int>.<13 hex digits>p<exp>` for normal
 * values, `[sign]0x0.<digits>p-1022` for subnormals, `0x0.0p+0` for zero.
 * Parsing reconstructs the exact bit pattern; formatting reproduces the
 * canonical CPython form byte for byte.
 */

const HEX_RE = /^(-?)0x([0-9a-fA-F]+)(?:\.([0-9a-fA-F]*))?p([+-]?\d+)$/;

/** Multiply by 2^exp exactly (one correctly-rounded step at the subnormal edge). */
function scaleByPowerOfTwo(value: number, exp: number): number {
  let result = value;
  let remaining = exp;
  // chunked so intermediates never overflow or hit subnormals early
  while (remaining > 1000) {
    result *= Math.pow(2, 1000);
    remaining -= 1000;
  }
  while (remaining < -1000) {
    result *= Math.pow(2, -1000);
    remaining += 1000;
  }
  return result * Math.pow(2, remaining);
}

/** Parse a hexadecimal float literal to the exact number it denotes. */
export function parseHexFloat(text: string): number {
  const match = HEX_RE.exec(text.trim());
  if (!match) {
    throw new Error(`not a hexadecimal float literal: ${JSON.stringify(text)}`);
  }
  const [, sign, intPart, fracPart = "", expPart] = match;
  const digits = intPart + fracPart;
  const mantissa = BigInt(`0x${digits}`);
  const exponent = parseInt(expPart, 10) - 4 * fracPart.length;
  // float64 mantissas fit in 53 bits, so Number(mantissa) is exact
  if (mantissa > 9007199254740991n) {
    throw new Error(`mantissa exceeds float64 precision: ${text}`);
  }
  const magnitude = scaleByPowerOfTwo(Number(mantissa), exponent);
  return sign === "-" ? -magnitude : magnitude;
}

/** Format a number exactly as CPython's float.hex() would. */
export function formatHexFloat(value: number): string {
  if (!Number.isFinite(value)) {
    throw new Error(`cannot encode non-finite value ${value}`);
  }
  const view = new DataView(new ArrayBuffer(8));
  view.setFloat64(0, value);
  const bits = view.getBigUint64(0);
  const sign = bits >> 63n ? "-" : "";
  const biasedExp = Number((bits >> 52n) & 0x7ffn);
  const fraction = bits & 0xfffffffffffffn;
  if (biasedExp === 0 && fraction === 0n) {
    return `${sign}0x0.0p+0`;
  }
  const fracHex = fraction.toString(16).padStart(13, "0");
  if (biasedExp === 0) {
    return `${sign}0x0.${fracHex}p-1022`;
  }
  const exp = biasedExp - 1023;
  return `${sign}0x1.${fracHex}p${exp >= 0 ? "+" : ""}${exp}`;
}

/** Parse an array of hexadecimal float literals. */
export function parseHexFloatArray(values: readonly string[]): number[] {
  return values.map((v) => parseHexFloat(v));
}
