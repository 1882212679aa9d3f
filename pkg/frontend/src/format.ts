/** Every number the UI shows goes through one of these; no local math. */

export function fmt4(value: number): string {
  return value.toFixed(4);
}

/** Signed delta with an explicit plus for increases. */
export function fmtDelta(value: number): string {
  const text = fmt4(value);
  return value > 0 ? `+${text}` : text;
}

export function fmtPercent(value: number): string {
  return `${(value * 100).toFixed(1)}%`;
}

/** Clamp a slider value into [0, 1]; used before a draft ever leaves the input layer. */
export function clampUnit(value: number): number {
  if (Number.isNaN(value)) return 0;
  return Math.min(1, Math.max(0, value));
}
