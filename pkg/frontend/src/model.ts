/** Pure view-model logic: upload validation, slider clamping, gallery order,
 * result-view selection and monotone progress. Kept DOM-free for testing.
 */

import type { JobState } from "./api.js";

const IMAGE_TYPES = ["image/png", "image/jpeg"];
const VIDEO_EXTENSIONS = [".y4m", ".mp4", ".avi", ".mov"];

export type Selection =
  | { kind: "image-pair" | "video"; files: File[] }
  | { error: string };

export function validateSelection(files: File[]): Selection {
  if (files.length === 0) {
    return { error: "select a video or two images" };
  }
  const images = files.filter((f) => IMAGE_TYPES.includes(f.type));
  if (images.length === files.length) {
    if (files.length !== 2) {
      return { error: "exactly two images required" };
    }
    return { kind: "image-pair", files };
  }
  if (files.length > 1) {
    return { error: "select either one video or two images, not a mix" };
  }
  const name = files[0].name.toLowerCase();
  if (!VIDEO_EXTENSIONS.some((ext) => name.endsWith(ext))) {
    return { error: "unsupported file type" };
  }
  return { kind: "video", files };
}

export const EXPONENT_MIN = 1;
export const EXPONENT_MAX = 5;

/** Coerce any slider value to an integer in [1, 5]. */
export function clampExponent(value: number): number {
  if (!Number.isFinite(value)) {
    return EXPONENT_MIN;
  }
  return Math.min(EXPONENT_MAX, Math.max(EXPONENT_MIN, Math.round(value)));
}

export interface Tile {
  url: string;
  /** Position t = k / 2^e within the pair, for labelling. */
  numerator: number;
  denominator: number;
  endpoint: boolean;
}

/** Lay out the gallery: left endpoint, interpolated k=1..2^e−1, right endpoint. */
export function galleryTiles(
  endpoints: string[],
  frames: string[],
  exponent: number,
): Tile[] {
  const den = 2 ** exponent;
  const tiles: Tile[] = [];
  if (endpoints.length > 0) {
    tiles.push({ url: endpoints[0], numerator: 0, denominator: den, endpoint: true });
  }
  frames.forEach((url, i) => {
    tiles.push({ url, numerator: i + 1, denominator: den, endpoint: false });
  });
  if (endpoints.length > 1) {
    tiles.push({ url: endpoints[1], numerator: den, denominator: den, endpoint: true });
  }
  return tiles;
}

export type ResultView =
  | { mode: "player"; container: boolean }
  | { mode: "gallery"; note: string | null }
  | { mode: "error"; detail: string }
  | { mode: "pending" };

/** Decide what to render for a job state snapshot. */
export function resultView(job: JobState, containerAvailable: boolean): ResultView {
  if (job.status === "failed") {
    return { mode: "error", detail: job.error ?? "job failed" };
  }
  if (job.status !== "done") {
    return { mode: "pending" };
  }
  if (job.kind === "image-pair") {
    return { mode: "gallery", note: null };
  }
  if (containerAvailable) {
    return { mode: "player", container: true };
  }
  return {
    mode: "gallery",
    note: "no browser-playable encoder configured; showing frames instead",
  };
}

/** Progress may never move backwards across polls. */
export function mergeProgress(previous: number, reported: number): number {
  return Math.max(previous, Math.min(1, Math.max(0, reported)));
}

export function isTerminal(status: JobState["status"]): boolean {
  return status === "done" || status === "failed";
}

/** Frame URLs for the video-job gallery fallback (every output frame). */
export function videoFrameUrls(id: string, frameCount: number, base = ""): string[] {
  const urls: string[] = [];
  for (let k = 0; k < frameCount; k += 1) {
    urls.push(`${base}/api/jobs/${id}/frames/${k}`);
  }
  return urls;
}
