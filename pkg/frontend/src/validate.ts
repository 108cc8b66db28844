// Client-side mirror of the service's request validation, so the UI never
// submits a request the server would 422.

import type { Workspace } from "./types";

export const MAX_GROUPS = 3;
export const MAX_IMAGES_PER_GROUP = 3;
export const MIN_K = 2;

export function validateWorkspace(ws: Workspace): string[] {
  const out: string[] = [];
  if (ws.groups.length === 0) out.push("add at least one concept group");
  if (ws.groups.length > MAX_GROUPS) out.push(`at most ${MAX_GROUPS} concept groups`);
  if (ws.groups.length > 0 && !ws.groups.some((g) => g.keyword.trim()))
    out.push("at least one group needs a keyword");
  ws.groups.forEach((g, i) => {
    if (g.images.length > MAX_IMAGES_PER_GROUP)
      out.push(`group ${i + 1}: at most ${MAX_IMAGES_PER_GROUP} images`);
    if (g.groupWeight < 0 || g.groupWeight > 1)
      out.push(`group ${i + 1}: weight must be in [0,1]`);
    g.images.forEach((img, j) => {
      if (img.weight < 0 || img.weight > 1)
        out.push(`group ${i + 1} image ${j + 1}: weight must be in [0,1]`);
      if (img.crop) {
        const [, , w, h] = img.crop;
        if (w <= 0 || h <= 0) out.push(`group ${i + 1} image ${j + 1}: crop needs positive area`);
      }
    });
  });
  if (ws.symmetryEnabled && ws.symmetryK < MIN_K) out.push(`symmetry k must be >= ${MIN_K}`);
  if (ws.outputCount < 1) out.push("output count must be >= 1");
  if (ws.seed < 0) out.push("seed must be nonnegative");
  if (!(ws.sketchStrength > 0 && ws.sketchStrength <= 1))
    out.push("sketch strength must be in (0,1]");
  return out;
}
