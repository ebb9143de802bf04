/** The frozen segmentation class table, mirrored from the server.
 * Background (0) is implicit and never offered in the palette. */

export interface SegClassDef {
  index: number;
  name: string;
  label: string;
  /** display color, matches the server's mask palette */
  color: string;
}

export const CLASS_TABLE: readonly SegClassDef[] = [
  { index: 0, name: "background", label: "Background", color: "#000000" },
  { index: 1, name: "gallbladder", label: "Gallbladder", color: "#00ff00" },
  { index: 2, name: "cystic_duct", label: "Cystic duct", color: "#ffff00" },
  { index: 3, name: "cystic_artery", label: "Cystic artery", color: "#ff0000" },
  { index: 4, name: "cystic_plate", label: "Cystic plate", color: "#0000ff" },
  {
    index: 5,
    name: "hepatocystic_triangle_dissection",
    label: "Hepatocystic triangle dissection",
    color: "#ff00ff",
  },
  {
    index: 6,
    name: "surgical_instrument",
    label: "Surgical instrument",
    color: "#00ffff",
  },
  { index: 7, name: "ignore", label: "Ignore", color: "#ffffff" },
];

/** Classes an annotator may pick. Everything except implicit background;
 * Ignore stays selectable for unidentifiable structures and variants. */
export function paletteClasses(): SegClassDef[] {
  return CLASS_TABLE.filter((c) => c.index !== 0);
}

export function classByIndex(index: number): SegClassDef {
  const def = CLASS_TABLE[index];
  if (!def) throw new Error(`no segmentation class with index ${index}`);
  return def;
}

/** Side-panel guidance shown next to the polygon editor. */
export const SEGMENTATION_GUIDANCE: readonly string[] = [
  "Label only dissected structures: the duct and artery must show their tubular shape, and a triangle window counts only when you can see through it.",
  "Label what is visible. Tissue showing through a dissected window gets its own class, not the window's.",
  "Margins unclear in a dark image? Raise the brightness slider; it changes the display only.",
  "Carry a straight line through the gallbladder-duct-artery junction to bound the lower gallbladder margin and the distal duct and artery.",
  "Only segment duct or artery you have conclusively identified; open the video at this timepoint to confirm.",
  "Both branches of a bifurcated cystic artery are cystic artery.",
  "Tubular but unidentifiable? Use Ignore. Ignore also marks anatomical variants.",
  "Anatomy seen through a fenestrated jaw stays background; the same instrument showing through its own jaw is instrument. Use hole mode to cut openings.",
  "Before finishing a procedure, step frames in order and check classes agree frame to frame.",
];
