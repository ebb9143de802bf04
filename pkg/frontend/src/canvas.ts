/** View state for the image canvas.
 *
 * The one rule that matters: annotations live in image pixel coordinates,
 * and zoom, pan, and brightness exist only on the way to the screen. The
 * transform is linear, so screenToImage(imageToScreen(p)) is exact up to
 * floating point, and changing the view never rewrites a stored vertex. */

export type Point = [number, number];

export class CanvasState {
  private _zoom = 1;
  private _panX = 0;
  private _panY = 0;
  private _brightness = 1;
  activeClass = 1;
  holeMode = false;

  get zoom(): number {
    return this._zoom;
  }

  get pan(): Point {
    return [this._panX, this._panY];
  }

  get brightness(): number {
    return this._brightness;
  }

  setZoom(zoom: number): void {
    if (!Number.isFinite(zoom) || zoom <= 0) {
      throw new Error(`zoom must be a positive number, got ${zoom}`);
    }
    this._zoom = zoom;
  }

  setPan(x: number, y: number): void {
    this._panX = x;
    this._panY = y;
  }

  /** Display-only: consumed as a CSS filter, never baked into pixels. */
  setBrightness(factor: number): void {
    if (!Number.isFinite(factor) || factor <= 0) {
      throw new Error(`brightness must be a positive number, got ${factor}`);
    }
    this._brightness = factor;
  }

  cssFilter(): string {
    return `brightness(${this._brightness})`;
  }

  imageToScreen([x, y]: Point): Point {
    return [(x - this._panX) * this._zoom, (y - this._panY) * this._zoom];
  }

  screenToImage([sx, sy]: Point): Point {
    return [sx / this._zoom + this._panX, sy / this._zoom + this._panY];
  }
}
