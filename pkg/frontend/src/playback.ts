/** Shared playback clock for the two trajectory panes.
 *
 * Both segments of a query have the same length and play in lockstep off a
 * single frame index; playback loops. The submit gate needs to know whether
 * the labeler has watched both clips at least once, so the model tracks
 * completed loops.
 */

export const DEFAULT_FPS = 10;

export class PlaybackModel {
  frameIndex = 0;
  playing = true;
  speed = 1.0;
  completedLoops = 0;
  private elapsedMs = 0;

  constructor(
    public readonly frameCount: number,
    public readonly fps: number = DEFAULT_FPS,
  ) {
    if (frameCount < 1) throw new Error("playback needs at least one frame");
  }

  /** Advance the clock; call from the animation loop. */
  tick(deltaMs: number): void {
    if (!this.playing || deltaMs <= 0) return;
    this.elapsedMs += deltaMs * this.speed;
    const framesElapsed = Math.floor((this.elapsedMs / 1000) * this.fps);
    this.completedLoops = Math.floor(framesElapsed / this.frameCount);
    this.frameIndex = framesElapsed % this.frameCount;
  }

  get playedThroughOnce(): boolean {
    return this.completedLoops >= 1;
  }

  togglePlaying(): void {
    this.playing = !this.playing;
  }

  restart(): void {
    this.elapsedMs = 0;
    this.frameIndex = 0;
    this.completedLoops = 0;
  }
}
