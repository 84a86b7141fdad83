import { describe, expect, it } from "vitest";

import { PlaybackModel } from "../src/playback.js";

describe("PlaybackModel", () => {
  it("advances frames at the configured fps", () => {
    const pb = new PlaybackModel(30, 10);
    pb.tick(500); // 0.5 s at 10 fps
    expect(pb.frameIndex).toBe(5);
    expect(pb.playedThroughOnce).toBe(false);
  });

  it("loops and records completed passes", () => {
    const pb = new PlaybackModel(10, 10);
    pb.tick(1500); // 15 frames
    expect(pb.frameIndex).toBe(5);
    expect(pb.completedLoops).toBe(1);
    expect(pb.playedThroughOnce).toBe(true);
  });

  it("both panes share one clock by construction", () => {
    const pb = new PlaybackModel(20, 10);
    pb.tick(730);
    const leftIndex = pb.frameIndex;
    const rightIndex = pb.frameIndex;
    expect(leftIndex).toBe(rightIndex);
  });

  it("respects the speed multiplier", () => {
    const slow = new PlaybackModel(100, 10);
    const fast = new PlaybackModel(100, 10);
    fast.speed = 2.0;
    slow.tick(1000);
    fast.tick(1000);
    expect(slow.frameIndex).toBe(10);
    expect(fast.frameIndex).toBe(20);
  });

  it("ignores ticks while paused", () => {
    const pb = new PlaybackModel(10, 10);
    pb.togglePlaying();
    pb.tick(1000);
    expect(pb.frameIndex).toBe(0);
  });

  it("restart clears progress", () => {
    const pb = new PlaybackModel(10, 10);
    pb.tick(2500);
    pb.restart();
    expect(pb.frameIndex).toBe(0);
    expect(pb.playedThroughOnce).toBe(false);
  });

  it("rejects empty clips", () => {
    expect(() => new PlaybackModel(0)).toThrow();
  });
});
