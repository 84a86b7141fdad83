/** Selection + submission latch for one query.
 *
 * The left pane is always sigma0, so preference 0 means "left clip
 * preferred". Submission unlocks only after a full playback loop and fires
 * at most once per query regardless of how fast the button is clicked.
 */

import type { PlaybackModel } from "./playback.js";

export type Selection = 0 | 1 | null;

export class ChoiceState {
  selection: Selection = null;
  submitted = false;

  select(which: 0 | 1): void {
    if (!this.submitted) this.selection = which;
  }

  canSubmit(playback: PlaybackModel): boolean {
    return this.selection !== null && !this.submitted && playback.playedThroughOnce;
  }

  /** Returns the preference to post, or null if the latch refuses. */
  takeSubmission(playback: PlaybackModel): 0 | 1 | null {
    if (!this.canSubmit(playback)) return null;
    this.submitted = true;
    return this.selection;
  }

  reset(): void {
    this.selection = null;
    this.submitted = false;
  }
}
