/** Page wiring: poll for queries, animate the two panes in lockstep, and
 * submit the labeler's choice.
 *
 * One query is on screen at a time; polling pauses while a query is loaded.
 * Submission conflicts (e.g. the ticket was answered elsewhere) surface as
 * a non-blocking notice and the next query loads immediately.
 */

import { ApiClient } from "./api.js";
import { ChoiceState } from "./choice.js";
import { PlaybackModel } from "./playback.js";
import { renderFrame } from "./render.js";
import type { EnvMeta, QueryTicket } from "./types.js";

const POLL_INTERVAL_MS = 2000;

interface Elements {
  leftCanvas: HTMLCanvasElement;
  rightCanvas: HTMLCanvasElement;
  status: HTMLElement;
  notice: HTMLElement;
  submit: HTMLButtonElement;
  chooseLeft: HTMLButtonElement;
  chooseRight: HTMLButtonElement;
  playPause: HTMLButtonElement;
  speed: HTMLSelectElement;
  skip: HTMLButtonElement;
}

export class LabelApp {
  private ticket: QueryTicket | null = null;
  private meta: EnvMeta | null = null;
  private playback: PlaybackModel | null = null;
  private choice = new ChoiceState();
  private lastTick = 0;
  private requestInFlight = false;

  constructor(
    private readonly api: ApiClient,
    private readonly el: Elements,
  ) {
    el.chooseLeft.onclick = () => this.select(0);
    el.chooseRight.onclick = () => this.select(1);
    el.submit.onclick = () => void this.submit();
    el.skip.onclick = () => void this.loadNext();
    el.playPause.onclick = () => this.playback?.togglePlaying();
    el.speed.onchange = () => {
      if (this.playback) this.playback.speed = parseFloat(this.el.speed.value);
    };
  }

  start(): void {
    void this.loadNext();
    requestAnimationFrame((t) => this.animate(t));
    setInterval(() => {
      if (this.ticket === null) void this.loadNext();
    }, POLL_INTERVAL_MS);
  }

  private select(which: 0 | 1): void {
    this.choice.select(which);
    this.el.chooseLeft.classList.toggle("selected", this.choice.selection === 0);
    this.el.chooseRight.classList.toggle("selected", this.choice.selection === 1);
    this.refreshControls();
  }

  private async loadNext(): Promise<void> {
    if (this.requestInFlight) return;
    this.requestInFlight = true;
    try {
      const ticket = await this.api.fetchNextQuery();
      if (ticket === null) {
        this.ticket = null;
        this.el.status.textContent = "Waiting for the trainer to ask something…";
        return;
      }
      if (ticket.sigma0_frames.length === 0 ||
          ticket.sigma0_frames.length !== ticket.sigma1_frames.length) {
        this.showNotice(`Malformed ticket ${ticket.query_id}; skipping.`);
        this.ticket = null;
        return;
      }
      this.meta = await this.api.fetchEnvMeta(ticket.env_id);
      this.ticket = ticket;
      this.playback = new PlaybackModel(ticket.sigma0_frames.length);
      this.playback.speed = parseFloat(this.el.speed.value || "1");
      this.choice.reset();
      this.el.chooseLeft.classList.remove("selected");
      this.el.chooseRight.classList.remove("selected");
      this.el.status.textContent =
        `Query ${ticket.query_id}: which behavior do you prefer?`;
    } catch (err) {
      this.showNotice(`Fetch failed: ${String(err)}`);
      this.ticket = null;
    } finally {
      this.requestInFlight = false;
      this.refreshControls();
    }
  }

  private async submit(): Promise<void> {
    if (this.ticket === null || this.playback === null) return;
    const preference = this.choice.takeSubmission(this.playback);
    if (preference === null) return;
    this.refreshControls();
    const result = await this.api.submitLabel(this.ticket.query_id, preference);
    if (result !== "ok") {
      this.showNotice(`Label not stored (${result}); moving on.`);
    }
    this.ticket = null;
    await this.loadNext();
  }

  private animate(timestamp: number): void {
    const delta = this.lastTick === 0 ? 0 : timestamp - this.lastTick;
    this.lastTick = timestamp;
    if (this.ticket && this.playback && this.meta) {
      this.playback.tick(delta);
      const i = this.playback.frameIndex;
      const view = { width: this.el.leftCanvas.width, height: this.el.leftCanvas.height };
      const left = this.el.leftCanvas.getContext("2d");
      const right = this.el.rightCanvas.getContext("2d");
      if (left && right) {
        renderFrame(left, this.ticket.sigma0_frames[i], this.meta.render, view);
        renderFrame(right, this.ticket.sigma1_frames[i], this.meta.render, view);
      }
      this.refreshControls();
    }
    requestAnimationFrame((t) => this.animate(t));
  }

  private refreshControls(): void {
    const ready = this.ticket !== null && this.playback !== null;
    this.el.chooseLeft.disabled = !ready || this.choice.submitted;
    this.el.chooseRight.disabled = !ready || this.choice.submitted;
    this.el.submit.disabled =
      !ready || this.playback === null || !this.choice.canSubmit(this.playback);
    this.el.submit.title = this.el.submit.disabled
      ? "Watch both clips through once and pick a side first"
      : "Submit preference";
  }

  private showNotice(text: string): void {
    this.el.notice.textContent = text;
    this.el.notice.classList.add("visible");
    setTimeout(() => this.el.notice.classList.remove("visible"), 4000);
  }
}

export function mount(): void {
  const byId = <T extends HTMLElement>(id: string): T => {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
  };
  const app = new LabelApp(new ApiClient(), {
    leftCanvas: byId<HTMLCanvasElement>("pane-left"),
    rightCanvas: byId<HTMLCanvasElement>("pane-right"),
    status: byId("status"),
    notice: byId("notice"),
    submit: byId<HTMLButtonElement>("submit"),
    chooseLeft: byId<HTMLButtonElement>("choose-left"),
    chooseRight: byId<HTMLButtonElement>("choose-right"),
    playPause: byId<HTMLButtonElement>("play-pause"),
    speed: byId<HTMLSelectElement>("speed"),
    skip: byId<HTMLButtonElement>("skip"),
  });
  app.start();
}

if (typeof document !== "undefined" && document.getElementById("pane-left")) {
  mount();
}
