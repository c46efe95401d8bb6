// Video player wiring: rate control, frame stepping, and the mark timeline.

export const PLAYBACK_RATES = [0.25, 0.5, 1.0, 1.5, 2.0];

export class Player {
  constructor(
    private readonly video: HTMLVideoElement,
    private readonly fps: number,
  ) {}

  get currentTime(): number {
    return this.video.currentTime;
  }

  seek(time: number): void {
    this.video.currentTime = Math.max(0, Math.min(time, this.video.duration || time));
  }

  stepFrames(frames: number): void {
    this.video.pause();
    this.seek(this.video.currentTime + frames / this.fps);
  }

  setRate(rate: number): void {
    this.video.playbackRate = rate;
  }

  toggle(): void {
    if (this.video.paused) void this.video.play();
    else this.video.pause();
  }
}

/** Renders start/end marks on the timeline bar and supports drag updates. */
export class Timeline {
  private duration: number;

  constructor(
    private readonly bar: HTMLElement,
    private readonly startHandle: HTMLElement,
    private readonly endHandle: HTMLElement,
    duration: number,
  ) {
    this.duration = duration;
  }

  setDuration(duration: number): void {
    this.duration = duration;
  }

  timeAt(clientX: number): number {
    const rect = this.bar.getBoundingClientRect();
    const fraction = Math.min(Math.max((clientX - rect.left) / rect.width, 0), 1);
    return fraction * this.duration;
  }

  render(start: number | null, end: number | null): void {
    this.place(this.startHandle, start);
    this.place(this.endHandle, end);
  }

  private place(handle: HTMLElement, time: number | null): void {
    if (time === null) {
      handle.style.display = "none";
      return;
    }
    handle.style.display = "block";
    handle.style.left = `${(time / this.duration) * 100}%`;
  }
}
