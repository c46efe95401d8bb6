// Bootstraps the annotation page: task loop, player, timeline, and form.

import { ApiClient } from "./api.js";
import { loadConfig } from "./config.js";
import { DraftStore } from "./draft.js";
import { captureTime } from "./form.js";
import { Player, Timeline, PLAYBACK_RATES } from "./player.js";
import { Session } from "./session.js";
import { ApiError, TaskKind } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const config = await loadConfig();
  const api = new ApiClient(config.baseUrl, config.token);
  const drafts = new DraftStore(window.localStorage);

  const video = el<HTMLVideoElement>("clip");
  const player = new Player(video, config.fps);
  const timeline = new Timeline(
    el("timeline"), el("mark-start"), el("mark-end"), 10.0,
  );

  const kindSelect = el<HTMLSelectElement>("task-kind");
  const status = el<HTMLElement>("status");
  const form = {
    validityRow: el<HTMLElement>("validity-row"),
    fullRows: el<HTMLElement>("full-rows"),
    description: el<HTMLInputElement>("description"),
    count: el<HTMLInputElement>("count"),
    startLabel: el<HTMLElement>("start-label"),
    endLabel: el<HTMLElement>("end-label"),
    swapCue: el<HTMLElement>("swap-cue"),
    errors: el<HTMLElement>("errors"),
    submit: el<HTMLButtonElement>("submit"),
  };

  let session = new Session(api, drafts, kindSelect.value as TaskKind);

  function refresh(): void {
    const active = session.current;
    if (!active) {
      status.textContent = "no task leased";
      form.submit.disabled = true;
      return;
    }
    const f = active.form;
    form.validityRow.style.display = f.kind === "validity" ? "" : "none";
    form.fullRows.style.display = f.kind === "full" ? "" : "none";
    form.startLabel.textContent = f.startMark === null ? "unset" : f.startMark.toFixed(2);
    form.endLabel.textContent = f.endMark === null ? "unset" : f.endMark.toFixed(2);
    form.swapCue.style.display = f.marksSwapped ? "" : "none";
    timeline.render(f.startMark, f.endMark);
    const problems = f.validationErrors();
    form.errors.textContent = problems.join(" · ");
    form.submit.disabled = problems.length > 0;
    session.saveDraft();
  }

  async function advance(): Promise<void> {
    status.textContent = "fetching task…";
    try {
      const active = await session.next();
      if (!active) {
        status.textContent = "task pool is empty — thank you!";
        return;
      }
      status.textContent = `task ${active.task.task_id} (${active.task.kind})`;
      video.src = api.mediaUrl(active.task);
      form.description.value = active.form.description;
      form.count.value = active.form.count === null ? "" : String(active.form.count);
      refresh();
    } catch (error) {
      status.textContent = `service unreachable, retrying in 3 s (${String(error)})`;
      window.setTimeout(() => void advance(), 3000);
    }
  }

  el("set-start").addEventListener("click", () => {
    session.current?.form.setStart(captureTime(player.currentTime));
    refresh();
  });
  el("set-end").addEventListener("click", () => {
    session.current?.form.setEnd(captureTime(player.currentTime));
    refresh();
  });
  form.description.addEventListener("input", () => {
    session.current?.form.setDescription(form.description.value);
    refresh();
  });
  form.count.addEventListener("input", () => {
    const value = form.count.value === "" ? null : Number(form.count.value);
    session.current?.form.setCount(value);
    refresh();
  });
  el("valid-yes").addEventListener("click", () => {
    session.current?.form.setValidity(true);
    refresh();
  });
  el("valid-no").addEventListener("click", () => {
    session.current?.form.setValidity(false);
    refresh();
  });

  form.submit.addEventListener("click", async () => {
    try {
      await session.submit();
      await advance();
    } catch (error) {
      if (error instanceof ApiError) {
        form.errors.textContent = error.field
          ? `${error.field}: ${error.message}`
          : error.message;
        if (error.code === "stale_lease") await advance();
      } else {
        status.textContent = `submit failed: ${String(error)}`;
      }
    }
  });

  kindSelect.addEventListener("change", () => {
    session = new Session(api, drafts, kindSelect.value as TaskKind);
    void advance();
  });

  const rates = el<HTMLElement>("rates");
  for (const rate of PLAYBACK_RATES) {
    const button = document.createElement("button");
    button.textContent = `${rate}×`;
    button.addEventListener("click", () => player.setRate(rate));
    rates.appendChild(button);
  }
  el("frame-back").addEventListener("click", () => player.stepFrames(-1));
  el("frame-forward").addEventListener("click", () => player.stepFrames(1));

  window.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement) return;
    if (event.key === "i") el("set-start").click();
    if (event.key === "o") el("set-end").click();
    if (event.key === " ") {
      event.preventDefault();
      player.toggle();
    }
    if (event.key === "ArrowLeft") player.stepFrames(-1);
    if (event.key === "ArrowRight") player.stepFrames(1);
  });

  await advance();
}

void boot();
