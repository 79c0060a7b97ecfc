/** DOM wiring for the single-page slow-motion UI. */

import { ApiClient, ApiError, JobState } from "./api.js";
import {
  EXPONENT_MAX,
  EXPONENT_MIN,
  Tile,
  clampExponent,
  galleryTiles,
  isTerminal,
  mergeProgress,
  resultView,
  validateSelection,
  videoFrameUrls,
} from "./model.js";

export const POLL_INTERVAL_MS = 1000;
const RETRY_BACKOFF_MS = [1000, 2000, 4000, 8000];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export class App {
  private form!: HTMLFormElement;
  private fileInput!: HTMLInputElement;
  private slider!: HTMLInputElement;
  private sliderLabel!: HTMLSpanElement;
  private backendSelect!: HTMLSelectElement;
  private formError!: HTMLElement;
  private jobCard!: HTMLElement;
  private progress = 0;
  private pollTimer: ReturnType<typeof setTimeout> | null = null;
  private pollInFlight = false;
  private failures = 0;
  private jobId: string | null = null;

  constructor(
    private root: HTMLElement,
    private client: ApiClient = new ApiClient(),
  ) {}

  mount(): void {
    this.root.replaceChildren(this.buildForm(), (this.jobCard = el("section", "job")));
    void this.populateBackends();
    const match = window.location.hash.match(/^#\/jobs\/([\w-]+)$/);
    if (match) {
      this.watchJob(match[1]);
    }
  }

  unmount(): void {
    if (this.pollTimer !== null) {
      clearTimeout(this.pollTimer);
      this.pollTimer = null;
    }
  }

  get exponent(): number {
    return clampExponent(Number(this.slider.value));
  }

  private buildForm(): HTMLFormElement {
    this.form = el("form", "upload");
    this.fileInput = el("input");
    this.fileInput.type = "file";
    this.fileInput.multiple = true;
    this.fileInput.accept = "image/png,image/jpeg,video/*,.y4m";

    this.slider = el("input", "exponent");
    this.slider.type = "range";
    this.slider.min = String(EXPONENT_MIN);
    this.slider.max = String(EXPONENT_MAX);
    this.slider.step = "1";
    this.slider.value = String(EXPONENT_MIN);
    this.sliderLabel = el("span", "exponent-label");
    this.slider.addEventListener("input", () => this.updateSliderLabel());
    this.updateSliderLabel();

    this.backendSelect = el("select", "backend");
    this.formError = el("p", "form-error");

    const submit = el("button", undefined, "Synthesize");
    submit.type = "submit";

    this.form.append(
      this.fileInput,
      this.slider,
      this.sliderLabel,
      this.backendSelect,
      submit,
      this.formError,
    );
    this.form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submit();
    });
    return this.form;
  }

  private updateSliderLabel(): void {
    const e = this.exponent;
    this.sliderLabel.textContent = `${2 ** e}× slower (e=${e})`;
  }

  private async populateBackends(): Promise<void> {
    try {
      const backends = await this.client.listBackends();
      this.backendSelect.replaceChildren(
        ...backends.map((b) => {
          const opt = el("option", undefined, b.name);
          opt.value = b.name;
          return opt;
        }),
      );
    } catch {
      // leave the select empty; the server default applies
    }
  }

  async submit(): Promise<void> {
    this.formError.textContent = "";
    const files = Array.from(this.fileInput.files ?? []);
    const selection = validateSelection(files);
    if ("error" in selection) {
      this.formError.textContent = selection.error;
      return;
    }
    try {
      const id = await this.client.createJob(
        selection.files,
        this.exponent,
        this.backendSelect.value || undefined,
      );
      window.location.hash = `#/jobs/${id}`;
      this.watchJob(id);
    } catch (err) {
      this.formError.textContent =
        err instanceof ApiError ? err.message : "upload failed";
    }
  }

  watchJob(id: string): void {
    this.unmount();
    this.jobId = id;
    this.progress = 0;
    this.failures = 0;
    this.renderPending(null);
    void this.pollOnce();
  }

  private schedule(delay: number): void {
    this.pollTimer = setTimeout(() => void this.pollOnce(), delay);
  }

  private async pollOnce(): Promise<void> {
    if (this.pollInFlight || this.jobId === null) {
      return;
    }
    this.pollInFlight = true;
    const id = this.jobId;
    try {
      const job = await this.client.getJob(id);
      this.failures = 0;
      this.progress = mergeProgress(this.progress, job.progress);
      if (isTerminal(job.status)) {
        await this.renderResult(job);
      } else {
        this.renderPending(job);
        this.schedule(POLL_INTERVAL_MS);
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.renderError(`unknown job ${id}`);
      } else {
        this.failures += 1;
        this.renderStale();
        const backoff =
          RETRY_BACKOFF_MS[Math.min(this.failures - 1, RETRY_BACKOFF_MS.length - 1)];
        this.schedule(backoff);
      }
    } finally {
      this.pollInFlight = false;
    }
  }

  private progressBar(): HTMLElement {
    const track = el("div", "progress-track");
    const bar = el("div", "progress-bar");
    bar.style.width = `${Math.round(this.progress * 100)}%`;
    track.append(bar);
    return track;
  }

  private renderPending(job: JobState | null): void {
    const status = el("p", "status", job ? job.status : "loading…");
    this.jobCard.replaceChildren(status, this.progressBar());
  }

  private renderStale(): void {
    const stale = el("p", "stale", "connection lost — retrying…");
    this.jobCard.replaceChildren(stale, this.progressBar());
  }

  private renderError(detail: string): void {
    this.jobCard.replaceChildren(el("p", "error-banner", detail));
  }

  private async renderResult(job: JobState): Promise<void> {
    let containerAvailable = false;
    if (job.status === "done" && job.kind === "video") {
      try {
        containerAvailable = await this.client.containerAvailable(job.id);
      } catch {
        containerAvailable = false;
      }
    }
    const view = resultView(job, containerAvailable);
    switch (view.mode) {
      case "error":
        this.renderError(view.detail);
        return;
      case "player": {
        const video = el("video", "player");
        video.controls = true;
        video.src = this.client.videoUrl(job.id, true);
        this.jobCard.replaceChildren(el("p", "status", "done"), video);
        return;
      }
      case "gallery":
        await this.renderGallery(job, view.note);
        return;
      case "pending":
        this.renderPending(job);
    }
  }

  private async renderGallery(job: JobState, note: string | null): Promise<void> {
    let tiles: Tile[];
    if (job.kind === "image-pair") {
      const list = await this.client.getFrames(job.id);
      tiles = galleryTiles(list.endpoints, list.frames, job.exponent);
    } else {
      const den = job.frame_count ?? 0;
      tiles = videoFrameUrls(job.id, den).map((url, k) => ({
        url,
        numerator: k,
        denominator: den,
        endpoint: false,
      }));
    }
    const grid = el("div", "gallery");
    for (const tile of tiles) {
      const cell = el("a", tile.endpoint ? "tile endpoint" : "tile interpolated");
      cell.href = tile.url;
      cell.target = "_blank";
      const img = el("img");
      img.src = tile.url;
      img.alt = `frame ${tile.numerator}/${tile.denominator}`;
      img.addEventListener("error", () => cell.classList.add("broken"));
      const label = el(
        "span",
        "tile-label",
        tile.endpoint ? "input" : `t=${tile.numerator}/${tile.denominator}`,
      );
      cell.append(img, label);
      grid.append(cell);
    }
    const children: HTMLElement[] = [el("p", "status", "done")];
    if (note) {
      children.push(el("p", "note", note));
    }
    children.push(grid);
    this.jobCard.replaceChildren(...children);
  }
}

export function bootstrap(): void {
  const root = document.getElementById("app");
  if (root) {
    new App(root).mount();
  }
}
