/** Typed client for the slomokit job service HTTP API. */

export type JobStatus = "queued" | "running" | "done" | "failed";

export interface JobState {
  id: string;
  status: JobStatus;
  progress: number;
  exponent: number;
  kind: "image-pair" | "video";
  frame_count: number | null;
  error: string | null;
}

export interface BackendInfo {
  name: string;
  kind: string;
  capability: string;
}

export interface FrameList {
  endpoints: string[];
  frames: string[];
}

export class ApiError extends Error {
  constructor(public status: number, public code: string, detail: string) {
    super(detail);
  }
}

async function raiseFor(res: Response): Promise<never> {
  let code = "E_UNKNOWN";
  let detail = res.statusText;
  try {
    const body = await res.json();
    if (body?.error) {
      code = body.error.code ?? code;
      detail = body.error.detail ?? detail;
    }
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(res.status, code, detail);
}

export class ApiClient {
  constructor(private base = "") {}

  async createJob(files: File[], exponent: number, backend?: string): Promise<string> {
    const form = new FormData();
    for (const f of files) {
      form.append("media", f, f.name);
    }
    form.append("e", String(exponent));
    if (backend) {
      form.append("backend", backend);
    }
    const res = await fetch(`${this.base}/api/jobs`, { method: "POST", body: form });
    if (!res.ok) {
      await raiseFor(res);
    }
    const body = await res.json();
    return body.id as string;
  }

  async getJob(id: string): Promise<JobState> {
    const res = await fetch(`${this.base}/api/jobs/${id}`);
    if (!res.ok) {
      await raiseFor(res);
    }
    return (await res.json()) as JobState;
  }

  async getFrames(id: string): Promise<FrameList> {
    const res = await fetch(`${this.base}/api/jobs/${id}/frames`);
    if (!res.ok) {
      await raiseFor(res);
    }
    return (await res.json()) as FrameList;
  }

  async listBackends(): Promise<BackendInfo[]> {
    const res = await fetch(`${this.base}/api/backends`);
    if (!res.ok) {
      await raiseFor(res);
    }
    return (await res.json()) as BackendInfo[];
  }

  /** HEAD-probe the browser-playable container; 409 means no encoder. */
  async containerAvailable(id: string): Promise<boolean> {
    const res = await fetch(`${this.base}/api/jobs/${id}/video?format=container`, {
      method: "HEAD",
    });
    return res.ok;
  }

  videoUrl(id: string, container: boolean): string {
    return container
      ? `${this.base}/api/jobs/${id}/video?format=container`
      : `${this.base}/api/jobs/${id}/video`;
  }
}
