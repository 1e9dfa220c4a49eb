// Controller-side HTTP client. The console authenticates with a controller
// token only and exposes no analyst endpoints at all.

import type {
  AnalysisReport,
  AnswerRequest,
  AnswerResponse,
  OdometerInfo,
  TicketStatus,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export class ConsoleApi {
  constructor(
    private readonly baseUrl: string,
    private readonly controllerToken: string,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers: {
        authorization: `Bearer ${this.controllerToken}`,
        ...(body !== undefined ? { "content-type": "application/json" } : {}),
      },
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const doc = await resp.json();
    if (!resp.ok) {
      const err = (doc as { error?: { code?: string; message?: string } }).error ?? {};
      throw new ApiError(resp.status, err.code ?? "error", err.message ?? resp.statusText);
    }
    return doc as T;
  }

  registerDataset(csv: string, schema: unknown, options: Record<string, unknown> = {}) {
    return this.request<{ dataset_id: string; n: number }>("POST", "/datasets", {
      csv,
      schema,
      ...options,
    });
  }

  ticketStatus(ticketId: string) {
    return this.request<TicketStatus>("GET", `/queries/${ticketId}`);
  }

  analysis(ticketId: string) {
    return this.request<AnalysisReport>("GET", `/queries/${ticketId}/analysis`);
  }

  answer(ticketId: string, request: AnswerRequest) {
    return this.request<AnswerResponse>("POST", `/queries/${ticketId}/answer`, request);
  }

  odometer(datasetId: string) {
    return this.request<OdometerInfo>("GET", `/odometer/${datasetId}`);
  }
}
