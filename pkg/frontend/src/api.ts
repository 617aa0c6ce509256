import type {
  ClustersPayload,
  EditDelta,
  Kind,
  LayoutPayload,
  PropagationPayload,
  RankingsPayload,
  RelatedPayload,
  ServiceError,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

/**
 * Thin typed client over the ranking service. `fetchImpl` is injectable so
 * tests can run against recorded fixtures without a server.
 */
export class ApiClient {
  constructor(
    private base: string = "",
    private fetchImpl: FetchLike = fetch,
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.base + path);
    return this.unwrap<T>(resp);
  }

  private async unwrap<T>(resp: Response): Promise<T> {
    const body = await resp.json();
    if (!resp.ok) {
      const err = body as ServiceError;
      throw new ApiError(resp.status, err.error ?? "unknown", err.message ?? "");
    }
    return body as T;
  }

  rankings(kind: Kind, top = 20): Promise<RankingsPayload> {
    return this.get(`/api/rankings?kind=${kind}&top=${top}`);
  }

  clusters(kind: Kind, level: number): Promise<ClustersPayload> {
    return this.get(`/api/clusters?kind=${kind}&level=${level}`);
  }

  layout(kind: Kind, level: number): Promise<LayoutPayload> {
    return this.get(`/api/layout?kind=${kind}&level=${level}`);
  }

  propagation(sources: string[], top = 10): Promise<PropagationPayload> {
    const qs = sources.map((s) => `source=${encodeURIComponent(s)}`).join("&");
    return this.get(`/api/propagation?${qs}&top=${top}`);
  }

  related(itemId: string, top = 10): Promise<RelatedPayload> {
    return this.get(`/api/items/${encodeURIComponent(itemId)}/related?top=${top}`);
  }

  async editScore(itemId: string, uiScore: number): Promise<EditDelta> {
    if (!Number.isInteger(uiScore) || uiScore < 1 || uiScore > 10) {
      throw new ApiError(0, "client_validation", "ui_score must be an integer in 1..10");
    }
    const resp = await this.fetchImpl(
      this.base + `/api/items/${encodeURIComponent(itemId)}/score`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ ui_score: uiScore }),
      },
    );
    return this.unwrap<EditDelta>(resp);
  }
}

/**
 * Serializes edits: at most one request in flight, later edits queued in
 * submission order.
 */
export class EditQueue {
  private chain: Promise<unknown> = Promise.resolve();

  constructor(private client: ApiClient) {}

  submit(itemId: string, uiScore: number): Promise<EditDelta> {
    const next = this.chain.then(
      () => this.client.editScore(itemId, uiScore),
      () => this.client.editScore(itemId, uiScore),
    );
    this.chain = next.catch(() => undefined);
    return next;
  }
}
