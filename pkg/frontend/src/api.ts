/** Thin client over the feedback service HTTP API.
 *
 * fetch is injectable so tests can drive the client without a server.
 */

import type { EnvMeta, QueryTicket, SubmitResult } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  /** Oldest pending ticket, or null when the queue is empty (204). */
  async fetchNextQuery(): Promise<QueryTicket | null> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/queries/next`);
    if (resp.status === 204) return null;
    if (!resp.ok) throw new Error(`queries/next failed: ${resp.status}`);
    return (await resp.json()) as QueryTicket;
  }

  async fetchTicket(queryId: string): Promise<QueryTicket | null> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/queries/${queryId}`);
    if (resp.status === 404) return null;
    if (!resp.ok) throw new Error(`queries/${queryId} failed: ${resp.status}`);
    return (await resp.json()) as QueryTicket;
  }

  async fetchEnvMeta(envId: string): Promise<EnvMeta> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/env/${envId}/meta`);
    if (!resp.ok) throw new Error(`env meta failed: ${resp.status}`);
    return (await resp.json()) as EnvMeta;
  }

  /** Post a binary preference; maps the documented status codes. */
  async submitLabel(queryId: string, preference: 0 | 1): Promise<SubmitResult> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/labels`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ query_id: queryId, preference }),
    });
    if (resp.ok) return "ok";
    if (resp.status === 404) return "not_found";
    if (resp.status === 409) return "conflict";
    if (resp.status === 422) return "invalid";
    throw new Error(`labels failed: ${resp.status}`);
  }
}
