import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import type { QueryTicket } from "../src/types.js";

const TICKET: QueryTicket = {
  query_id: "q000001",
  env_id: "ma-mover",
  created_at: 0,
  status: "pending",
  sigma0_frames: [[{ entity: "mover", x: 0, y: 0, heading: 0 }]],
  sigma1_frames: [[{ entity: "mover", x: 1, y: 0, heading: 0 }]],
};

function fakeFetch(status: number, body?: unknown) {
  const calls: { url: string; init?: RequestInit }[] = [];
  const impl = async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    return new Response(body === undefined ? null : JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { impl, calls };
}

describe("ApiClient", () => {
  it("fetchNextQuery returns the pending ticket", async () => {
    const { impl, calls } = fakeFetch(200, TICKET);
    const client = new ApiClient("", impl);
    const ticket = await client.fetchNextQuery();
    expect(ticket?.query_id).toBe("q000001");
    expect(calls[0].url).toBe("/api/queries/next");
  });

  it("fetchNextQuery maps 204 to null", async () => {
    const client = new ApiClient("", fakeFetch(204).impl);
    expect(await client.fetchNextQuery()).toBeNull();
  });

  it("submitLabel posts the documented body", async () => {
    const { impl, calls } = fakeFetch(200, { status: "ok" });
    const client = new ApiClient("", impl);
    expect(await client.submitLabel("q000001", 0)).toBe("ok");
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      query_id: "q000001",
      preference: 0,
    });
  });

  it("submitLabel maps conflict and not-found statuses", async () => {
    expect(await new ApiClient("", fakeFetch(409).impl).submitLabel("q", 1)).toBe(
      "conflict",
    );
    expect(await new ApiClient("", fakeFetch(404).impl).submitLabel("q", 1)).toBe(
      "not_found",
    );
    expect(await new ApiClient("", fakeFetch(422).impl).submitLabel("q", 1)).toBe(
      "invalid",
    );
  });

  it("unexpected statuses raise", async () => {
    const client = new ApiClient("", fakeFetch(500).impl);
    await expect(client.fetchNextQuery()).rejects.toThrow("500");
  });
});
