/** A fetch double driven by a route table, recording every request. */

import type { FetchLike } from "../src/api.js";

export interface RecordedCall {
  method: string;
  path: string;
  body: unknown;
  headers: Record<string, string>;
}

export type RouteResult = [number, unknown];
export type RouteHandler = RouteResult | ((call: RecordedCall) => RouteResult);

export interface FakeApi {
  fetchFn: FetchLike;
  calls: RecordedCall[];
}

export function fakeFetch(routes: Record<string, RouteHandler>): FakeApi {
  const calls: RecordedCall[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const call: RecordedCall = {
      method,
      path,
      body: init?.body ? JSON.parse(init.body as string) : undefined,
      headers: { ...((init?.headers as Record<string, string>) ?? {}) },
    };
    calls.push(call);
    const handler = routes[`${method} ${path}`];
    if (handler === undefined) {
      return jsonResponse(404, {
        error: "NotFoundError",
        detail: `no fake route for ${method} ${path}`,
      });
    }
    const [status, payload] = typeof handler === "function" ? handler(call) : handler;
    return jsonResponse(status, payload);
  };
  return { fetchFn, calls };
}

function jsonResponse(status: number, payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export function mount(): HTMLElement {
  const root = document.createElement("div");
  document.body.append(root);
  return root;
}
