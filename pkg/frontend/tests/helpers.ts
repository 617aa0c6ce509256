import { readFileSync } from "node:fs";
import { join } from "node:path";
import type { FetchLike } from "../src/api.js";

const FIXTURE_DIR = join(__dirname, "..", "fixtures");

export function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(FIXTURE_DIR, name + ".json"), "utf8")) as T;
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export interface RecordedCall {
  url: string;
  method: string;
  body?: unknown;
}

/**
 * fetch stub backed by the recorded fixtures; routes the same URLs the
 * ApiClient builds, records every call, and serves canned error bodies for
 * unknown items / bad input the way the service does.
 */
export function fixtureFetch(calls: RecordedCall[] = []): FetchLike {
  return async (url: string, init?: RequestInit) => {
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    calls.push({ url, method, body });

    const u = new URL(url, "http://service.test");
    const path = u.pathname;
    const kind = u.searchParams.get("kind");
    const level = u.searchParams.get("level");

    if (path === "/api/rankings") {
      if (kind !== "hashtag" && kind !== "user" && kind !== "post") {
        return jsonResponse({ error: "bad_kind", message: "unknown kind" }, 400);
      }
      if (kind === "post") {
        return jsonResponse(fixture("edit_before_rankings"));
      }
      return jsonResponse(fixture(`rankings_${kind}`));
    }
    if (path === "/api/clusters" && (kind === "hashtag" || kind === "user")) {
      return jsonResponse(fixture(`clusters_${kind}_${level}`));
    }
    if (path === "/api/layout" && (kind === "hashtag" || kind === "user")) {
      return jsonResponse(fixture(`layout_${kind}_${level}`));
    }
    if (path === "/api/propagation") {
      const sources = u.searchParams.getAll("source");
      if (sources.some((s) => !s.startsWith("hashtag:"))) {
        return jsonResponse({ error: "unknown_cluster", message: sources[0] }, 404);
      }
      return jsonResponse(fixture("propagation_hashtag"));
    }
    const related = path.match(/^\/api\/items\/([^/]+)\/related$/);
    if (related) {
      return jsonResponse(fixture("related_hashtag"));
    }
    const score = path.match(/^\/api\/items\/([^/]+)\/score$/);
    if (score && method === "POST") {
      const itemId = decodeURIComponent(score[1]);
      if (itemId !== "p0006") {
        return jsonResponse({ error: "unknown_item", message: itemId }, 404);
      }
      if (!Number.isInteger(body?.ui_score) || body.ui_score < 1 || body.ui_score > 10) {
        return jsonResponse({ error: "validation_error", message: "ui_score" }, 422);
      }
      return jsonResponse(
        fixture(body.ui_score === 10 ? "edit_delta" : "edit_inverse_delta"),
      );
    }
    return jsonResponse({ error: "not_found", message: path }, 404);
  };
}
