import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { mockFetch } from "./fixtures.js";

describe("ApiClient", () => {
  it("creates sessions under /v1", async () => {
    const { impl, calls } = mockFetch();
    const api = new ApiClient("", impl);
    const id = await api.createSession();
    expect(id).toBe("abc123");
    expect(calls[0].url).toBe("/v1/sessions");
    expect(calls[0].init?.method).toBe("POST");
  });

  it("sends the command payload with planner choice", async () => {
    const { impl, calls } = mockFetch();
    const api = new ApiClient("", impl);
    const response = await api.sendCommand("abc123", "go to the green room", "amdp");
    expect(response.level).toBe(2);
    const body = JSON.parse(String(calls[0].init?.body));
    expect(body).toEqual({ text: "go to the green room", planner: "amdp" });
    expect(calls[0].url).toBe("/v1/sessions/abc123/command");
  });

  it("surfaces machine-readable error codes from 422s", async () => {
    const { impl } = mockFetch({
      commandStatus: 422,
      commandBody: { error: { code: "NoMatch", message: "no purple room" } },
    });
    const api = new ApiClient("", impl);
    const failure = await api
      .sendCommand("abc123", "go to the purple room", "amdp")
      .catch((error) => error);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.code).toBe("NoMatch");
    expect(failure.status).toBe(422);
  });

  it("prefixes a configured base URL", async () => {
    const { impl, calls } = mockFetch();
    const api = new ApiClient("http://localhost:8000", impl);
    await api.createSession();
    expect(calls[0].url).toBe("http://localhost:8000/v1/sessions");
  });
});
