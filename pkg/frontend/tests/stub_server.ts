/** Minimal in-process search-service stand-in that records raw request bodies. */

import { createServer, Server } from "node:http";
import { AddressInfo } from "node:net";

export interface RecordedRequest {
  method: string;
  url: string;
  body: string;
}

export class StubServer {
  readonly requests: RecordedRequest[] = [];
  private server: Server;
  /** queue of status codes to answer with before returning 200s */
  failWith: number[] = [];

  private constructor(server: Server) {
    this.server = server;
  }

  static async start(): Promise<StubServer> {
    let stub: StubServer;
    const server = createServer((req, res) => {
      const chunks: Buffer[] = [];
      req.on("data", (chunk) => chunks.push(chunk));
      req.on("end", () => {
        const body = Buffer.concat(chunks).toString("utf-8");
        stub.requests.push({ method: req.method ?? "", url: req.url ?? "", body });
        const fail = stub.failWith.shift();
        if (fail) {
          res.writeHead(fail, { "content-type": "application/json" });
          res.end(JSON.stringify({ detail: "stubbed failure" }));
          return;
        }
        const parsed = body ? JSON.parse(body) : {};
        const response = {
          results: [
            {
              image_id: "img1",
              score: 1.25,
              matched_terms: parsed.keywords ?? [],
              caption_snippet: "stub snippet",
            },
          ],
          total_candidates: 1,
          query_echo: {
            free_text: parsed.free_text ?? "",
            keywords: parsed.keywords ?? [],
            k: parsed.k ?? 0,
            effective_query: "",
          },
        };
        res.writeHead(200, { "content-type": "application/json" });
        res.end(JSON.stringify(response));
      });
    });
    stub = new StubServer(server);
    await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
    return stub;
  }

  get baseUrl(): string {
    const addr = this.server.address() as AddressInfo;
    return `http://127.0.0.1:${addr.port}`;
  }

  searchBodies(): string[] {
    return this.requests.filter((r) => r.url === "/v1/search").map((r) => r.body);
  }

  async stop(): Promise<void> {
    await new Promise<void>((resolve, reject) =>
      this.server.close((err) => (err ? reject(err) : resolve())),
    );
  }
}
