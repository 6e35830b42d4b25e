// Terminal gateway and dashboard aggregator.
//
// The browser never sees the officer secrets: casting happens here, by
// driving the election CLI, and the browser only receives acknowledgment
// statuses. The dashboard overview is aggregated from the centers' HTTP
// endpoints plus a tally CLI run once enough signed records exist.

import { execFile } from "node:child_process";
import { randomUUID } from "node:crypto";
import { promises as fs } from "node:fs";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { promisify } from "node:util";

import express from "express";

import type {
  CastResponse,
  CenterStatus,
  Overview,
  PublicConfig,
  RecordStatus,
  TallyView,
} from "../shared/types.js";

const execFileAsync = promisify(execFile);

export interface GatewayOptions {
  configPath: string;
  secretsPath: string;
  endpoints: string[];
  /** CLI argv prefix, e.g. ["homotally"] or ["python3", "-m", "homotally"]. */
  cli?: string[];
  port?: number;
  staticDir?: string;
  centerTimeoutMs?: number;
}

export interface RunningGateway {
  url: string;
  port: number;
  close(): Promise<void>;
}

const EXIT_OK = 0;
const EXIT_PARTIAL = 30;
const EXIT_REJECTED = 31;

interface CliResult {
  code: number;
  stdout: string;
  stderr: string;
}

async function runCli(argv: string[], args: string[]): Promise<CliResult> {
  const [command, ...prefix] = argv;
  try {
    const { stdout, stderr } = await execFileAsync(command, [...prefix, ...args], {
      timeout: 60_000,
    });
    return { code: 0, stdout, stderr };
  } catch (error) {
    const failure = error as { code?: number; stdout?: string; stderr?: string };
    return {
      code: typeof failure.code === "number" ? failure.code : -1,
      stdout: failure.stdout ?? "",
      stderr: failure.stderr ?? "",
    };
  }
}

async function fetchJson(
  url: string,
  timeoutMs: number,
): Promise<{ ok: boolean; status: number; body: any }> {
  const response = await fetch(url, { signal: AbortSignal.timeout(timeoutMs) });
  let body: any = null;
  try {
    body = await response.json();
  } catch {
    body = null;
  }
  return { ok: response.ok, status: response.status, body };
}

export class Gateway {
  private config: PublicConfig;
  private workDir: string;
  private cli: string[];
  private timeoutMs: number;

  constructor(private options: GatewayOptions) {
    this.config = JSON.parse(readFileSync(options.configPath, "utf-8"));
    if (options.endpoints.length !== this.config.center_count) {
      throw new Error(
        `${options.endpoints.length} endpoints for ${this.config.center_count} centers`,
      );
    }
    this.cli = options.cli ?? ["homotally"];
    this.timeoutMs = options.centerTimeoutMs ?? 3000;
    this.workDir = mkdtempSync(path.join(tmpdir(), "homotally-gateway-"));
  }

  pendingPath(ballotId: string): string {
    return path.join(this.workDir, `ballot-${ballotId}.pending.json`);
  }

  /** What the terminal page needs to render a ballot; nothing more. */
  publicElection(): { election_id: string; candidates: string[] } {
    return {
      election_id: this.config.election_id,
      candidates: this.config.candidates,
    };
  }

  /**
   * Cast a fresh ballot (candidate only) or replay a pending one (id only).
   *
   * A retry must reuse the shares of the original delivery, so it is only
   * honored while the pending file from the partial cast still exists;
   * re-splitting under an already-seen ballot id would leave centers holding
   * shares of different polynomials and corrupt the tally.
   */
  async cast(candidateIndex?: number, ballotId?: string): Promise<CastResponse> {
    const base = [
      "cast",
      "--config",
      this.options.configPath,
      "--secrets",
      this.options.secretsPath,
      "--endpoints",
      this.options.endpoints.join(","),
      "--json",
      "--attempts",
      "2",
      "--timeout",
      "3",
    ];
    let args: string[];
    if (ballotId !== undefined) {
      if (!/^[A-Za-z0-9-]{1,64}$/.test(ballotId)) {
        throw new HttpError(400, "bad ballot_id");
      }
      const pending = this.pendingPath(ballotId);
      const havePending = await fs
        .access(pending)
        .then(() => true)
        .catch(() => false);
      if (!havePending) {
        throw new HttpError(
          409,
          "no pending delivery for this ballot id; it cannot be safely re-cast",
        );
      }
      args = [...base, "--retry", pending];
    } else {
      if (!Number.isInteger(candidateIndex) || (candidateIndex as number) < 1) {
        throw new HttpError(400, "candidate_index must be a positive integer");
      }
      args = [
        ...base,
        "--candidate",
        String(candidateIndex),
        "--ballot-id",
        randomUUID(),
        "--pending-dir",
        this.workDir,
      ];
    }
    const result = await runCli(this.cli, args);
    if (![EXIT_OK, EXIT_PARTIAL, EXIT_REJECTED].includes(result.code)) {
      throw new HttpError(502, firstErrorLine(result.stderr) ?? "cast failed");
    }
    const outcome = JSON.parse(result.stdout) as CastResponse;
    return { ballot_id: outcome.ballot_id, overall: outcome.overall, statuses: outcome.statuses };
  }

  async overview(): Promise<Overview> {
    const electionId = encodeURIComponent(this.config.election_id);
    const centers: CenterStatus[] = [];
    const recordDocs: { doc: any; centerId: number }[] = [];

    await Promise.all(
      this.options.endpoints.map(async (endpoint, index) => {
        const centerId = index + 1;
        const status: CenterStatus = {
          center_id: centerId,
          endpoint,
          reachable: false,
        };
        try {
          const reply = await fetchJson(
            `${endpoint}/v1/elections/${electionId}/status`,
            this.timeoutMs,
          );
          if (reply.ok) {
            status.reachable = true;
            status.phase = reply.body.status;
            status.received_count = reply.body.received_count;
          } else {
            status.error = reply.body?.error ?? `http-${reply.status}`;
          }
        } catch (error) {
          status.error = String((error as Error).message ?? error);
        }
        if (status.phase === "finalized") {
          try {
            const reply = await fetchJson(
              `${endpoint}/v1/elections/${electionId}/record`,
              this.timeoutMs,
            );
            if (reply.ok && reply.body?.record) {
              recordDocs.push({ doc: reply.body.record, centerId });
            }
          } catch {
            // status said finalized but the record fetch failed; leave it out
          }
        }
        centers[index] = status;
      }),
    );

    let tally: TallyView | null = null;
    let records: RecordStatus[] = recordDocs.map(({ doc, centerId }) => ({
      center_id: centerId,
      verified: false,
      share_sum: doc.share_sum,
      received_count: doc.received_count,
    }));

    if (recordDocs.length >= this.config.threshold) {
      const recordPaths: string[] = [];
      for (const { doc, centerId } of recordDocs) {
        const file = path.join(this.workDir, `record-${centerId}.json`);
        await fs.writeFile(file, JSON.stringify(doc));
        recordPaths.push(file);
      }
      const result = await runCli(this.cli, [
        "tally",
        "--config",
        this.options.configPath,
        "--secrets",
        this.options.secretsPath,
        "--records",
        ...recordPaths,
        "--json",
      ]);
      if (result.code === 0) {
        const report = JSON.parse(result.stdout);
        const verified = new Set<number>(report.verification.verified);
        const rejectedBy = new Map<number, string>(
          report.verification.rejected.map((entry: any) => [
            entry.center_id,
            entry.error,
          ]),
        );
        records = records.map((record) => ({
          ...record,
          verified: verified.has(record.center_id),
          error: rejectedBy.get(record.center_id),
        }));
        if (verified.size >= this.config.threshold) {
          tally = {
            result: report.result,
            packed: report.packed,
            subsets_checked: report.subsets_checked,
            turnout_notes: report.turnout_notes,
          };
        }
      } else {
        const detail = firstErrorLine(result.stderr) ?? "tally failed";
        records = records.map((record) => ({ ...record, error: detail }));
      }
    }

    return {
      election: {
        election_id: this.config.election_id,
        candidates: this.config.candidates,
        voter_count: this.config.voter_count,
        threshold: this.config.threshold,
        center_count: this.config.center_count,
      },
      centers,
      records,
      tally,
      endpoints: this.options.endpoints,
    };
  }
}

class HttpError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

function firstErrorLine(stderr: string): string | null {
  for (const line of stderr.split("\n")) {
    const trimmed = line.trim();
    if (!trimmed) continue;
    try {
      const parsed = JSON.parse(trimmed);
      if (parsed.error) return `${parsed.error}: ${parsed.detail ?? ""}`;
    } catch {
      return trimmed;
    }
  }
  return null;
}

export function buildApp(gateway: Gateway, staticDir?: string) {
  const app = express();
  app.use(express.json());

  // The voting-terminal page receives the public candidate list with the
  // page itself, so its only network call is the cast endpoint.
  if (staticDir) {
    const indexPath = path.join(staticDir, "public", "index.html");
    app.get(["/", "/index.html"], (_req, res) => {
      const page = readFileSync(indexPath, "utf-8").replace(
        "<!--__ELECTION__-->",
        `<script>window.__ELECTION__ = ${JSON.stringify(gateway.publicElection())};</script>`,
      );
      res.type("html").send(page);
    });
  }

  app.post("/v1/terminal/cast", async (req, res) => {
    try {
      const { candidate_index, ballot_id } = req.body ?? {};
      const outcome = await gateway.cast(candidate_index, ballot_id);
      res.json(outcome);
    } catch (error) {
      if (error instanceof HttpError) {
        res.status(error.status).json({ error: error.message });
      } else {
        res.status(500).json({ error: String((error as Error).message ?? error) });
      }
    }
  });

  app.get("/v1/official/overview", async (_req, res) => {
    try {
      res.json(await gateway.overview());
    } catch (error) {
      res.status(500).json({ error: String((error as Error).message ?? error) });
    }
  });

  if (staticDir) {
    app.use(express.static(path.join(staticDir, "public")));
    app.use(express.static(path.join(staticDir, "dist", "web")));
  }
  return app;
}

export async function startGateway(options: GatewayOptions): Promise<RunningGateway> {
  const gateway = new Gateway(options);
  const app = buildApp(gateway, options.staticDir);
  const port = options.port ?? 0;
  const server = await new Promise<import("node:http").Server>((resolve, reject) => {
    const candidate = app.listen(port, "127.0.0.1");
    candidate.once("listening", () => resolve(candidate));
    candidate.once("error", reject);
  });
  const address = server.address();
  const boundPort = typeof address === "object" && address ? address.port : port;
  return {
    url: `http://127.0.0.1:${boundPort}`,
    port: boundPort,
    close: () =>
      new Promise((resolve, reject) =>
        server.close((error) => (error ? reject(error) : resolve())),
      ),
  };
}

function parseArgs(argv: string[]): GatewayOptions {
  const get = (flag: string, fallback?: string): string => {
    const index = argv.indexOf(flag);
    if (index >= 0 && index + 1 < argv.length) return argv[index + 1];
    if (fallback !== undefined) return fallback;
    throw new Error(`missing ${flag}`);
  };
  return {
    configPath: get("--config"),
    secretsPath: get("--secrets"),
    endpoints: get("--endpoints").split(",").filter(Boolean),
    port: Number(get("--port", "8080")),
    cli: get("--cli", process.env.HOMOTALLY_BIN ?? "homotally").split(" "),
    staticDir: get("--static", path.join(import.meta.dirname, "..", "..")),
  };
}

const invokedDirectly =
  process.argv[1] && import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  startGateway(parseArgs(process.argv.slice(2))).then(
    (running) => console.log(`gateway listening on ${running.url}`),
    (error) => {
      console.error(String(error));
      process.exit(1);
    },
  );
}
