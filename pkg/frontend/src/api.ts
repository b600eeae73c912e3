import type {
  Bootstrap,
  CannedCase,
  DatasetMeta,
  DensityPayload,
  DiagnosisDict,
  SessionStep,
  SessionView,
  TriState,
} from './types.js';

/** Non-2xx response, with whatever detail the service attached. */
export class ApiError extends Error {
  status: number;
  detail: string;
  allowed: string[];

  constructor(status: number, detail: string, allowed: string[] = []) {
    super(`${status}: ${detail}`);
    this.status = status;
    this.detail = detail;
    this.allowed = allowed;
  }
}

/** Network-level failure (service down, connection refused). */
export class Unreachable extends Error {
  constructor(cause: unknown) {
    super(`service unreachable: ${String(cause)}`);
  }
}

/** Mutation responses are partial; the authoritative state is always the
 *  follow-up GET of the session view. */
export interface AnswerResponse {
  step: SessionStep;
  accepted: { question: string; value: string | null };
  advisory: string | null;
  diagnosis: DiagnosisDict | null;
}

export interface UploadResponse {
  step: SessionStep;
  dataset: DatasetMeta;
}

export interface TestResponse {
  test: string;
  status: 'done' | 'running';
  result?: Record<string, unknown>;
}

async function parseError(res: Response): Promise<ApiError> {
  let detail = res.statusText || `HTTP ${res.status}`;
  let allowed: string[] = [];
  try {
    const body = await res.json();
    if (typeof body.detail === 'string') detail = body.detail;
    if (Array.isArray(body.allowed)) allowed = body.allowed;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(res.status, detail, allowed);
}

export class ApiClient {
  base: string;
  apiBase: string;
  token: string;

  constructor(base: string, apiBase: string, token: string) {
    this.base = base.replace(/\/$/, '');
    this.apiBase = apiBase;
    this.token = token;
  }

  private async request(
    method: string,
    path: string,
    body?: Record<string, unknown> | FormData,
  ): Promise<unknown> {
    const headers: Record<string, string> = {
      Authorization: `Bearer ${this.token}`,
    };
    let payload: string | FormData | undefined;
    if (body instanceof FormData) {
      payload = body;
    } else if (body !== undefined) {
      headers['Content-Type'] = 'application/json';
      payload = JSON.stringify(body);
    }
    let res: Response;
    try {
      res = await fetch(`${this.base}${this.apiBase}${path}`, {
        method,
        headers,
        body: payload,
      });
    } catch (err) {
      throw new Unreachable(err);
    }
    if (!res.ok) throw await parseError(res);
    return res.json();
  }

  async createSession(caseId?: string): Promise<{ session_id: string }> {
    const body = caseId ? { case: caseId } : {};
    return (await this.request('POST', '/sessions', body)) as {
      session_id: string;
    };
  }

  async getSession(id: string): Promise<SessionView> {
    return (await this.request('GET', `/sessions/${id}`)) as SessionView;
  }

  async answer(
    id: string,
    question: string,
    value?: string,
    justification?: string,
  ): Promise<AnswerResponse> {
    const body: Record<string, unknown> = { question };
    if (value !== undefined) body.value = value;
    if (justification !== undefined) body.justification = justification;
    return (await this.request(
      'POST',
      `/sessions/${id}/answer`,
      body,
    )) as AnswerResponse;
  }

  /** Submit one tri-state expert claim. */
  async assert(
    id: string,
    claim: string,
    value: TriState,
    justification: string,
  ): Promise<AnswerResponse> {
    return this.answer(id, claim, value, justification);
  }

  async uploadCaseDataset(
    id: string,
    role: 'source' | 'target',
    caseId: string,
  ): Promise<UploadResponse> {
    const form = new FormData();
    form.set('role', role);
    form.set('case', caseId);
    return (await this.request(
      'POST',
      `/sessions/${id}/datasets`,
      form,
    )) as UploadResponse;
  }

  async uploadFileDataset(
    id: string,
    role: 'source' | 'target',
    file: File,
  ): Promise<UploadResponse> {
    const form = new FormData();
    form.set('role', role);
    form.set('file', file);
    return (await this.request(
      'POST',
      `/sessions/${id}/datasets`,
      form,
    )) as UploadResponse;
  }

  async runTest(
    id: string,
    test: string,
    opts: { seed?: number; permutations?: number } = {},
  ): Promise<TestResponse> {
    return (await this.request('POST', `/sessions/${id}/tests`, {
      test,
      ...opts,
    })) as TestResponse;
  }

  async getDensity(id: string): Promise<DensityPayload> {
    return (await this.request(
      'GET',
      `/sessions/${id}/density`,
    )) as DensityPayload;
  }

  async listCases(): Promise<CannedCase[]> {
    return (await this.request('GET', '/cases')) as CannedCase[];
  }
}

/** Unauthenticated; the one endpoint the UI may call before token entry. */
export async function fetchBootstrap(base = ''): Promise<Bootstrap> {
  let res: Response;
  try {
    res = await fetch(`${base.replace(/\/$/, '')}/bootstrap.json`);
  } catch (err) {
    throw new Unreachable(err);
  }
  if (!res.ok) throw await parseError(res);
  return (await res.json()) as Bootstrap;
}
