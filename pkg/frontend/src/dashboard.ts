/**
 * Communicator dashboard rendering: the three metric views, tooltip tips,
 * the peer-average row, and the share dialog. Everything renders from the
 * server's JSON; no metric math happens client-side.
 */

export interface DashboardJson {
  kind: string;
  campaign_id: string;
  payload: Record<string, unknown>;
  metric_tips: Record<string, string>;
}

export interface ApiClient {
  baseUrl: string;
  bearer?: string;
  fetchFn?: typeof fetch;
}

function api(client: ApiClient) {
  const fetchFn = client.fetchFn ?? fetch;
  const headers: Record<string, string> = { "Content-Type": "application/json" };
  if (client.bearer) headers.Authorization = `Bearer ${client.bearer}`;
  return { fetchFn, headers, base: client.baseUrl.replace(/\/$/, "") };
}

export function fmtMetric(value: unknown, places = 3): string {
  if (value === null || value === undefined) return "n/a";
  if (typeof value === "number") {
    return Number.isInteger(value) ? String(value) : value.toFixed(places);
  }
  return String(value);
}

// Dashboards got visually confusable in early use; give each kind its own
// header class so the three views read differently at a glance.
const KIND_CLASS: Record<string, string> = {
  email: "dash-email",
  message: "dash-message",
  report: "dash-report",
};

function header(doc: Document, dash: DashboardJson): HTMLElement {
  const el = doc.createElement("h2");
  el.className = `dash-header ${KIND_CLASS[dash.kind] ?? ""}`;
  el.textContent = `${dash.kind} dashboard — ${dash.campaign_id}`;
  return el;
}

function metricCell(doc: Document, name: string, tips: Record<string, string>): HTMLElement {
  const th = doc.createElement("th");
  th.textContent = name;
  const tip = tips[name];
  if (tip) {
    th.title = tip;
    th.classList.add("has-tip");
  }
  return th;
}

const EMAIL_METRIC_ORDER = [
  "open_rate",
  "click_rate",
  "read_rate",
  "detail_rate",
  "relevance_rate",
  "reading_time_s",
  "estimated_cost_usd",
  "n_comments",
  "reputation_change",
];

const MESSAGE_METRIC_ORDER = [
  "click_rate",
  "read_rate",
  "detail_rate",
  "relevance_rate",
  "reading_time_s",
  "estimated_cost_usd",
  "n_comments",
];

export function renderDashboard(
  root: HTMLElement,
  dash: DashboardJson,
  peer?: Record<string, unknown> | null,
): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  root.appendChild(header(doc, dash));
  if (dash.kind === "email") {
    renderEmail(root, dash, peer ?? null);
  } else if (dash.kind === "message") {
    renderMessages(root, dash);
  } else if (dash.kind === "report") {
    renderReport(root, dash);
  } else {
    const p = doc.createElement("p");
    p.textContent = `unknown dashboard kind: ${dash.kind}`;
    root.appendChild(p);
  }
}

function renderEmail(root: HTMLElement, dash: DashboardJson, peer: Record<string, unknown> | null): void {
  const doc = root.ownerDocument;
  const email = dash.payload.email as Record<string, unknown>;
  const table = doc.createElement("table");
  table.className = "metrics email-metrics";
  const head = doc.createElement("tr");
  head.appendChild(doc.createElement("th"));
  for (const name of EMAIL_METRIC_ORDER) {
    head.appendChild(metricCell(doc, name, dash.metric_tips));
  }
  table.appendChild(head);

  const row = doc.createElement("tr");
  const label = doc.createElement("td");
  label.textContent = "this email";
  row.appendChild(label);
  for (const name of EMAIL_METRIC_ORDER) {
    const td = doc.createElement("td");
    td.dataset.metric = name;
    td.textContent = fmtMetric(email[name]);
    row.appendChild(td);
  }
  table.appendChild(row);

  if (peer) {
    const peerRow = doc.createElement("tr");
    peerRow.className = "peer-average";
    const peerLabel = doc.createElement("td");
    peerLabel.textContent = "all communicators (avg)";
    peerRow.appendChild(peerLabel);
    for (const name of EMAIL_METRIC_ORDER) {
      const td = doc.createElement("td");
      td.textContent = fmtMetric(peer[name]);
      peerRow.appendChild(td);
    }
    table.appendChild(peerRow);
  }
  root.appendChild(table);
}

function renderMessages(root: HTMLElement, dash: DashboardJson): void {
  const doc = root.ownerDocument;
  const messages = dash.payload.messages as Array<Record<string, unknown>>;
  const table = doc.createElement("table");
  table.className = "metrics message-metrics";
  const head = doc.createElement("tr");
  const first = doc.createElement("th");
  first.textContent = "message";
  head.appendChild(first);
  for (const name of MESSAGE_METRIC_ORDER) {
    head.appendChild(metricCell(doc, name, dash.metric_tips));
  }
  table.appendChild(head);
  for (const message of messages) {
    const row = doc.createElement("tr");
    row.dataset.sectionId = String(message.section_id);
    const label = doc.createElement("td");
    label.textContent = String(message.section_id);
    row.appendChild(label);
    for (const name of MESSAGE_METRIC_ORDER) {
      const td = doc.createElement("td");
      td.dataset.metric = name;
      td.textContent = fmtMetric(message[name]);
      row.appendChild(td);
    }
    table.appendChild(row);
  }
  root.appendChild(table);
}

function renderReport(root: HTMLElement, dash: DashboardJson): void {
  const doc = root.ownerDocument;
  const sections = dash.payload.sections as Array<Record<string, unknown>>;
  for (const section of sections) {
    const block = doc.createElement("section");
    block.className = "report-section";
    block.dataset.sectionId = String(section.section_id);

    const title = doc.createElement("h3");
    title.textContent = `${section.section_id}: ${section.heading_text || "(untitled)"}`;
    block.appendChild(title);

    const stats = doc.createElement("p");
    stats.className = "report-stats";
    stats.title = dash.metric_tips.n_clicked ?? "";
    stats.textContent =
      `clicked ${section.n_clicked}/${section.n_implicit} implicit · ` +
      `relevant ${section.n_relevant}/${section.n_explicit} explicit · ` +
      `reading time ${fmtMetric(section.reading_time_s, 1)} s · ` +
      `cost $${fmtMetric(section.estimated_cost_usd, 2)}`;
    block.appendChild(stats);

    const interest = section.who_interested as Array<Record<string, unknown>>;
    if (interest?.length) {
      const table = doc.createElement("table");
      table.className = "who-interested";
      for (const bucket of interest) {
        const tr = doc.createElement("tr");
        const name = doc.createElement("td");
        name.textContent = `${bucket.dimension}: ${bucket.bucket}`;
        const count = doc.createElement("td");
        count.textContent = `${bucket.interested}/${bucket.total}`;
        tr.append(name, count);
        table.appendChild(tr);
      }
      block.appendChild(table);
    }

    const comments = section.comments as Array<Record<string, unknown>>;
    const list = doc.createElement("ul");
    list.className = "comments";
    for (const comment of comments ?? []) {
      const li = doc.createElement("li");
      const author = comment.pinned ? `${comment.author} (pinned)` : String(comment.author);
      li.textContent = `${author}: ${comment.text}`;
      list.appendChild(li);
    }
    block.appendChild(list);
    root.appendChild(block);
  }
}

// --- data loading -----------------------------------------------------------

export async function fetchDashboard(
  client: ApiClient,
  campaignId: string,
  kind: string,
): Promise<DashboardJson> {
  const { fetchFn, headers, base } = api(client);
  const response = await fetchFn(`${base}/api/campaigns/${campaignId}/dashboard?kind=${kind}`, {
    headers,
  });
  if (!response.ok) {
    throw new Error(`dashboard fetch failed: ${response.status}`);
  }
  return (await response.json()) as DashboardJson;
}

export async function shareDashboard(
  client: ApiClient,
  campaignId: string,
  kind: string,
  notes: string,
): Promise<{ share_token: string }> {
  const { fetchFn, headers, base } = api(client);
  const response = await fetchFn(`${base}/api/campaigns/${campaignId}/share`, {
    method: "POST",
    headers,
    body: JSON.stringify({ kind, notes }),
  });
  if (!response.ok) {
    throw new Error(`share failed: ${response.status}`);
  }
  return (await response.json()) as { share_token: string };
}

/** Live dashboard view: load once and poll for fresh metrics. */
export class DashboardApp {
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
    private readonly campaignId: string,
  ) {}

  async show(kind: string): Promise<void> {
    renderDashboard(this.root, await fetchDashboard(this.client, this.campaignId, kind));
  }

  /** Poll for fresh metrics, staying within 30 s of the live log. */
  startAutoRefresh(kind: string, intervalMs = 15_000): void {
    this.stop();
    this.timer = setInterval(() => {
      void this.show(kind);
    }, Math.min(intervalMs, 30_000));
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}

// --- share view ------------------------------------------------------------

export interface ShareJson {
  notes: string;
  kind: string;
  dashboard: DashboardJson;
}

export async function fetchShared(baseUrl: string, shareToken: string, fetchFn: typeof fetch = fetch): Promise<ShareJson> {
  // share links need no registration: no bearer, no cookies
  const response = await fetchFn(`${baseUrl.replace(/\/$/, "")}/s/${shareToken}.json`, {
    credentials: "omit",
  });
  if (!response.ok) {
    throw new Error(`share fetch failed: ${response.status}`);
  }
  return (await response.json()) as ShareJson;
}

/**
 * Read-only shared dashboard plus a sender comment box: share-link clients
 * may post comments that appear as the sender.
 */
export function renderShareView(
  root: HTMLElement,
  share: ShareJson,
  postComment: (sectionId: string, text: string) => Promise<void>,
): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  const notes = doc.createElement("p");
  notes.className = "share-notes";
  notes.textContent = share.notes;
  root.appendChild(notes);
  const body = doc.createElement("div");
  root.appendChild(body);
  renderDashboard(body, share.dashboard);

  const form = doc.createElement("form");
  form.className = "sender-comment";
  const sectionInput = doc.createElement("input");
  sectionInput.name = "section_id";
  sectionInput.placeholder = "section id";
  const textInput = doc.createElement("textarea");
  textInput.name = "text";
  const submit = doc.createElement("button");
  submit.type = "submit";
  submit.textContent = "Comment as sender";
  form.append(sectionInput, textInput, submit);
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const text = textInput.value.trim();
    if (!text) return;
    void postComment(sectionInput.value.trim(), text).then(() => {
      textInput.value = "";
    });
  });
  root.appendChild(form);
}
