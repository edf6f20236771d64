/**
 * Recipient-page instrumentation: geometry layout capture, 1 Hz samples,
 * idle watchdog with a stay-on-page prompt, and the explicit-group
 * relevance/comment widgets. Everything reports through the EventQueue to
 * POST /t/{token}/events.
 *
 * The page embeds this as <script src="/static/tracker.js"
 * data-token="..." data-group="implicit|explicit">.
 */

import { EventQueue } from "./wire";

export interface TrackerOptions {
  token: string;
  group: string;
  win?: Window;
  doc?: Document;
  endpointBase?: string;
  fetchFn?: typeof fetch;
  /** Flush cadence; the queue also flushes when a batch fills. */
  flushIntervalMs?: number;
  idleAfterMs?: number;
}

const FLUSH_INTERVAL_MS = 5000;
const IDLE_AFTER_MS = 60_000;
const MOVE_THROTTLE_MS = 200;

export interface Tracker {
  queue: EventQueue;
  stop(): void;
  /** For tests: the idle prompt element, if currently shown. */
  promptElement(): HTMLElement | null;
}

export function initTracker(options: TrackerOptions): Tracker {
  const win = options.win ?? window;
  const doc = options.doc ?? win.document;
  const base = (options.endpointBase ?? "").replace(/\/$/, "");
  const fetchFn = options.fetchFn ?? fetch.bind(win);
  const idleAfterMs = options.idleAfterMs ?? IDLE_AFTER_MS;
  const queue = new EventQueue({
    endpoint: `${base}/t/${options.token}/events`,
    fetchFn,
  });

  const now = () => Date.now();
  let lastMouse = { x: 0, y: 0 };
  let lastActivity = now();
  let lastMoveEmit = 0;
  let lastScrollEmit = 0;
  let prompt: HTMLElement | null = null;
  const timers: number[] = [];

  function maybeFlush() {
    if (queue.wantsFlush) {
      void queue.flush(now());
    }
  }

  function emit(kind: string, payload: Record<string, unknown>) {
    queue.emit(kind, payload, now());
    maybeFlush();
  }

  function sectionElements(): HTMLElement[] {
    return Array.from(doc.querySelectorAll<HTMLElement>(".ct-section"));
  }

  function captureLayout() {
    const sections: Array<{ id: string; top: number; height: number }> = [];
    const skipped: string[] = [];
    for (const el of sectionElements()) {
      const rect = el.getBoundingClientRect();
      const id = el.dataset.sectionId ?? el.id.replace(/^sec-/, "");
      if (rect.height <= 0) {
        skipped.push(id);
        continue;
      }
      sections.push({ id, top: rect.top + win.scrollY, height: rect.height });
    }
    const payload: Record<string, unknown> = {
      sections,
      doc_h: doc.documentElement.scrollHeight,
      vw: win.innerWidth,
      vh: win.innerHeight,
    };
    if (skipped.length > 0) {
      payload.skipped = skipped;
    }
    emit("layout", payload);
  }

  function sample() {
    emit("sample", {
      y: win.scrollY,
      vw: win.innerWidth,
      vh: win.innerHeight,
      mx: lastMouse.x,
      my: lastMouse.y,
      vis: doc.visibilityState !== "hidden",
    });
  }

  // While the prompt is up, ordinary activity does not dismiss it or reset
  // the clock; only the confirm click resumes, matching the server's
  // idle-exclusion rule.
  function showPrompt() {
    if (prompt) return;
    const box = doc.createElement("div");
    box.className = "ct-idle-prompt";
    box.setAttribute("role", "dialog");
    const label = doc.createElement("p");
    label.textContent = "Still reading?";
    const button = doc.createElement("button");
    button.type = "button";
    button.className = "ct-idle-confirm";
    button.textContent = "Yes, I'm here";
    button.addEventListener("click", () => {
      emit("idle_confirm", {});
      lastActivity = now();
      box.remove();
      prompt = null;
    });
    box.append(label, button);
    doc.body.appendChild(box);
    prompt = box;
    emit("idle_prompt", {});
  }

  function idleTick() {
    if (!prompt && now() - lastActivity >= idleAfterMs) {
      showPrompt();
    }
  }

  // --- listeners -----------------------------------------------------------

  const onMouseMove = (ev: MouseEvent) => {
    lastMouse = { x: ev.clientX, y: ev.clientY };
    const t = now();
    if (!prompt) lastActivity = t;
    if (t - lastMoveEmit >= MOVE_THROTTLE_MS) {
      lastMoveEmit = t;
      emit("mousemove", { x: ev.clientX, y: ev.clientY });
    }
  };

  const onScroll = () => {
    const t = now();
    if (!prompt) lastActivity = t;
    if (t - lastScrollEmit >= MOVE_THROTTLE_MS) {
      lastScrollEmit = t;
      emit("scroll", { y: win.scrollY });
    }
  };

  const onClick = (ev: MouseEvent) => {
    if (!prompt) lastActivity = now();
    const target = ev.target as HTMLElement | null;
    const anchor = target?.closest?.("a");
    if (anchor) {
      const section = anchor.closest<HTMLElement>(".ct-section");
      if (section) {
        emit("click", {
          section_id: section.dataset.sectionId ?? "",
          url: anchor.getAttribute("href") ?? "",
        });
      }
    }
  };

  const onVisibility = () => {
    emit(doc.visibilityState === "hidden" ? "hidden" : "visible", {});
  };

  const onResize = () => captureLayout();

  const onUnload = () => {
    emit("close", {});
    void queue.flush(now(), true); // keepalive: best-effort beacon
  };

  doc.addEventListener("mousemove", onMouseMove, { passive: true });
  doc.addEventListener("scroll", onScroll, { passive: true, capture: true });
  win.addEventListener("scroll", onScroll, { passive: true });
  doc.addEventListener("click", onClick);
  doc.addEventListener("visibilitychange", onVisibility);
  win.addEventListener("resize", onResize);
  win.addEventListener("pagehide", onUnload);

  // --- explicit-group widgets ---------------------------------------------

  if (options.group === "explicit") {
    for (const button of Array.from(doc.querySelectorAll<HTMLElement>(".ct-relevance"))) {
      button.addEventListener("click", () => {
        const on = button.getAttribute("aria-pressed") !== "true";
        button.setAttribute("aria-pressed", on ? "true" : "false");
        void fetchFn(`${base}/t/${options.token}/relevance`, {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify({ section_id: button.dataset.sectionId, on }),
        });
      });
    }
    for (const form of Array.from(doc.querySelectorAll<HTMLFormElement>(".ct-comment-box"))) {
      form.addEventListener("submit", (ev) => {
        ev.preventDefault();
        const area = form.querySelector("textarea");
        const text = area?.value.trim() ?? "";
        if (!text) return;
        void fetchFn(`${base}/t/${options.token}/comments`, {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify({ section_id: form.dataset.sectionId, text }),
        });
        if (area) area.value = "";
      });
    }
  }

  // --- boot ------------------------------------------------------------------

  emit("open", { url: win.location?.href ?? "" });
  captureLayout();
  sample();
  timers.push(win.setInterval(sample, 1000));
  timers.push(win.setInterval(idleTick, 1000));
  timers.push(
    win.setInterval(() => {
      void queue.flush(now());
    }, options.flushIntervalMs ?? FLUSH_INTERVAL_MS),
  );

  return {
    queue,
    promptElement: () => prompt,
    stop() {
      for (const id of timers) win.clearInterval(id);
      doc.removeEventListener("mousemove", onMouseMove);
      doc.removeEventListener("scroll", onScroll, { capture: true } as EventListenerOptions);
      win.removeEventListener("scroll", onScroll);
      doc.removeEventListener("click", onClick);
      doc.removeEventListener("visibilitychange", onVisibility);
      win.removeEventListener("resize", onResize);
      win.removeEventListener("pagehide", onUnload);
    },
  };
}

/** Boot from the embedding <script> tag's data attributes. */
export function autoBoot(doc: Document = document): Tracker | null {
  const script = doc.querySelector<HTMLScriptElement>("script[data-token]");
  if (!script) return null;
  const src = script.getAttribute("src") ?? "";
  const base = src.includes("://") ? new URL(src).origin : "";
  return initTracker({
    token: script.dataset.token ?? "",
    group: script.dataset.group ?? "implicit",
    endpointBase: base,
  });
}

declare global {
  interface Window {
    __commtoolTracker?: Tracker | null;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined" && !("__vitest_worker__" in globalThis)) {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", () => {
      window.__commtoolTracker = autoBoot();
    });
  } else {
    window.__commtoolTracker = autoBoot();
  }
}
