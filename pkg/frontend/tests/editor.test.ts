import { describe, expect, it, vi } from "vitest";

import { SplitEditor, type SectionJson } from "../src/editor";

function sections(): SectionJson[] {
  return [
    { section_id: "s1", kind: "title", heading_text: "TOP", word_count: 2, survey_enabled: false, order: 0 },
    { section_id: "s2", kind: "content", heading_text: "Story", word_count: 80, survey_enabled: true, order: 1 },
    { section_id: "s3", kind: "content", heading_text: "Other", word_count: 50, survey_enabled: true, order: 2 },
  ];
}

function root(): HTMLElement {
  const el = document.createElement("div");
  document.body.appendChild(el);
  return el;
}

describe("SplitEditor", () => {
  it("renders one row per section with controls", () => {
    const editor = new SplitEditor(root(), { baseUrl: "http://api" }, "c1", sections());
    expect(editor.sectionIds).toEqual(["s1", "s2", "s3"]);
    const items = document.querySelectorAll("li[data-section-id]");
    expect(items).toHaveLength(3);
  });

  it("merge round-trips through PATCH and re-renders", async () => {
    const fetchFn = vi.fn(async (url: unknown, init?: RequestInit) => {
      expect(String(url)).toBe("http://api/api/campaigns/c1/sections");
      expect(init?.method).toBe("PATCH");
      expect(JSON.parse(String(init?.body))).toEqual([
        { op: "merge", section_id: "s2", into_id: "s1" },
      ]);
      const merged = sections().slice(0, 1).concat(sections().slice(2));
      return { ok: true, json: async () => ({ sections: merged }) } as Response;
    }) as unknown as typeof fetch;
    const el = root();
    const editor = new SplitEditor(el, { baseUrl: "http://api", fetchFn }, "c1", sections());
    await editor.merge("s2", "s1");
    expect(editor.sectionIds).toEqual(["s1", "s3"]);
    expect(el.querySelectorAll("li[data-section-id]")).toHaveLength(2);
  });

  it("surfaces API edit errors inline", async () => {
    const fetchFn = vi.fn(async () => ({
      ok: false,
      status: 422,
      json: async () => ({ error: "merge targets must be adjacent" }),
    })) as unknown as typeof fetch;
    const el = root();
    const editor = new SplitEditor(el, { baseUrl: "http://api", fetchFn }, "c1", sections());
    await editor.merge("s3", "s1");
    expect(el.querySelector(".edit-error")!.textContent).toBe("merge targets must be adjacent");
    expect(editor.sectionIds).toEqual(["s1", "s2", "s3"]);
  });

  it("toggling survey posts the op", async () => {
    const bodies: unknown[] = [];
    const fetchFn = vi.fn(async (_url: unknown, init?: RequestInit) => {
      bodies.push(JSON.parse(String(init?.body)));
      return { ok: true, json: async () => ({ sections: sections() }) } as Response;
    }) as unknown as typeof fetch;
    const el = root();
    const editor = new SplitEditor(el, { baseUrl: "http://api", fetchFn }, "c1", sections());
    const button = el.querySelector<HTMLButtonElement>('li[data-section-id="s2"] .toggle-survey')!;
    button.click();
    await Promise.resolve();
    expect(bodies).toEqual([[{ op: "toggle_survey", section_id: "s2", on: false }]]);
  });

  it("controls disable after send", () => {
    const el = root();
    const editor = new SplitEditor(el, { baseUrl: "http://api" }, "c1", sections());
    editor.markSent();
    const buttons = Array.from(el.querySelectorAll("button"));
    expect(buttons.length).toBeGreaterThan(0);
    expect(buttons.every((b) => b.disabled)).toBe(true);
  });
});
