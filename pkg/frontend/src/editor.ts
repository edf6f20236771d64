/**
 * Split editor: shows the section boundaries after upload and round-trips
 * merge / remove / survey-toggle actions through
 * PATCH /api/campaigns/{id}/sections. Controls disable once the campaign is
 * sent; API edit errors surface inline instead of throwing.
 */

import type { ApiClient } from "./dashboard";

export interface SectionJson {
  section_id: string;
  kind: string;
  heading_text: string;
  word_count: number;
  survey_enabled: boolean;
  order: number;
}

type EditOp = Record<string, unknown>;

export class SplitEditor {
  private sections: SectionJson[];
  private errorText = "";

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
    private readonly campaignId: string,
    sections: SectionJson[],
    private sent = false,
  ) {
    this.sections = sections;
    this.render();
  }

  get sectionIds(): string[] {
    return this.sections.map((s) => s.section_id);
  }

  markSent(): void {
    this.sent = true;
    this.render();
  }

  private async apply(ops: EditOp[]): Promise<void> {
    const fetchFn = this.client.fetchFn ?? fetch;
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.client.bearer) headers.Authorization = `Bearer ${this.client.bearer}`;
    const base = this.client.baseUrl.replace(/\/$/, "");
    const response = await fetchFn(`${base}/api/campaigns/${this.campaignId}/sections`, {
      method: "PATCH",
      headers,
      body: JSON.stringify(ops),
    });
    if (response.ok) {
      const body = (await response.json()) as { sections: SectionJson[] };
      this.sections = body.sections;
      this.errorText = "";
    } else {
      const body = (await response.json().catch(() => ({ error: `HTTP ${response.status}` }))) as {
        error?: string;
      };
      this.errorText = body.error ?? `HTTP ${response.status}`;
    }
    this.render();
  }

  merge(sectionId: string, intoId: string): Promise<void> {
    return this.apply([{ op: "merge", section_id: sectionId, into_id: intoId }]);
  }

  remove(sectionId: string): Promise<void> {
    return this.apply([{ op: "remove", section_id: sectionId }]);
  }

  toggleSurvey(sectionId: string, on: boolean): Promise<void> {
    return this.apply([{ op: "toggle_survey", section_id: sectionId, on }]);
  }

  addBoundary(sectionId: string, charOffset: number): Promise<void> {
    return this.apply([{ op: "add_boundary", section_id: sectionId, char_offset: charOffset }]);
  }

  render(): void {
    const doc = this.root.ownerDocument;
    this.root.textContent = "";
    if (this.errorText) {
      const err = doc.createElement("p");
      err.className = "edit-error";
      err.textContent = this.errorText;
      this.root.appendChild(err);
    }
    const list = doc.createElement("ol");
    list.className = "section-list";
    this.sections.forEach((section, index) => {
      const item = doc.createElement("li");
      item.dataset.sectionId = section.section_id;
      const label = doc.createElement("span");
      label.textContent =
        `${section.section_id} [${section.kind}] ${section.word_count}w ` +
        `${section.heading_text || "(no heading)"}`;
      item.appendChild(label);

      const survey = doc.createElement("button");
      survey.type = "button";
      survey.className = "toggle-survey";
      survey.textContent = section.survey_enabled ? "survey on" : "survey off";
      survey.disabled = this.sent;
      survey.addEventListener("click", () => {
        void this.toggleSurvey(section.section_id, !section.survey_enabled);
      });
      item.appendChild(survey);

      if (index > 0) {
        const mergeUp = doc.createElement("button");
        mergeUp.type = "button";
        mergeUp.className = "merge-up";
        mergeUp.textContent = "merge into previous";
        mergeUp.disabled = this.sent;
        mergeUp.addEventListener("click", () => {
          void this.merge(section.section_id, this.sections[index - 1].section_id);
        });
        item.appendChild(mergeUp);
      }

      const drop = doc.createElement("button");
      drop.type = "button";
      drop.className = "remove-section";
      drop.textContent = "remove";
      drop.disabled = this.sent;
      drop.addEventListener("click", () => {
        void this.remove(section.section_id);
      });
      item.appendChild(drop);

      list.appendChild(item);
    });
    this.root.appendChild(list);
  }
}
