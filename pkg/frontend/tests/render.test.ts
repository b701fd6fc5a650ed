// Contract tests against recorded gateway responses: every displayed
// number must originate from the EvidenceBundle, byte for byte.
import { beforeEach, describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { join } from "node:path";

import type { EvidenceBundle, FeatureInfo } from "../src/api.js";
import {
  formatValue, gaugePercent, renderBanner, renderEvidence, renderFeatureTable,
  renderGauge, renderRationale,
} from "../src/render.js";

const FIXTURES = join(__dirname, "fixtures");

function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(FIXTURES, name), "utf-8")) as T;
}

const bundle = fixture<EvidenceBundle>("bundle_full.json");
const features = fixture<{ features: FeatureInfo[] }>("features.json").features;

let host: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = "<div id='host'></div>";
  host = document.getElementById("host")!;
});

describe("gauge", () => {
  it("shows the bundle's probability as text and the label badge", () => {
    renderGauge(host, bundle);
    const pct = gaugePercent(bundle);
    expect(host.querySelector(".gauge-value")!.textContent).toBe(`${pct}%`);
    expect(host.querySelector(".gauge-label")!.textContent).toBe(bundle.label);
    expect(host.querySelector("svg")!.classList.contains(`zone-${bundle.label}`))
      .toBe(true);
  });

  it("keeps the value accessible as text", () => {
    renderGauge(host, bundle);
    const svg = host.querySelector("svg")!;
    expect(svg.getAttribute("aria-label")).toContain(`${gaugePercent(bundle)}%`);
  });

  it("renders 93% for a probability of 0.93", () => {
    const high = { ...bundle, probability_ai: 0.93, label: "ai" as const };
    renderGauge(host, high);
    expect(host.querySelector(".gauge-value")!.textContent).toBe("93%");
    expect(host.querySelector("svg")!.classList.contains("zone-ai")).toBe(true);
  });
});

describe("evidence panel", () => {
  it("lists the top evidence with exact raw values and normalized bars", () => {
    renderEvidence(host, bundle);
    const items = host.querySelectorAll(".evidence-item");
    expect(items.length).toBe(
      bundle.top_ai_evidence.length + bundle.top_human_evidence.length);
    for (const expected of bundle.top_ai_evidence) {
      const row = host.querySelector(
        `.evidence-item[data-feature='${expected.feature}']`)!;
      expect(row.querySelector(".evidence-value")!.textContent)
        .toBe(formatValue(expected.value));
      const bar = row.querySelector<HTMLElement>(".evidence-bar")!;
      expect(bar.title).toBe(`phi ${expected.phi}`);
      const share = bundle.features[expected.feature].normalized_phi;
      expect(bar.style.width).toBe(`${(Math.abs(share) * 100).toFixed(1)}%`);
    }
  });

  it("shows 'no opposing evidence' when the human side is empty", () => {
    renderEvidence(host, { ...bundle, top_human_evidence: [] });
    expect(host.textContent).toContain("no opposing evidence");
  });
});

describe("rationale panel", () => {
  it("renders the summary verbatim with its source badge", () => {
    renderRationale(host, bundle.rationale);
    expect(host.querySelector(".rationale-summary")!.textContent)
      .toContain(bundle.rationale!.summary);
    expect(host.querySelector(".source-badge")!.textContent)
      .toBe(bundle.rationale!.source);
  });

  it("renders each per-feature sentence exactly", () => {
    renderRationale(host, bundle.rationale);
    for (const [name, sentence] of Object.entries(
        bundle.rationale!.top_ai_evidence)) {
      expect(host.textContent).toContain(name);
      expect(host.textContent).toContain(sentence);
    }
  });

  it("clears when rationale is absent", () => {
    renderRationale(host, null);
    expect(host.innerHTML).toBe("");
  });
});

describe("ablation table", () => {
  it("renders one row per feature from GET /features", () => {
    renderFeatureTable(host, features, bundle, () => false, () => {});
    expect(host.querySelectorAll("tbody tr").length).toBe(features.length);
    expect(features.length).toBe(17);
  });

  it("strikes through disabled features and shows their imputed values", () => {
    const masked = fixture<EvidenceBundle>("bundle_masked.json");
    renderFeatureTable(host, features, masked,
      (name) => name === "stopword_ratio", () => {});
    const row = host.querySelector("tr[data-feature='stopword_ratio']")!;
    expect(row.classList.contains("feature-disabled")).toBe(true);
    const cell = row.querySelector(".feature-value")!;
    expect(cell.textContent).toContain(
      formatValue(masked.features.stopword_ratio.raw_value));
    expect(cell.textContent).toContain("(imputed)");
    const checkbox = row.querySelector<HTMLInputElement>("input")!;
    expect(checkbox.checked).toBe(false);
  });

  it("invokes the toggle callback with the feature name", () => {
    const toggled: string[] = [];
    renderFeatureTable(host, features, bundle, () => false,
      (name) => toggled.push(name));
    const row = host.querySelector("tr[data-feature='curvature']")!;
    row.querySelector("input")!.dispatchEvent(new Event("change"));
    expect(toggled).toEqual(["curvature"]);
  });
});

describe("banner", () => {
  it("shows failures and clears on success", () => {
    renderBanner(host, "boom");
    expect(host.classList.contains("visible")).toBe(true);
    expect(host.textContent).toContain("boom");
    renderBanner(host, null);
    expect(host.classList.contains("visible")).toBe(false);
  });
});
