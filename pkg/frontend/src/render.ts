// DOM rendering. Every number shown here is read off an EvidenceBundle;
// nothing is recomputed client-side.

import type { EvidenceBundle, EvidenceItem, FeatureInfo, Rationale } from "./api.js";

export function formatValue(value: number): string {
  if (!Number.isFinite(value)) {
    return String(value);
  }
  if (Number.isInteger(value)) {
    return String(value);
  }
  return value.toPrecision(4).replace(/\.?0+$/, "");
}

export function gaugePercent(bundle: EvidenceBundle): number {
  return Math.round(bundle.probability_ai * 100);
}

export function renderGauge(el: HTMLElement, bundle: EvidenceBundle): void {
  const pct = gaugePercent(bundle);
  // Needle sweeps the semicircle: 0% AI on the left, 100% on the right.
  const angle = -90 + bundle.probability_ai * 180;
  const zone = bundle.label === "ai" ? "zone-ai" : "zone-human";
  el.innerHTML = `
    <svg viewBox="0 0 200 120" class="gauge ${zone}" role="img"
         aria-label="probability of AI origin: ${pct}%">
      <path d="M 20 100 A 80 80 0 0 1 100 20" class="arc arc-human"/>
      <path d="M 100 20 A 80 80 0 0 1 180 100" class="arc arc-ai"/>
      <line x1="100" y1="100" x2="100" y2="32" class="needle"
            transform="rotate(${angle.toFixed(2)} 100 100)"/>
      <circle cx="100" cy="100" r="6" class="hub"/>
    </svg>
    <div class="gauge-reading">
      <span class="gauge-value">${pct}%</span>
      <span class="gauge-label label-${bundle.label}">${bundle.label}</span>
    </div>`;
}

function evidenceList(bundle: EvidenceBundle, items: EvidenceItem[],
                      side: "ai" | "human", emptyMessage: string): string {
  if (items.length === 0) {
    return `<p class="evidence-empty">${emptyMessage}</p>`;
  }
  const rows = items.map((item) => {
    // Bar length is the normalized share; raw phi sits on the tooltip.
    const share = bundle.features[item.feature]?.normalized_phi ?? 0;
    const width = Math.min(Math.abs(share) * 100, 100);
    return `
      <li class="evidence-item" data-feature="${item.feature}">
        <span class="evidence-name">${item.feature}</span>
        <span class="evidence-value">${formatValue(item.value)}</span>
        <span class="evidence-bar bar-${side}" title="phi ${item.phi}"
              style="width: ${width.toFixed(1)}%"></span>
      </li>`;
  });
  return `<ul class="evidence-list">${rows.join("")}</ul>`;
}

export function renderEvidence(el: HTMLElement, bundle: EvidenceBundle): void {
  el.innerHTML = `
    <div class="evidence-column">
      <h3>Toward AI</h3>
      ${evidenceList(bundle, bundle.top_ai_evidence, "ai", "no supporting evidence")}
    </div>
    <div class="evidence-column">
      <h3>Toward human</h3>
      ${evidenceList(bundle, bundle.top_human_evidence, "human", "no opposing evidence")}
    </div>`;
}

export function renderRationale(el: HTMLElement, rationale: Rationale | null): void {
  if (rationale === null) {
    el.innerHTML = "";
    return;
  }
  const section = (title: string, entries: Record<string, string>) => {
    const items = Object.entries(entries)
      .map(([name, sentence]) =>
        `<li><strong>${name}</strong>: ${sentence}</li>`)
      .join("");
    return items ? `<h4>${title}</h4><ul>${items}</ul>` : "";
  };
  el.innerHTML = `
    <p class="rationale-summary">${rationale.summary}
      <span class="source-badge badge-${rationale.source}">${rationale.source}</span>
    </p>
    ${section("AI signals", rationale.top_ai_evidence)}
    ${section("Human signals", rationale.top_human_evidence)}`;
}

export function renderFeatureTable(
  el: HTMLElement,
  features: FeatureInfo[],
  bundle: EvidenceBundle | null,
  isDisabled: (name: string) => boolean,
  onToggle: (name: string) => void,
): void {
  el.innerHTML = "";
  const table = document.createElement("table");
  table.className = "feature-table";
  table.innerHTML = `<thead><tr>
      <th>on</th><th>feature</th><th>value</th><th>phi</th>
    </tr></thead>`;
  const body = document.createElement("tbody");
  for (const info of features) {
    const report = bundle?.features[info.name];
    const row = document.createElement("tr");
    row.dataset.feature = info.name;
    const disabled = isDisabled(info.name);
    if (disabled) {
      row.classList.add("feature-disabled");
    }
    const valueText = report === undefined ? "-" : formatValue(report.raw_value);
    const phiText = report === undefined ? "-" : formatValue(report.phi);
    const note = report?.disabled ? " (imputed)"
      : report?.imputed ? " (backend imputed)" : "";
    row.innerHTML = `
      <td><input type="checkbox" aria-label="enable ${info.name}"
           ${disabled ? "" : "checked"}></td>
      <td title="${info.description}">${info.label}</td>
      <td class="feature-value">${valueText}${note}</td>
      <td class="feature-phi">${phiText}</td>`;
    row.querySelector("input")!.addEventListener("change", () => onToggle(info.name));
    body.appendChild(row);
  }
  table.appendChild(body);
  el.appendChild(table);
}

export function renderBanner(el: HTMLElement, message: string | null): void {
  if (message === null) {
    el.innerHTML = "";
    el.classList.remove("visible");
    return;
  }
  el.textContent = `analysis failed: ${message}`;
  el.classList.add("visible");
}
