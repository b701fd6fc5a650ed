// Wires the three panels together: input -> analyze -> gauge + evidence +
// rationale, with the ablation table re-running inference on every toggle.

import { httpClient } from "./api.js";
import type { EvidenceBundle, FeatureInfo } from "./api.js";
import {
  renderBanner, renderEvidence, renderFeatureTable, renderGauge, renderRationale,
} from "./render.js";
import { UiController } from "./state.js";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node;
}

async function boot(): Promise<void> {
  const api = httpClient("");
  const features: FeatureInfo[] = await api.features();

  const input = el("text-input") as HTMLTextAreaElement;
  const submit = el("submit-btn") as HTMLButtonElement;
  const banner = el("banner");

  const redraw = (bundle: EvidenceBundle) => {
    renderBanner(banner, null);
    renderGauge(el("gauge-panel"), bundle);
    renderEvidence(el("evidence-panel"), bundle);
    renderRationale(el("rationale-panel"), bundle.rationale);
    renderFeatureTable(
      el("ablation-panel"), features, bundle,
      (name) => controller.mask.isDisabled(name),
      (name) => controller.toggleFeature(name));
    el("provenance").textContent =
      `model ${bundle.provenance.model_hash.slice(0, 12)} · `
      + `${bundle.provenance.timing_ms.toFixed(0)} ms`;
  };

  const controller = new UiController(
    api, features, redraw,
    (message) => renderBanner(banner, message));

  renderFeatureTable(
    el("ablation-panel"), features, null,
    (name) => controller.mask.isDisabled(name),
    (name) => controller.toggleFeature(name));

  const refreshSubmit = () => {
    submit.disabled = input.value.trim().length === 0;
  };
  input.addEventListener("input", refreshSubmit);
  refreshSubmit();

  submit.addEventListener("click", () => controller.submitText(input.value));
}

boot().catch((err) => {
  const banner = document.getElementById("banner");
  if (banner) {
    banner.textContent = `failed to reach the detection service: ${err}`;
    banner.classList.add("visible");
  }
});
