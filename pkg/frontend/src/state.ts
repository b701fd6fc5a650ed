// UI state: the feature mask and a request gate that keeps at most one
// analyze call in flight. A new submission supersedes the in-flight one
// (its response is dropped by sequence number); toggles arriving during a
// flight collapse into a single queued re-run.

import type { AnalyzeBody, ApiClient, EvidenceBundle, FeatureInfo } from "./api.js";

export class FeatureMask {
  private disabled = new Set<string>();

  constructor(public readonly names: readonly string[]) {}

  static fromFeatures(features: FeatureInfo[]): FeatureMask {
    return new FeatureMask(features.map((f) => f.name));
  }

  isDisabled(name: string): boolean {
    return this.disabled.has(name);
  }

  toggle(name: string): void {
    if (!this.names.includes(name)) {
      throw new Error(`unknown feature ${name}`);
    }
    if (this.disabled.has(name)) {
      this.disabled.delete(name);
    } else {
      this.disabled.add(name);
    }
  }

  disabledList(): string[] {
    // Canonical order, so identical masks serialize identically.
    return this.names.filter((n) => this.disabled.has(n));
  }
}

export class RequestGate {
  private seq = 0;
  private inFlight = false;
  private queued: AnalyzeBody | null = null;
  sendCount = 0;

  constructor(
    private readonly send: (body: AnalyzeBody) => Promise<EvidenceBundle>,
    private readonly onResult: (bundle: EvidenceBundle) => void,
    private readonly onError: (err: unknown) => void,
  ) {}

  /** Queue (or immediately issue) a request; at most one slot is queued. */
  submit(body: AnalyzeBody): void {
    this.queued = body;
    this.seq += 1; // supersede whatever is in flight
    if (!this.inFlight) {
      void this.pump();
    }
  }

  get busy(): boolean {
    return this.inFlight;
  }

  private async pump(): Promise<void> {
    while (this.queued !== null) {
      const body = this.queued;
      this.queued = null;
      const mySeq = this.seq;
      this.inFlight = true;
      this.sendCount += 1;
      try {
        const bundle = await this.send(body);
        if (mySeq === this.seq) {
          this.onResult(bundle);
        }
      } catch (err) {
        if (mySeq === this.seq) {
          this.onError(err);
        }
      } finally {
        this.inFlight = false;
      }
    }
  }
}

export class UiController {
  mask: FeatureMask;
  lastText = "";
  lastBundle: EvidenceBundle | null = null;
  private gate: RequestGate;

  constructor(
    private readonly api: ApiClient,
    features: FeatureInfo[],
    private readonly onBundle: (bundle: EvidenceBundle) => void,
    private readonly onFailure: (message: string) => void,
  ) {
    this.mask = FeatureMask.fromFeatures(features);
    this.gate = new RequestGate(
      (body) => this.api.analyze(body),
      (bundle) => {
        this.lastBundle = bundle;
        this.onBundle(bundle);
      },
      (err) => this.onFailure(err instanceof Error ? err.message : String(err)),
    );
  }

  get requestsSent(): number {
    return this.gate.sendCount;
  }

  submitText(text: string): void {
    if (!text.trim()) {
      return;
    }
    this.lastText = text;
    this.gate.submit({
      text,
      disabled_features: this.mask.disabledList(),
      explain: true,
    });
  }

  /** Flip one feature and re-run the last analysis with the new mask. */
  toggleFeature(name: string): void {
    this.mask.toggle(name);
    if (!this.lastText) {
      return; // no prior analysis; the mask applies to the next submit
    }
    this.gate.submit({
      text: this.lastText,
      disabled_features: this.mask.disabledList(),
      explain: true,
    });
  }
}
