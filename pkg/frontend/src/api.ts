// Typed client for the detection service. The UI never computes any
// detection logic itself: every displayed number originates from these
// response payloads.

export interface FeatureInfo {
  name: string;
  label: string;
  description: string;
}

export interface FeatureReport {
  raw_value: number;
  phi: number;
  normalized_phi: number;
  imputed: boolean;
  disabled: boolean;
}

export interface EvidenceItem {
  feature: string;
  value: number;
  phi: number;
}

export interface Rationale {
  top_ai_evidence: Record<string, string>;
  top_human_evidence: Record<string, string>;
  summary: string;
  source: "llm" | "template";
}

export interface EvidenceBundle {
  label: "ai" | "human";
  probability_ai: number;
  margin: number;
  base_value: number;
  features: Record<string, FeatureReport>;
  top_ai_evidence: EvidenceItem[];
  top_human_evidence: EvidenceItem[];
  rationale: Rationale | null;
  imputed_features: string[];
  provenance: { model_hash: string; backend_ids: string[]; timing_ms: number };
}

export interface AnalyzeBody {
  text: string;
  disabled_features: string[];
  explain: boolean;
}

export interface ApiClient {
  features(): Promise<FeatureInfo[]>;
  analyze(body: AnalyzeBody): Promise<EvidenceBundle>;
}

export function httpClient(base = ""): ApiClient {
  async function request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(base + path, init);
    if (!resp.ok) {
      let message = `${resp.status}`;
      try {
        const body = await resp.json();
        message = body.message ?? body.code ?? message;
      } catch {
        /* non-JSON error body */
      }
      throw new Error(message);
    }
    return resp.json() as Promise<T>;
  }

  return {
    async features() {
      const body = await request<{ features: FeatureInfo[] }>("/features");
      return body.features;
    },
    analyze(body: AnalyzeBody) {
      return request<EvidenceBundle>("/analyze", {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      });
    },
  };
}
