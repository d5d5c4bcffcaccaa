/** Wire types shared with the dataset service. */

export type Mode = "create" | "update";

export interface OverrideEntry {
  tag: string;
  modality: string;
  type: string;
}

/** The JSON document both endpoints accept. Key order matters for fidelity. */
export interface RequestDocument {
  scans: Record<string, Record<string, string>>;
  output: string;
  metadata?: {
    modalities?: OverrideEntry[];
    datasetDescription?: Record<string, string>;
  };
  overwrite?: boolean;
}

export interface SeriesClassification {
  series_name: string;
  modality: string;
  suffix: string;
  rule_id: string;
}

export interface DatasetReport {
  status: string;
  dataset_path: string;
  subjects: number;
  sessions: number;
  series: number;
  classifications: SeriesClassification[];
  timing: { total_s: number; converter_s: number };
  failures: { series_name: string; reason: string }[];
}

export interface ErrorBody {
  error_code: string;
  message: string;
  failed_series?: { series_name: string; reason: string }[];
}

export type SubmitResult =
  | { kind: "report"; status: number; report: DatasetReport }
  | { kind: "error"; status: number; error: ErrorBody };
