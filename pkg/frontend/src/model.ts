/** Form state and client-side validation mirroring the service's parse rules.
 *
 * The form never computes anything the service doesn't: validation here only
 * mirrors the parser's label/shape rules and the modality/type legality table
 * so a document is submitted exactly when the service would accept its shape.
 */

import type { DatasetReport, ErrorBody, Mode } from "./types.js";

export interface SessionRow {
  session: string;
  path: string;
}

export interface SubjectRow {
  subject: string;
  sessions: SessionRow[];
}

export interface OverrideRow {
  tag: string;
  modality: string;
  type: string;
}

export interface DescriptionRow {
  key: string;
  value: string;
}

export type SubmissionStatus = "idle" | "pending" | "succeeded" | "failed";

export interface FormState {
  mode: Mode;
  subjects: SubjectRow[];
  output: string;
  overrides: OverrideRow[];
  description: DescriptionRow[];
  overwrite: boolean;
  status: SubmissionStatus;
  lastReport: DatasetReport | null;
  lastError: { status: number; body: ErrorBody } | null;
}

export interface FieldError {
  /** Dotted location, e.g. "subjects.0.sessions.1.path" or "output". */
  field: string;
  message: string;
}

/** Which modality each type label belongs under (mirror of the service table). */
export const LEGAL_PAIRS: Record<string, string> = {
  T1w: "anat",
  T2w: "anat",
  FLAIR: "anat",
  bold: "func",
  dwi: "dwi",
};

export const MODALITIES = ["anat", "func", "dwi", "fmap"] as const;
export const TYPES = Object.keys(LEGAL_PAIRS);

export function pairIsLegal(modality: string, type: string): boolean {
  return LEGAL_PAIRS[type] === modality;
}

const LABEL = /^[A-Za-z0-9]+$/;

/** Strip one sub-/ses- prefix; returns null when the remainder is not a label. */
export function normalizeLabel(raw: string): string | null {
  let value = raw;
  for (const prefix of ["sub-", "ses-"]) {
    if (value.startsWith(prefix)) {
      value = value.slice(prefix.length);
      break;
    }
  }
  return LABEL.test(value) ? value : null;
}

export function emptyForm(mode: Mode = "create"): FormState {
  return {
    mode,
    subjects: [{ subject: "", sessions: [{ session: "", path: "" }] }],
    output: "",
    overrides: [],
    description: [],
    overwrite: false,
    status: "idle",
    lastReport: null,
    lastError: null,
  };
}

export function validateForm(form: FormState): FieldError[] {
  const errors: FieldError[] = [];
  const seenSubjects = new Set<string>();

  form.subjects.forEach((row, i) => {
    const subject = normalizeLabel(row.subject);
    if (subject === null) {
      errors.push({
        field: `subjects.${i}.subject`,
        message: "subject label must be alphanumeric (an optional sub- prefix is stripped)",
      });
    } else if (seenSubjects.has(subject)) {
      errors.push({ field: `subjects.${i}.subject`, message: `duplicate subject "${subject}"` });
    } else {
      seenSubjects.add(subject);
    }
    if (row.sessions.length === 0) {
      errors.push({ field: `subjects.${i}.sessions`, message: "subject needs at least one session" });
    }
    const seenSessions = new Set<string>();
    row.sessions.forEach((sessionRow, j) => {
      const session = normalizeLabel(sessionRow.session);
      if (session === null) {
        errors.push({
          field: `subjects.${i}.sessions.${j}.session`,
          message: "session label must be alphanumeric (an optional ses- prefix is stripped)",
        });
      } else if (seenSessions.has(session)) {
        errors.push({
          field: `subjects.${i}.sessions.${j}.session`,
          message: `duplicate session "${session}"`,
        });
      } else {
        seenSessions.add(session);
      }
      if (!sessionRow.path) {
        errors.push({
          field: `subjects.${i}.sessions.${j}.path`,
          message: "source directory path is required",
        });
      }
    });
  });

  if (!form.output) {
    errors.push({ field: "output", message: "output path is required" });
  }

  form.overrides.forEach((row, i) => {
    if (!row.tag) {
      errors.push({ field: `overrides.${i}.tag`, message: "tag is required" });
    }
    if (!pairIsLegal(row.modality, row.type)) {
      errors.push({
        field: `overrides.${i}.type`,
        message: `illegal pairing: ${row.modality}/${row.type}`,
      });
    }
  });

  const seenKeys = new Set<string>();
  form.description.forEach((row, i) => {
    if (!row.key) {
      errors.push({ field: `description.${i}.key`, message: "key is required" });
    } else if (seenKeys.has(row.key)) {
      errors.push({ field: `description.${i}.key`, message: `duplicate key "${row.key}"` });
    } else {
      seenKeys.add(row.key);
    }
  });

  if (form.mode === "create" && form.subjects.length === 0) {
    errors.push({ field: "subjects", message: "a create needs at least one subject" });
  }
  if (form.mode === "update" && form.subjects.length === 0 && form.description.length === 0) {
    errors.push({
      field: "subjects",
      message: "an update needs new scans or dataset description entries",
    });
  }
  return errors;
}
