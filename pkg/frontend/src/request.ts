/** Builds the service request document from a validated form. */

import { normalizeLabel, type FormState } from "./model.js";
import type { RequestDocument } from "./types.js";

/**
 * Serialize the form into the wire document. Field names and nesting are
 * exactly what the service parses; keys with default values are omitted.
 * Call only on a form that passed validateForm.
 */
export function buildRequest(form: FormState): RequestDocument {
  const scans: Record<string, Record<string, string>> = {};
  for (const row of form.subjects) {
    const subject = normalizeLabel(row.subject);
    if (subject === null) {
      throw new Error(`invalid subject label: ${row.subject}`);
    }
    const sessions: Record<string, string> = {};
    for (const sessionRow of row.sessions) {
      const session = normalizeLabel(sessionRow.session);
      if (session === null) {
        throw new Error(`invalid session label: ${sessionRow.session}`);
      }
      sessions[session] = sessionRow.path;
    }
    scans[subject] = sessions;
  }

  const document: RequestDocument = { scans, output: form.output };

  const metadata: NonNullable<RequestDocument["metadata"]> = {};
  if (form.overrides.length > 0) {
    metadata.modalities = form.overrides.map((row) => ({
      tag: row.tag,
      modality: row.modality,
      type: row.type,
    }));
  }
  if (form.description.length > 0) {
    const description: Record<string, string> = {};
    for (const row of form.description) {
      description[row.key] = row.value;
    }
    metadata.datasetDescription = description;
  }
  if (metadata.modalities || metadata.datasetDescription) {
    document.metadata = metadata;
  }
  if (form.overwrite) {
    document.overwrite = true;
  }
  return document;
}
