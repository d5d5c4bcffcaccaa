/** DOM wiring for the single-page create/update form. */

import { serviceBaseUrl, submitRequest } from "./api.js";
import {
  MODALITIES,
  TYPES,
  emptyForm,
  validateForm,
  type FieldError,
  type FormState,
} from "./model.js";
import { buildRequest } from "./request.js";
import { escapeHtml, renderError, renderNetworkFailure, renderReport } from "./render.js";

const form: FormState = emptyForm();

function option(value: string, selected: string): string {
  const mark = value === selected ? " selected" : "";
  return `<option value="${value}"${mark}>${value}</option>`;
}

function rowsHtml(state: FormState): string {
  const subjects = state.subjects
    .map((row, i) => {
      const sessions = row.sessions
        .map(
          (s, j) => `
      <div class="row session-row">
        <label>Session <input data-field="subjects.${i}.sessions.${j}.session"
          value="${escapeHtml(s.session)}" placeholder="01"></label>
        <label>DICOM directory <input data-field="subjects.${i}.sessions.${j}.path"
          value="${escapeHtml(s.path)}" placeholder="/data/sub01/ses01" size="40"></label>
        <button type="button" data-action="remove-session" data-subject="${i}" data-session="${j}">remove</button>
      </div>`,
        )
        .join("");
      return `
    <fieldset class="subject" data-subject="${i}">
      <legend>Subject</legend>
      <label>Label <input data-field="subjects.${i}.subject"
        value="${escapeHtml(row.subject)}" placeholder="01"></label>
      ${sessions}
      <button type="button" data-action="add-session" data-subject="${i}">add session</button>
      <button type="button" data-action="remove-subject" data-subject="${i}">remove subject</button>
    </fieldset>`;
    })
    .join("");

  const overrides = state.overrides
    .map(
      (row, i) => `
    <div class="row override-row">
      <label>Tag <input data-field="overrides.${i}.tag" value="${escapeHtml(row.tag)}"
        placeholder="scan01"></label>
      <label>Modality <select data-field="overrides.${i}.modality">
        ${MODALITIES.map((m) => option(m, row.modality)).join("")}</select></label>
      <label>Type <select data-field="overrides.${i}.type">
        ${TYPES.map((t) => option(t, row.type)).join("")}</select></label>
      <button type="button" data-action="remove-override" data-index="${i}">remove</button>
    </div>`,
    )
    .join("");

  const description = state.description
    .map(
      (row, i) => `
    <div class="row description-row">
      <label>Key <input data-field="description.${i}.key" value="${escapeHtml(row.key)}"></label>
      <label>Value <input data-field="description.${i}.value" value="${escapeHtml(row.value)}"></label>
      <button type="button" data-action="remove-description" data-index="${i}">remove</button>
    </div>`,
    )
    .join("");

  return `
  <div class="row">
    <label>Mode <select data-field="mode">
      ${option("create", state.mode)}${option("update", state.mode)}</select></label>
    <label class="overwrite"><input type="checkbox" data-field="overwrite"
      ${state.overwrite ? "checked" : ""}> overwrite existing sessions (update)</label>
  </div>
  <h2>Scans</h2>
  ${subjects}
  <button type="button" data-action="add-subject">add subject</button>
  <h2>Output</h2>
  <div class="row"><label>Dataset path <input data-field="output"
    value="${escapeHtml(state.output)}" placeholder="/data/bids/study01" size="40"></label></div>
  <h2>Scan types (optional)</h2>
  ${overrides}
  <button type="button" data-action="add-override">add scan type</button>
  <h2>Dataset description (optional)</h2>
  ${description}
  <button type="button" data-action="add-description">add entry</button>
  <div class="row submit-row">
    <button type="submit" id="submit">Submit</button>
    <span id="status"></span>
  </div>
  <ul id="validation"></ul>`;
}

function setByPath(path: string, value: string | boolean): void {
  const parts = path.split(".");
  let target: any = form;
  for (const part of parts.slice(0, -1)) {
    target = target[part];
  }
  target[parts[parts.length - 1]] = value;
}

function refreshValidation(): FieldError[] {
  const errors = validateForm(form);
  const list = document.getElementById("validation")!;
  list.innerHTML = errors
    .map((e) => `<li data-for="${escapeHtml(e.field)}">${escapeHtml(e.message)}</li>`)
    .join("");
  const submit = document.getElementById("submit") as HTMLButtonElement;
  submit.disabled = errors.length > 0 || form.status === "pending";
  return errors;
}

function rerender(): void {
  const root = document.getElementById("form-root")!;
  root.innerHTML = rowsHtml(form);
  refreshValidation();
}

function handleAction(action: string, dataset: DOMStringMap): void {
  const subject = Number(dataset.subject ?? -1);
  const index = Number(dataset.index ?? -1);
  switch (action) {
    case "add-subject":
      form.subjects.push({ subject: "", sessions: [{ session: "", path: "" }] });
      break;
    case "remove-subject":
      form.subjects.splice(subject, 1);
      break;
    case "add-session":
      form.subjects[subject].sessions.push({ session: "", path: "" });
      break;
    case "remove-session":
      form.subjects[subject].sessions.splice(Number(dataset.session), 1);
      break;
    case "add-override":
      form.overrides.push({ tag: "", modality: "anat", type: "T1w" });
      break;
    case "remove-override":
      form.overrides.splice(index, 1);
      break;
    case "add-description":
      form.description.push({ key: "", value: "" });
      break;
    case "remove-description":
      form.description.splice(index, 1);
      break;
  }
  rerender();
}

async function handleSubmit(): Promise<void> {
  if (refreshValidation().length > 0 || form.status === "pending") {
    return;
  }
  form.status = "pending";
  const statusEl = document.getElementById("status")!;
  const resultEl = document.getElementById("result")!;
  statusEl.textContent = "submitting…";
  (document.getElementById("submit") as HTMLButtonElement).disabled = true;
  try {
    const result = await submitRequest(form.mode, buildRequest(form), serviceBaseUrl());
    if (result.kind === "report") {
      form.status = "succeeded";
      form.lastReport = result.report;
      resultEl.innerHTML = renderReport(result.report);
    } else {
      form.status = "failed";
      form.lastError = { status: result.status, body: result.error };
      // The form stays populated so the user can add overrides and resubmit.
      resultEl.innerHTML = renderError(result.status, result.error);
    }
  } catch (err) {
    form.status = "failed";
    resultEl.innerHTML = renderNetworkFailure(String(err));
  } finally {
    statusEl.textContent = "";
    refreshValidation();
  }
}

export function mount(): void {
  const root = document.getElementById("form-root")!;
  rerender();
  root.addEventListener("input", (event) => {
    const target = event.target as HTMLElement;
    const field = target.dataset.field;
    if (!field) {
      return;
    }
    if (target instanceof HTMLInputElement && target.type === "checkbox") {
      setByPath(field, target.checked);
    } else if (target instanceof HTMLInputElement || target instanceof HTMLSelectElement) {
      setByPath(field, target.value);
    }
    refreshValidation();
  });
  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const action = target.dataset.action;
    if (action) {
      event.preventDefault();
      handleAction(action, target.dataset);
    }
  });
  document.getElementById("request-form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    void handleSubmit();
  });
}

if (typeof document !== "undefined" && document.getElementById("form-root")) {
  mount();
}
