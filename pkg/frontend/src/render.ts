/** Pure HTML-string renderers for reports and errors (kept DOM-free for tests). */

import type { DatasetReport, ErrorBody } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderReport(report: DatasetReport): string {
  const rows = report.classifications
    .map(
      (c) =>
        `<tr><td>${escapeHtml(c.series_name)}</td><td>${escapeHtml(c.modality)}</td>` +
        `<td>${escapeHtml(c.suffix)}</td><td><code>${escapeHtml(c.rule_id)}</code></td></tr>`,
    )
    .join("");
  const converterShare =
    report.timing.total_s > 0
      ? Math.round((100 * report.timing.converter_s) / report.timing.total_s)
      : 0;
  return `
<section class="report">
  <h2>Dataset ${escapeHtml(report.status)}</h2>
  <p>${escapeHtml(report.dataset_path)}</p>
  <p>${report.subjects} subject(s), ${report.sessions} session(s), ${report.series} series.</p>
  <table>
    <thead><tr><th>Series</th><th>Modality</th><th>Type</th><th>Rule</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>
  <p class="timing">Total ${report.timing.total_s.toFixed(2)}s,
    conversion ${report.timing.converter_s.toFixed(2)}s (${converterShare}%).</p>
</section>`;
}

export function renderError(status: number, error: ErrorBody): string {
  const parts: string[] = [
    `<section class="error">`,
    `<h2>Request failed (${status} ${escapeHtml(error.error_code)})</h2>`,
    `<p>${escapeHtml(error.message)}</p>`,
  ];
  if (error.failed_series && error.failed_series.length > 0) {
    const items = error.failed_series
      .map(
        (f) =>
          `<li><code class="series-name">${escapeHtml(f.series_name)}</code>: ` +
          `${escapeHtml(f.reason)}</li>`,
      )
      .join("");
    parts.push(`<ul class="failed-series">${items}</ul>`);
    parts.push(
      `<p class="hint">Add a scan-type entry whose tag matches each series above, then resubmit.</p>`,
    );
  }
  if (error.error_code === "Busy") {
    parts.push(
      `<p class="hint">Another operation is running against this dataset; retry in a moment.</p>`,
    );
  }
  parts.push(`</section>`);
  return parts.join("\n");
}

export function renderNetworkFailure(detail: string): string {
  return `
<section class="error">
  <h2>Could not reach the service</h2>
  <p>${escapeHtml(detail)}</p>
</section>`;
}
