/** The only network access: POSTing the request document to the service. */

import type { Mode, RequestDocument, SubmitResult } from "./types.js";

export const ENDPOINTS: Record<Mode, string> = {
  create: "/createBids",
  update: "/updateBids",
};

/**
 * The service base URL is fixed at deploy time via
 * `<meta name="service-base-url" content="...">`; empty means same origin.
 */
export function serviceBaseUrl(doc: Document = window.document): string {
  const meta = doc.querySelector('meta[name="service-base-url"]');
  return meta?.getAttribute("content")?.replace(/\/$/, "") ?? "";
}

export async function submitRequest(
  mode: Mode,
  document: RequestDocument,
  baseUrl = "",
): Promise<SubmitResult> {
  const response = await fetch(baseUrl + ENDPOINTS[mode], {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(document),
  });
  const body = await response.json();
  if (response.status === 200 || response.status === 201) {
    return { kind: "report", status: response.status, report: body };
  }
  return { kind: "error", status: response.status, error: body };
}
