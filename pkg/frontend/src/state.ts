/** Session state and the submit-enabled invariant. */

import type { Box, CandidateEntry } from "./types.js";
import type { AttributeFormState } from "./queryBuilder.js";
import { mandatoryComplete } from "./queryBuilder.js";

export interface UiSessionState {
  sessionId: string | null;
  bbox: Box | null;
  form: AttributeFormState;
  candidates: CandidateEntry[];
  source: string | null;
  kgSize: number | null;
  warning: string | null;
  selection: string | null;
  missingSign: boolean;
  defaultTemplateId: string | null;
  idempotencyKey: string | null;
}

export function initialState(): UiSessionState {
  return {
    sessionId: null,
    bbox: null,
    form: { plate: "", bg: "" },
    candidates: [],
    source: null,
    kgSize: null,
    warning: null,
    selection: null,
    missingSign: false,
    defaultTemplateId: null,
    idempotencyKey: null,
  };
}

/**
 * Submit is possible only with a drawn box, both mandatory attributes,
 * and either a selected candidate or the missing-sign flag with a chosen
 * default template.
 */
export function submitEnabled(state: UiSessionState): boolean {
  if (state.bbox === null) return false;
  if (!mandatoryComplete(state.form)) return false;
  if (state.missingSign) return state.defaultTemplateId !== null;
  return state.selection !== null;
}

/** The sign id a submission would record. */
export function submissionSignId(state: UiSessionState): string | null {
  return state.missingSign ? state.defaultTemplateId : state.selection;
}

let keyCounter = 0;

/** One key per logical submission attempt; double clicks reuse it. */
export function newIdempotencyKey(): string {
  keyCounter += 1;
  return `submit-${Date.now().toString(36)}-${keyCounter}-${Math.random()
    .toString(36)
    .slice(2, 8)}`;
}
