/**
 * Compose attribute-form state into the service's query syntax:
 * `key=value` clauses joined by AND, `text~"..."` for substring match.
 * Every emitted string must parse on the server side, so values are
 * quoted whenever they contain whitespace or grammar characters.
 */

export interface AttributeFormState {
  plate: string;
  bg: string;
  fg?: string;
  border?: string;
  printed?: string[];
  icons?: string[];
  text?: string;
  textContains?: boolean;
}

export function mandatoryComplete(form: AttributeFormState): boolean {
  return form.plate.trim() !== "" && form.bg.trim() !== "";
}

function renderValue(value: string): string {
  const cleaned = value.replace(/"/g, "").trim();
  if (
    cleaned === "" ||
    /\s/.test(cleaned) ||
    /[=~]/.test(cleaned) ||
    cleaned.toLowerCase() === "and"
  ) {
    return `"${cleaned}"`;
  }
  return cleaned;
}

export function composeQuery(form: AttributeFormState): string {
  if (!mandatoryComplete(form)) {
    throw new Error("plate shape and background color are mandatory");
  }
  const clauses: string[] = [
    `plate=${renderValue(form.plate)}`,
    `bg=${renderValue(form.bg)}`,
  ];
  if (form.fg) clauses.push(`fg=${renderValue(form.fg)}`);
  if (form.border) clauses.push(`border=${renderValue(form.border)}`);
  for (const shape of form.printed ?? []) {
    clauses.push(`printed=${renderValue(shape)}`);
  }
  for (const icon of form.icons ?? []) {
    clauses.push(`icon=${renderValue(icon)}`);
  }
  const text = form.text?.replace(/"/g, "").trim();
  if (text) {
    clauses.push(form.textContains ? `text~"${text}"` : `text=${renderValue(text)}`);
  }
  return clauses.join(" AND ");
}
