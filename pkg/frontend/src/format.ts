/**
 * Shared number formatting.  Charts and tables must all route through these
 * so a value shown twice never disagrees with itself, and so tests can check
 * rendered text against the raw payload value at the same precision.
 */

/** Probabilities are shown at four decimals everywhere. */
export function fmtProb(p: number): string {
  return p.toFixed(4);
}

/** "value ± mcse", both at probability precision. */
export function fmtPm(p: number, mcse: number): string {
  return `${fmtProb(p)} ± ${fmtProb(mcse)}`;
}

/** Doses print like %g: no trailing zeros, 6 significant digits. */
export function fmtDose(d: number): string {
  return String(Number(d.toPrecision(6)));
}

/** Summary statistics at four significant digits. */
export function fmtStat(v: number): string {
  if (!Number.isFinite(v)) return String(v);
  return String(Number(v.toPrecision(4)));
}

/** Leading slice of a ledger fingerprint, enough to eyeball identity. */
export function shortHash(h: string | null | undefined): string {
  return h ? h.slice(0, 12) : "—";
}
