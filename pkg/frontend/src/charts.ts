/**
 * Hand-rolled SVG charts.  No chart library: the shapes we need are a grouped
 * bar chart with error whiskers, overlaid density curves on a log-dose axis,
 * and small scatter panels.  Every mark carries the payload value it encodes
 * in a data attribute so tests can read back exactly what was drawn.
 */

import type { ForecastOut } from "./api.js";
import { svg } from "./dom.js";
import { fmtDose, fmtProb, fmtStat } from "./format.js";

export const DLT_GUIDE = 0.16; // acceptable-toxicity line used by the protocol

export interface BarChartOptions {
  /** P(grade 5) above this gets the alert emphasis. */
  threshold: number;
  stale?: boolean;
}

const BAR_W = 30;
const BAR_GAP = 10;
const GROUP_GAP = 46;
const PLOT_H = 190;
const TOP = 34;
const LEFT = 46;

function groupWidth(): number {
  return 6 * BAR_W + 5 * BAR_GAP;
}

export function candidateTitle(fc: { dose: number; okdose: number }): string {
  const head = `dose ${fmtDose(fc.dose)}`;
  return fc.okdose > 0 ? `${head} after no toxicity at ${fmtDose(fc.okdose)}` : head;
}

/**
 * One group of six grade bars per candidate dose.  Bar height encodes the
 * service probability untouched; whiskers span one mcse either side.
 */
export function gradeBarChart(candidates: ForecastOut[], opts: BarChartOptions): SVGSVGElement {
  const gw = groupWidth();
  const width = LEFT + candidates.length * gw + (candidates.length - 1) * GROUP_GAP + 16;
  const height = TOP + PLOT_H + 40;
  const y = (p: number) => TOP + PLOT_H * (1 - p);

  const chart = svg("svg", {
    viewBox: `0 0 ${width} ${height}`,
    width,
    height,
    class: "bar-chart" + (opts.stale ? " stale" : ""),
    role: "img",
  });

  for (const tick of [0, 0.25, 0.5, 0.75, 1]) {
    chart.append(
      svg("line", {
        x1: LEFT - 4,
        x2: width - 12,
        y1: y(tick),
        y2: y(tick),
        class: tick === 0 ? "axis" : "gridline",
      }),
      svg("text", { x: LEFT - 8, y: y(tick) + 3, class: "tick-label", "text-anchor": "end" }, String(tick)),
    );
  }

  // protocol guide: the 16% line the escalation rule is judged against
  chart.append(
    svg("line", {
      x1: LEFT - 4,
      x2: width - 12,
      y1: y(DLT_GUIDE),
      y2: y(DLT_GUIDE),
      class: "guide",
      "data-guide": String(DLT_GUIDE),
    }),
    svg("text", { x: width - 10, y: y(DLT_GUIDE) + 3, class: "guide-label" }, "16%"),
  );

  candidates.forEach((fc, ci) => {
    const gx = LEFT + ci * (gw + GROUP_GAP);
    const group = svg("g", {
      class: "candidate",
      "data-dose": String(fc.dose),
      "data-okdose": String(fc.okdose),
    });

    group.append(
      svg("text", { x: gx + gw / 2, y: TOP - 18, class: "group-title", "text-anchor": "middle" }, candidateTitle(fc)),
    );

    fc.probabilities.forEach((p, grade) => {
      const bx = gx + grade * (BAR_W + BAR_GAP);
      const cx = bx + BAR_W / 2;
      const m = fc.mcse[grade] ?? 0;
      const alert = grade === 5 && p > opts.threshold;
      group.append(
        svg("rect", {
          x: bx,
          y: y(p),
          width: BAR_W,
          height: PLOT_H * p,
          class: "bar" + (grade === 5 ? " grade5" : "") + (alert ? " alert" : ""),
          "data-grade": String(grade),
          "data-p": String(p),
        }),
      );
      if (m > 0) {
        const hi = Math.min(1, p + m);
        const lo = Math.max(0, p - m);
        group.append(
          svg("line", { x1: cx, x2: cx, y1: y(hi), y2: y(lo), class: "whisker", "data-mcse": String(m) }),
          svg("line", { x1: cx - 5, x2: cx + 5, y1: y(hi), y2: y(hi), class: "whisker" }),
          svg("line", { x1: cx - 5, x2: cx + 5, y1: y(lo), y2: y(lo), class: "whisker" }),
        );
      }
      group.append(
        svg(
          "text",
          {
            x: cx,
            y: y(Math.min(1, p + m)) - 5,
            class: "bar-label" + (alert ? " alert" : ""),
            "text-anchor": "middle",
            "data-grade": String(grade),
          },
          fmtProb(p),
        ),
        svg("text", { x: cx, y: TOP + PLOT_H + 14, class: "tick-label", "text-anchor": "middle" }, String(grade)),
      );
    });

    group.append(
      svg("text", { x: gx + gw / 2, y: TOP + PLOT_H + 30, class: "axis-label", "text-anchor": "middle" }, "toxicity grade"),
    );
    chart.append(group);
  });

  return chart;
}

export interface Curve {
  label: string;
  logDose: number[];
  density: number[];
}

export interface DensityChartOptions {
  /** Vertical reference lines, in dose units. */
  guides?: { dose: number; label?: string }[];
  width?: number;
  height?: number;
  stale?: boolean;
}

/** Posterior density curves over log dose, with optional dose guides. */
export function densityChart(curves: Curve[], opts: DensityChartOptions = {}): SVGSVGElement {
  const width = opts.width ?? 680;
  const height = opts.height ?? 280;
  const left = 16;
  const right = 14;
  const top = 16;
  const bottom = 40;
  const plotW = width - left - right;
  const plotH = height - top - bottom;

  const guides = opts.guides ?? [];
  const xs = curves.flatMap((c) => c.logDose).concat(guides.map((g) => Math.log(g.dose)));
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMax = Math.max(...curves.flatMap((c) => c.density), 1e-12) * 1.06;
  const x = (v: number) => left + ((v - xMin) / (xMax - xMin || 1)) * plotW;
  const y = (v: number) => top + plotH * (1 - v / yMax);

  const chart = svg("svg", {
    viewBox: `0 0 ${width} ${height}`,
    width,
    height,
    class: "density-chart" + (opts.stale ? " stale" : ""),
    role: "img",
  });

  chart.append(svg("line", { x1: left, x2: width - right, y1: top + plotH, y2: top + plotH, class: "axis" }));

  // decade-ish dose ticks: 1, 3, 10, 30, ... that land inside the domain
  for (let exp = -4; exp <= 5; exp++) {
    for (const mult of [1, 3]) {
      const dose = mult * 10 ** exp;
      const lx = Math.log(dose);
      if (lx < xMin - 1e-9 || lx > xMax + 1e-9) continue;
      chart.append(
        svg("line", { x1: x(lx), x2: x(lx), y1: top + plotH, y2: top + plotH + 4, class: "axis" }),
        svg("text", { x: x(lx), y: top + plotH + 16, class: "tick-label", "text-anchor": "middle" }, fmtDose(dose)),
      );
    }
  }
  chart.append(
    svg("text", { x: left + plotW / 2, y: height - 6, class: "axis-label", "text-anchor": "middle" }, "dose (log scale)"),
  );

  for (const guide of guides) {
    const lx = x(Math.log(guide.dose));
    chart.append(
      svg("line", {
        x1: lx,
        x2: lx,
        y1: top,
        y2: top + plotH,
        class: "dose-guide",
        "data-dose": String(guide.dose),
      }),
      svg("text", { x: lx + 3, y: top + 9, class: "guide-label" }, guide.label ?? fmtDose(guide.dose)),
    );
  }

  curves.forEach((curve, i) => {
    const d = curve.logDose
      .map((lx, k) => `${k === 0 ? "M" : "L"}${x(lx).toFixed(2)} ${y(curve.density[k]).toFixed(2)}`)
      .join(" ");
    chart.append(svg("path", { d, class: `series s${i % 8}`, fill: "none", "data-label": curve.label }));
    chart.append(
      svg("rect", { x: width - right - 150, y: top + 14 * i, width: 10, height: 3, class: `swatch s${i % 8}` }),
      svg("text", { x: width - right - 136, y: top + 14 * i + 4, class: "legend-label" }, curve.label),
    );
  });

  return chart;
}

/** Minimal scatter panel for joint posterior clouds. */
export function scatterChart(
  xs: number[],
  ys: number[],
  labels: { x: string; y: string },
  size = 220,
): SVGSVGElement {
  const left = 34;
  const bottom = 30;
  const pad = 8;
  const plot = size - pad;
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const x = (v: number) => left + ((v - xMin) / (xMax - xMin || 1)) * (plot - left);
  const y = (v: number) => pad + (1 - (v - yMin) / (yMax - yMin || 1)) * (plot - pad - bottom);

  const chart = svg("svg", {
    viewBox: `0 0 ${size} ${size}`,
    width: size,
    height: size,
    class: "scatter-chart",
    role: "img",
    "data-n": String(xs.length),
  });
  chart.append(
    svg("line", { x1: left, x2: plot, y1: plot - bottom, y2: plot - bottom, class: "axis" }),
    svg("line", { x1: left, x2: left, y1: pad, y2: plot - bottom, class: "axis" }),
    svg("text", { x: (left + plot) / 2, y: size - 4, class: "axis-label", "text-anchor": "middle" }, labels.x),
    svg(
      "text",
      { x: 10, y: (pad + plot - bottom) / 2, class: "axis-label", transform: `rotate(-90 10 ${(pad + plot - bottom) / 2})`, "text-anchor": "middle" },
      labels.y,
    ),
    svg("text", { x: left, y: plot - bottom + 12, class: "tick-label" }, fmtStat(xMin)),
    svg("text", { x: plot, y: plot - bottom + 12, class: "tick-label", "text-anchor": "end" }, fmtStat(xMax)),
    svg("text", { x: left - 4, y: plot - bottom, class: "tick-label", "text-anchor": "end" }, fmtStat(yMin)),
    svg("text", { x: left - 4, y: pad + 8, class: "tick-label", "text-anchor": "end" }, fmtStat(yMax)),
  );
  for (let i = 0; i < xs.length; i++) {
    chart.append(svg("circle", { cx: x(xs[i]).toFixed(1), cy: y(ys[i]).toFixed(1), r: 1.8, class: "pt" }));
  }
  return chart;
}
