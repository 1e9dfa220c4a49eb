// Per-candidate risk view: a table of served statistics with a range-plot or
// histogram presentation per candidate, plus a threshold slider that marks
// which candidates currently satisfy the controller's min/max-ratio
// preference. The first satisfying candidate in served (descending) order is
// the one the non-releasing algorithm would pick, so it gets the highlight.

import { el, fmt, svgEl } from "./format.js";
import type { AnalysisReport, ProfileRow } from "./types.js";

export type ViewMode = "range" | "histogram";

const BAR_WIDTH = 220;
const BAR_HEIGHT = 18;
const HIST_WIDTH = 160;
const HIST_HEIGHT = 36;

export function firstSatisfying(report: AnalysisReport, tau: number): number | null {
  for (const row of report.rows) {
    if (row.ratio >= tau) {
      return row.epsilon;
    }
  }
  return null;
}

function rangeBar(row: ProfileRow, lo: number, hi: number): SVGElement {
  const svg = svgEl("svg", {
    width: String(BAR_WIDTH),
    height: String(BAR_HEIGHT),
    class: "range-bar",
    "data-rdr-min": String(row.rdr_min),
    "data-rdr-max": String(row.rdr_max),
  });
  const span = hi - lo || 1;
  const x0 = ((row.rdr_min - lo) / span) * (BAR_WIDTH - 2) + 1;
  const x1 = ((row.rdr_max - lo) / span) * (BAR_WIDTH - 2) + 1;
  svg.appendChild(
    svgEl("rect", {
      x: String(x0),
      y: "5",
      width: String(Math.max(x1 - x0, 2)),
      height: String(BAR_HEIGHT - 10),
      class: "range-bar-fill",
    }),
  );
  for (const x of [x0, x1]) {
    svg.appendChild(
      svgEl("line", {
        x1: String(x),
        x2: String(x),
        y1: "2",
        y2: String(BAR_HEIGHT - 2),
        class: "range-bar-cap",
      }),
    );
  }
  return svg;
}

function histogramChart(buckets: number[]): SVGElement {
  const svg = svgEl("svg", {
    width: String(HIST_WIDTH),
    height: String(HIST_HEIGHT),
    class: "hist-chart",
  });
  const peak = Math.max(...buckets, 1);
  const barW = HIST_WIDTH / buckets.length;
  buckets.forEach((count, i) => {
    const h = (count / peak) * (HIST_HEIGHT - 2);
    svg.appendChild(
      svgEl("rect", {
        x: String(i * barW + 0.5),
        y: String(HIST_HEIGHT - h),
        width: String(barW - 1),
        height: String(h),
        class: "hist-bucket",
        "data-count": String(count),
      }),
    );
  });
  return svg;
}

export interface AnalysisView {
  element: HTMLElement;
  setMode(mode: ViewMode): void;
  setTau(tau: number): void;
  readonly tau: number;
  selectedEpsilon(): number | null;
}

export function renderAnalysis(
  report: AnalysisReport,
  initialTau = 0.9,
  initialMode: ViewMode = "range",
): AnalysisView {
  const root = el("section", { class: "analysis" });
  let mode: ViewMode = initialMode;
  let tau = initialTau;

  const head = el("header", { class: "analysis-head" });
  head.appendChild(el("h2", {}, "Candidate risk profiles"));
  head.appendChild(
    el(
      "p",
      { class: "analysis-meta" },
      `mechanism ${report.mechanism.family} (delta ${report.mechanism.delta}) · ` +
        `sensitivity ${fmt(report.sensitivity)} · consumed budget ${report.eps_c}`,
    ),
  );
  root.appendChild(head);

  const pis = report.pis_summary;
  const pisBlock = el("div", { class: "pis-summary" });
  pisBlock.appendChild(
    el(
      "p",
      {},
      `Per-instance sensitivity over ${pis.rows} individuals ` +
        `(${pis.unique_records} unique records): ` +
        `min ${fmt(pis.pis_min)}, max ${fmt(pis.pis_max)}, mean ${fmt(pis.pis_mean)}`,
    ),
  );
  pisBlock.appendChild(histogramChart(pis.histogram));
  root.appendChild(pisBlock);

  if (report.no_candidates || report.rows.length === 0) {
    root.appendChild(
      el(
        "div",
        { class: "banner banner-exhausted", "data-testid": "budget-exhausted" },
        `Budget exhausted: no candidates above the consumed budget (${report.eps_c}).`,
      ),
    );
    return {
      element: root,
      setMode: () => undefined,
      setTau: () => undefined,
      get tau() {
        return tau;
      },
      selectedEpsilon: () => null,
    };
  }

  const controls = el("div", { class: "analysis-controls" });
  const rangeBtn = el("button", { type: "button", "data-mode": "range" }, "Range view");
  const histBtn = el("button", { type: "button", "data-mode": "histogram" }, "Histograms");
  controls.appendChild(rangeBtn);
  controls.appendChild(histBtn);

  const slider = el("input", {
    type: "range",
    min: "0",
    max: "1",
    step: "0.01",
    value: String(tau),
    class: "tau-slider",
    "data-testid": "tau-slider",
  }) as HTMLInputElement;
  const sliderLabel = el("span", { class: "tau-value", "data-testid": "tau-value" });
  controls.appendChild(el("label", {}, "min/max ratio threshold "));
  controls.appendChild(slider);
  controls.appendChild(sliderLabel);
  root.appendChild(controls);

  const table = el("table", { class: "candidates" });
  const thead = el("thead");
  const headRow = el("tr");
  for (const title of ["epsilon", "rdr_min", "rdr_max", "ratio", "norm variance", "risks", "preference"]) {
    headRow.appendChild(el("th", {}, title));
  }
  thead.appendChild(headRow);
  table.appendChild(thead);

  const tbody = el("tbody");
  const globalLo = Math.min(...report.rows.map((r) => r.rdr_min));
  const globalHi = Math.max(...report.rows.map((r) => r.rdr_max));
  const rowEls: { row: ProfileRow; tr: HTMLTableRowElement; badge: HTMLElement; viz: HTMLElement }[] =
    [];
  for (const row of report.rows) {
    const tr = el("tr", { "data-epsilon": String(row.epsilon) });
    tr.appendChild(el("td", { "data-testid": "cell-epsilon" }, fmt(row.epsilon)));
    tr.appendChild(el("td", { "data-testid": "cell-rdr-min" }, fmt(row.rdr_min)));
    tr.appendChild(el("td", { "data-testid": "cell-rdr-max" }, fmt(row.rdr_max)));
    tr.appendChild(el("td", { "data-testid": "cell-ratio" }, fmt(row.ratio)));
    tr.appendChild(el("td", { "data-testid": "cell-variance" }, fmt(row.norm_variance)));
    const viz = el("td", { class: "viz" });
    tr.appendChild(viz);
    const badge = el("td", { class: "badge" });
    tr.appendChild(badge);
    tbody.appendChild(tr);
    rowEls.push({ row, tr, badge, viz });
  }
  table.appendChild(tbody);
  root.appendChild(table);

  function redrawViz() {
    for (const { row, viz } of rowEls) {
      viz.replaceChildren(
        mode === "range" ? rangeBar(row, globalLo, globalHi) : histogramChart(row.histogram),
      );
    }
    rangeBtn.classList.toggle("active", mode === "range");
    histBtn.classList.toggle("active", mode === "histogram");
  }

  function redrawSatisfaction() {
    sliderLabel.textContent = fmt(tau);
    const chosen = firstSatisfying(report, tau);
    for (const { row, tr, badge } of rowEls) {
      const satisfied = row.ratio >= tau;
      badge.textContent = satisfied ? "satisfied" : "unsatisfied";
      badge.classList.toggle("satisfied", satisfied);
      badge.classList.toggle("unsatisfied", !satisfied);
      tr.classList.toggle("selected", chosen !== null && row.epsilon === chosen);
    }
  }

  rangeBtn.addEventListener("click", () => {
    mode = "range";
    redrawViz();
  });
  histBtn.addEventListener("click", () => {
    mode = "histogram";
    redrawViz();
  });
  slider.addEventListener("input", () => {
    tau = Number(slider.value);
    redrawSatisfaction();
  });

  redrawViz();
  redrawSatisfaction();

  return {
    element: root,
    setMode(next: ViewMode) {
      mode = next;
      redrawViz();
    },
    setTau(next: number) {
      tau = next;
      slider.value = String(next);
      redrawSatisfaction();
    },
    get tau() {
      return tau;
    },
    selectedEpsilon() {
      return firstSatisfying(report, tau);
    },
  };
}
