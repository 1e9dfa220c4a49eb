// Odometer panel: totals verbatim from the service plus a consumed-budget
// trajectory drawn from the journal entries (chart geometry only; the
// authoritative totals are the served strings).

import { el, svgEl } from "./format.js";
import type { OdometerInfo } from "./types.js";

const CHART_WIDTH = 320;
const CHART_HEIGHT = 120;

export function renderOdometerPanel(info: OdometerInfo): HTMLElement {
  const root = el("section", { class: "odometer", "data-dataset": info.dataset_id });
  root.appendChild(el("h2", {}, "Privacy odometer"));

  const totals = el("dl", { class: "odometer-totals" });
  const pairs: [string, string][] = [
    ["consumed budget", info.eps_c],
    ["delta sum", info.delta_sum],
    ["delta budget", info.delta_g ?? "unset"],
    ["loss bound", info.comp_bound],
  ];
  for (const [label, value] of pairs) {
    totals.appendChild(el("dt", {}, label));
    totals.appendChild(
      el("dd", { "data-testid": `odo-${label.replace(/ /g, "-")}` }, value),
    );
  }
  root.appendChild(totals);

  if (info.comp_bound === "infinity") {
    root.appendChild(
      el(
        "div",
        { class: "banner banner-warning" },
        "Loss bound is infinite: the delta budget no longer covers the sum of deltas.",
      ),
    );
  }

  const svg = svgEl("svg", {
    width: String(CHART_WIDTH),
    height: String(CHART_HEIGHT),
    class: "odometer-chart",
    "data-eps-c": info.eps_c,
  });
  const running: number[] = [0];
  let acc = 0;
  for (const entry of info.entries) {
    acc += Number(entry.eps);
    running.push(acc);
  }
  const peak = Math.max(acc, 1e-9);
  const stepX = running.length > 1 ? (CHART_WIDTH - 20) / (running.length - 1) : 0;
  const points = running
    .map((value, i) => {
      const x = 10 + i * stepX;
      const y = CHART_HEIGHT - 10 - (value / peak) * (CHART_HEIGHT - 20);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
  svg.appendChild(
    svgEl("polyline", { points, class: "odometer-line", "data-points": String(running.length) }),
  );
  root.appendChild(svg);

  const list = el("ol", { class: "odometer-entries" });
  for (const entry of info.entries) {
    list.appendChild(
      el(
        "li",
        { "data-query": entry.query_id },
        `${entry.query_id}: +${entry.eps} (delta ${entry.delta}, ${entry.alg})`,
      ),
    );
  }
  root.appendChild(list);
  return root;
}
