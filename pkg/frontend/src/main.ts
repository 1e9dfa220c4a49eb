// Console entry point. The only client-side state is the controller token in
// sessionStorage; everything rendered comes from fresh service responses, so
// a refresh always reconstructs the same view.

import { ConsoleApi } from "./api.js";
import { renderAnalysis } from "./analysis.js";
import { renderDecidePanel } from "./decide.js";
import { el } from "./format.js";
import { renderOdometerPanel } from "./odometer.js";

const ODOMETER_POLL_MS = 5000;

function boot() {
  const app = document.getElementById("app");
  if (!app) {
    return;
  }

  const token = sessionStorage.getItem("riskscope-controller-token") ?? "";
  const form = el("form", { class: "connect" });
  const tokenInput = el("input", {
    type: "password",
    placeholder: "controller token",
    value: token,
  }) as HTMLInputElement;
  const ticketInput = el("input", { type: "text", placeholder: "ticket id (t-1)" }) as HTMLInputElement;
  const datasetInput = el("input", { type: "text", placeholder: "dataset id (ds-1)" }) as HTMLInputElement;
  const loadBtn = el("button", { type: "submit" }, "Load analysis");
  form.append(tokenInput, datasetInput, ticketInput, loadBtn);

  const analysisSlot = el("div", { id: "analysis-slot" });
  const decideSlot = el("div", { id: "decide-slot" });
  const odometerSlot = el("div", { id: "odometer-slot" });
  app.append(form, analysisSlot, decideSlot, odometerSlot);

  let pollTimer: number | undefined;

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    sessionStorage.setItem("riskscope-controller-token", tokenInput.value);
    const api = new ConsoleApi("", tokenInput.value);
    const ticketId = ticketInput.value.trim();
    const datasetId = datasetInput.value.trim();
    try {
      const report = await api.analysis(ticketId);
      analysisSlot.replaceChildren(renderAnalysis(report).element);
      decideSlot.replaceChildren(
        renderDecidePanel(api, ticketId, datasetId).element,
      );
      const refreshOdometer = async () => {
        odometerSlot.replaceChildren(renderOdometerPanel(await api.odometer(datasetId)));
      };
      await refreshOdometer();
      if (pollTimer !== undefined) {
        window.clearInterval(pollTimer);
      }
      pollTimer = window.setInterval(() => void refreshOdometer(), ODOMETER_POLL_MS);
    } catch (err) {
      analysisSlot.replaceChildren(
        el("div", { class: "banner banner-error" }, String(err)),
      );
    }
  });
}

boot();
