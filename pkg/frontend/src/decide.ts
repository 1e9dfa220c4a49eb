// Decision panel: the controller picks an algorithm and thresholds, posts the
// answer request, and sees the decision plus the refreshed odometer.

import type { ConsoleApi } from "./api.js";
import { el, fmt } from "./format.js";
import { renderOdometerPanel } from "./odometer.js";
import type { AnswerRequest, AnswerResponse } from "./types.js";

export interface DecidePanel {
  element: HTMLElement;
  submit(): Promise<AnswerResponse>;
  readRequest(): AnswerRequest;
}

export function renderDecidePanel(
  api: ConsoleApi,
  ticketId: string,
  datasetId: string,
  onDecided?: (resp: AnswerResponse) => void,
): DecidePanel {
  const root = el("section", { class: "decide" });
  root.appendChild(el("h2", {}, `Decide ticket ${ticketId}`));

  const form = el("form", { class: "decide-form" });
  const algorithm = el("select", { name: "algorithm" }) as HTMLSelectElement;
  algorithm.appendChild(el("option", { value: "rdr" }, "keep epsilon private"));
  algorithm.appendChild(el("option", { value: "svt" }, "release epsilon (above-threshold)"));
  const tauP = el("input", { name: "tau_p", type: "number", step: "0.01", value: "0.9" }) as HTMLInputElement;
  const epsSvt = el("input", { name: "eps_svt", type: "number", step: "0.1", value: "1.0" }) as HTMLInputElement;
  const tauVar = el("input", { name: "tau_var", type: "number", step: "any", value: "1e-5" }) as HTMLInputElement;
  const seed = el("input", { name: "seed", type: "number", value: "0" }) as HTMLInputElement;

  const ratioRow = el("label", {}, "ratio threshold ");
  ratioRow.appendChild(tauP);
  const svtRow = el("label", { class: "hidden" }, "svt budget / variance threshold ");
  svtRow.appendChild(epsSvt);
  svtRow.appendChild(tauVar);
  const seedRow = el("label", {}, "seed ");
  seedRow.appendChild(seed);

  algorithm.addEventListener("change", () => {
    const svt = algorithm.value === "svt";
    ratioRow.classList.toggle("hidden", svt);
    svtRow.classList.toggle("hidden", !svt);
  });

  const submitBtn = el("button", { type: "submit" }, "Decide");
  form.append(el("label", {}, "algorithm "), algorithm, ratioRow, svtRow, seedRow, submitBtn);
  root.appendChild(form);

  const outcome = el("div", { class: "decide-outcome", "data-testid": "decide-outcome" });
  root.appendChild(outcome);
  const odoSlot = el("div", { class: "decide-odometer" });
  root.appendChild(odoSlot);

  function readRequest(): AnswerRequest {
    const base = { seed: Number(seed.value) };
    if (algorithm.value === "svt") {
      return {
        ...base,
        algorithm: "svt",
        eps_svt: Number(epsSvt.value),
        tau_var: Number(tauVar.value),
      };
    }
    return {
      ...base,
      algorithm: "rdr",
      preference: { type: "min_max_ratio", tau_p: Number(tauP.value) },
    };
  }

  async function submit(): Promise<AnswerResponse> {
    const resp = await api.answer(ticketId, readRequest());
    const d = resp.decision;
    outcome.replaceChildren(
      el("p", { class: `decision decision-${d.status}` },
        d.status === "answered"
          ? `Answered at epsilon ${d.chosen_epsilon === null ? "?" : fmt(d.chosen_epsilon)}` +
            `${d.epsilon_released ? " (released to analyst)" : " (kept private)"}; ` +
            `charged ${d.charged_eps}; consumed budget now ${d.eps_c_after}`
          : `Rejected: ${d.reason ?? "no suitable epsilon"}`),
    );
    const odometer = await api.odometer(datasetId);
    odoSlot.replaceChildren(renderOdometerPanel(odometer));
    onDecided?.(resp);
    return resp;
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void submit();
  });

  return { element: root, submit, readRequest };
}
