/**
 * Application bootstrap: wires the start screen, the scoring loop, and
 * the consensus view onto the static page served by the review service.
 */

import { ReviewApi, ApiError } from "./api.js";
import { SessionMachine } from "./state.js";
import { renderConsensusChart } from "./chart.js";
import {
  clearScoreForm,
  renderPairPanes,
  renderProgress,
  renderScoreForm,
  type ScoreFormView,
} from "./ui.js";
import { toCategoryScores, type SideForm } from "./validation.js";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id} in index.html`);
  return node;
}

function setStatus(text: string, isError = false): void {
  const bar = el("status");
  bar.textContent = text;
  bar.classList.toggle("error", isError);
}

async function main(): Promise<void> {
  const api = new ReviewApi("");
  const machine = new SessionMachine(api);

  const startPanel = el("start");
  const scoringPanel = el("scoring");
  const consensusPanel = el("consensus");
  const panes = el("panes");
  const formHost = el("form");
  const progress = el("progress");

  const show = (panel: HTMLElement) => {
    for (const p of [startPanel, scoringPanel, consensusPanel]) {
      p.hidden = p !== panel;
    }
  };

  const total = () => machine.session?.n_pairs ?? 0;
  let formView: ScoreFormView | null = null;

  const renderPair = () => {
    const pair = machine.currentPair();
    if (!pair) return;
    renderPairPanes(panes, pair);
    renderProgress(progress, machine.cursor, total(), machine.pendingCount());
    if (formView) clearScoreForm(formView);
  };

  const finishSession = async () => {
    renderProgress(progress, total(), total(), machine.pendingCount());
    if (machine.pendingCount() > 0) {
      setStatus("delivering queued scores...");
      await machine.flush();
    }
    if (machine.pendingCount() > 0) {
      setStatus("some scores still queued; check the connection and reload", true);
      return;
    }
    show(consensusPanel);
    try {
      const report = await machine.loadConsensus();
      renderConsensusChart(el("chart"), report);
      setStatus("");
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // Another reader's session is still open; scores are saved either way.
        el("chart").textContent =
          "Scores saved. Consensus unlocks once every started session finishes.";
        setStatus("");
        return;
      }
      throw err;
    }
  };

  const onSubmit = async (left: SideForm, right: SideForm) => {
    try {
      const result = await machine.submit(
        toCategoryScores(left),
        toCategoryScores(right),
      );
      setStatus(result.queued ? "saved locally, will retry delivery" : "");
    } catch (err) {
      if (err instanceof ApiError) {
        setStatus(`rejected: ${err.detail}`, true);
        return;
      }
      throw err;
    }
    if (machine.phase === "scoring") {
      renderPair();
    } else {
      await finishSession();
    }
  };

  const startForm = el("start-form") as HTMLFormElement;
  startForm.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const reader = (el("reader") as HTMLInputElement).value.trim();
    const assay = (el("assay") as HTMLInputElement).value.trim();
    const stain = (el("stain") as HTMLInputElement).value.trim();
    if (!reader || !assay || !stain) {
      setStatus("reader, assay and stain are all required", true);
      return;
    }
    try {
      await machine.start(reader, assay, stain);
    } catch (err) {
      if (err instanceof ApiError) {
        setStatus(`could not start: ${err.detail}`, true);
        return;
      }
      setStatus("service unreachable; is `stainlab serve` running?", true);
      return;
    }
    setStatus("");
    if (machine.phase === "complete") {
      // Empty study for this filter: nothing to score.
      await finishSession();
      return;
    }
    show(scoringPanel);
    formView = renderScoreForm(formHost, (l, r) => void onSubmit(l, r));
    renderPair();
  });

  try {
    const health = await api.health();
    setStatus(
      `connected: ${health.n_pairs} pairs, ` +
        `${health.n_open_sessions} open session(s)`,
    );
  } catch {
    setStatus("service unreachable; is `stainlab serve` running?", true);
  }
  show(startPanel);
}

void main();
