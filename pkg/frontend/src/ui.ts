/**
 * DOM layer: side-by-side pair panes with linked zoom/pan, the score
 * entry form, and progress display. All validation decisions come from
 * validation.ts; this file only reflects them into the DOM.
 *
 * Keyboard-first flow: focus lands on the first score input when a pair
 * renders, Tab walks the six fields in reading order, and Enter submits
 * once both sides are valid.
 */

import type { PairView } from "./api.js";
import {
  CATEGORIES,
  CATEGORY_LABELS,
  type SideForm,
  canSubmit,
  checkSide,
  emptySide,
} from "./validation.js";

// ------------------------------------------------------------- panes --

export interface ZoomPanState {
  scale: number;
  x: number;
  y: number;
}

const MIN_SCALE = 1;
const MAX_SCALE = 16;

/**
 * Apply one zoom/pan state to both images; pathologists compare the same
 * region in both panes, so the views never move independently.
 */
export class LinkedZoomPan {
  state: ZoomPanState = { scale: 1, x: 0, y: 0 };
  private targets: HTMLElement[] = [];
  private dragFrom: { x: number; y: number } | null = null;

  attach(...targets: HTMLElement[]): void {
    this.targets = targets;
    for (const el of targets) {
      el.addEventListener("wheel", (ev) => this.onWheel(ev as WheelEvent));
      el.addEventListener("pointerdown", (ev) =>
        this.onPointerDown(ev as PointerEvent),
      );
      el.addEventListener("pointermove", (ev) =>
        this.onPointerMove(ev as PointerEvent),
      );
      el.addEventListener("pointerup", () => (this.dragFrom = null));
      el.addEventListener("pointerleave", () => (this.dragFrom = null));
    }
    this.apply();
  }

  reset(): void {
    this.state = { scale: 1, x: 0, y: 0 };
    this.apply();
  }

  private onWheel(ev: WheelEvent): void {
    ev.preventDefault();
    const factor = ev.deltaY < 0 ? 1.2 : 1 / 1.2;
    const next = Math.min(
      MAX_SCALE,
      Math.max(MIN_SCALE, this.state.scale * factor),
    );
    this.state = { ...this.state, scale: next };
    if (next === MIN_SCALE) this.state = { scale: 1, x: 0, y: 0 };
    this.apply();
  }

  private onPointerDown(ev: PointerEvent): void {
    this.dragFrom = { x: ev.clientX, y: ev.clientY };
  }

  private onPointerMove(ev: PointerEvent): void {
    if (!this.dragFrom) return;
    this.state = {
      ...this.state,
      x: this.state.x + (ev.clientX - this.dragFrom.x),
      y: this.state.y + (ev.clientY - this.dragFrom.y),
    };
    this.dragFrom = { x: ev.clientX, y: ev.clientY };
    this.apply();
  }

  private apply(): void {
    const { scale, x, y } = this.state;
    for (const el of this.targets) {
      el.style.transform = `translate(${x}px, ${y}px) scale(${scale})`;
    }
  }
}

export interface PairPanes {
  root: HTMLElement;
  left: HTMLImageElement;
  right: HTMLImageElement;
  zoom: LinkedZoomPan;
}

export function renderPairPanes(
  container: HTMLElement,
  pair: PairView,
): PairPanes {
  const doc = container.ownerDocument;
  const root = doc.createElement("div");
  root.className = "panes";

  const images: HTMLImageElement[] = [];
  for (const [side, url] of [
    ["left", pair.left_url],
    ["right", pair.right_url],
  ] as const) {
    const pane = doc.createElement("figure");
    pane.className = `pane pane-${side}`;
    const img = doc.createElement("img");
    img.src = url;
    img.alt = `${side} image of pair ${pair.pair}`;
    img.draggable = false;
    const caption = doc.createElement("figcaption");
    caption.textContent = side === "left" ? "Left" : "Right";
    pane.append(img, caption);
    root.appendChild(pane);
    images.push(img);
  }

  const zoom = new LinkedZoomPan();
  zoom.attach(...images);
  container.replaceChildren(root);
  return { root, left: images[0], right: images[1], zoom };
}

// -------------------------------------------------------------- form --

export interface ScoreFormView {
  root: HTMLFormElement;
  inputs: Record<"left" | "right", Record<string, HTMLInputElement>>;
  messages: Record<"left" | "right", HTMLElement>;
  submit: HTMLButtonElement;
  read(): { left: SideForm; right: SideForm };
  refresh(): void;
}

export function renderScoreForm(
  container: HTMLElement,
  onSubmit: (left: SideForm, right: SideForm) => void,
): ScoreFormView {
  const doc = container.ownerDocument;
  const form = doc.createElement("form");
  form.className = "scores";

  const inputs: ScoreFormView["inputs"] = { left: {}, right: {} };
  const messages = {} as ScoreFormView["messages"];

  for (const side of ["left", "right"] as const) {
    const fieldset = doc.createElement("fieldset");
    fieldset.className = `side side-${side}`;
    const legend = doc.createElement("legend");
    legend.textContent = side === "left" ? "Left image" : "Right image";
    fieldset.appendChild(legend);

    for (const cat of CATEGORIES) {
      const label = doc.createElement("label");
      label.textContent = `${CATEGORY_LABELS[cat]} %`;
      const input = doc.createElement("input");
      input.type = "text";
      input.inputMode = "numeric";
      input.autocomplete = "off";
      input.name = `${side}.${cat}`;
      label.appendChild(input);
      fieldset.appendChild(label);
      inputs[side][cat] = input;
    }

    const message = doc.createElement("p");
    message.className = "message";
    message.setAttribute("role", "status");
    fieldset.appendChild(message);
    messages[side] = message;
    form.appendChild(fieldset);
  }

  const submit = doc.createElement("button");
  submit.type = "submit";
  submit.textContent = "Submit scores";
  submit.disabled = true;
  form.appendChild(submit);

  const read = () => {
    const sides = { left: emptySide(), right: emptySide() };
    for (const side of ["left", "right"] as const) {
      for (const cat of CATEGORIES) {
        sides[side][cat] = inputs[side][cat].value;
      }
    }
    return sides;
  };

  const refresh = () => {
    const { left, right } = read();
    for (const [side, sideForm] of [
      ["left", left],
      ["right", right],
    ] as const) {
      const check = checkSide(sideForm);
      const untouched = CATEGORIES.every((c) => sideForm[c].trim() === "");
      messages[side].textContent = untouched ? "" : check.message;
    }
    submit.disabled = !canSubmit(left, right);
  };

  form.addEventListener("input", refresh);
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const { left, right } = read();
    if (!canSubmit(left, right)) return; // Enter on an incomplete form
    onSubmit(left, right);
  });

  container.replaceChildren(form);
  inputs.left[CATEGORIES[0]].focus();
  return { root: form, inputs, messages, submit, read, refresh };
}

export function clearScoreForm(view: ScoreFormView): void {
  for (const side of ["left", "right"] as const) {
    for (const cat of CATEGORIES) {
      view.inputs[side][cat].value = "";
    }
  }
  view.refresh();
  view.inputs.left[CATEGORIES[0]].focus();
}

// ---------------------------------------------------------- progress --

export function renderProgress(
  container: HTMLElement,
  index: number,
  total: number,
  pending: number,
): void {
  const doc = container.ownerDocument;
  const text = doc.createElement("span");
  const scored = Math.min(index, total);
  text.textContent =
    scored >= total
      ? `all ${total} pairs scored`
      : `pair ${index + 1} of ${total}`;
  container.replaceChildren(text);
  if (pending > 0) {
    const queued = doc.createElement("span");
    queued.className = "queued";
    queued.textContent = ` (${pending} awaiting delivery)`;
    container.appendChild(queued);
  }
}
