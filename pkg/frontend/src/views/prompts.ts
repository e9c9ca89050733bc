import { ApiError, type PromptEntry, type ResolveOutcome } from "../api.js";
import { clear, el, priceText } from "../dom.js";
import type { Ctx } from "../ctx.js";

// The seller-prompt modal: for every open request on my listings, decide
// sold / pending / declined. Sold settles pending points, so the counter
// is refreshed from the server afterwards; nothing is computed locally.

export function promptsModal(ctx: Ctx, onClose: () => void): HTMLElement {
  const overlay = el("div", { class: "overlay", id: "prompts-modal" });
  const list = el("div", { id: "prompt-list" });
  const closeButton = el("button", { id: "prompts-close" }, "Later");
  closeButton.addEventListener("click", onClose);

  const box = el(
    "div",
    { class: "modal" },
    el("h2", {}, "Someone wants your stuff"),
    list,
    closeButton,
  );
  overlay.append(box);

  function paint(entries: PromptEntry[]): void {
    clear(list);
    if (entries.length === 0) {
      list.append(el("p", { class: "empty-state" }, "All caught up."));
      return;
    }
    for (const entry of entries) {
      list.append(promptRow(entry));
    }
  }

  function promptRow(entry: PromptEntry): HTMLElement {
    const row = el(
      "div",
      { class: "card prompt-card", "data-request-id": entry.request.id },
      el("span", { class: "product-name" }, entry.product.name),
      " ",
      el("span", { class: "product-price" }, priceText(entry.product.price)),
      el(
        "p",
        { class: "prompt-buyer" },
        "wanted by ",
        el("span", { class: "buyer-name" }, entry.buyer.name),
        " ",
        el("span", { class: "buyer-email" }, entry.buyer.email),
        " ",
        el("span", { class: "buyer-phone" }, entry.buyer.phone),
      ),
    );
    const status = el("p", { class: "prompt-status" });
    for (const outcome of ["sold", "pending", "declined"] as ResolveOutcome[]) {
      const button = el("button", { class: `resolve-${outcome}` }, outcome);
      button.addEventListener("click", async () => {
        try {
          await ctx.api.resolveRequest(entry.request.id, outcome);
          if (outcome === "sold") await ctx.refreshPoints();
          await refresh();
        } catch (error) {
          if (error instanceof ApiError && error.status === 409) {
            await refresh(); // someone else resolved it first
          } else {
            clear(status);
            status.append(error instanceof Error ? error.message : String(error));
          }
        }
      });
      row.append(button);
    }
    row.append(status);
    return row;
  }

  async function refresh(): Promise<void> {
    await ctx.refreshPrompts();
    paint(ctx.session.promptQueue);
  }

  paint(ctx.session.promptQueue);
  return overlay;
}
