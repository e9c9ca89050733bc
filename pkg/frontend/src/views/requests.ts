import { el, priceText } from "../dom.js";
import type { Ctx } from "../ctx.js";

/** The buyer's local pool: everything they have requested, newest first. */
export function requestsView(ctx: Ctx): HTMLElement {
  const root = el("div", { class: "requests", id: "requests" });
  const list = el("div", { id: "request-list" });
  root.append(el("h2", {}, "My requests"), list);

  void ctx.api.myRequests().then((rows) => {
    if (rows.length === 0) {
      list.append(el("p", { class: "empty-state" }, "You have not requested anything."));
      return;
    }
    for (const row of rows) {
      list.append(
        el(
          "div",
          { class: "card request-card", "data-request-id": row.request.id },
          el("span", { class: "product-name" }, row.product.name),
          " ",
          el("span", { class: "product-price" }, priceText(row.product.price)),
          " ",
          el("span", { class: "request-state" }, row.request.state),
        ),
      );
    }
  });

  return root;
}
