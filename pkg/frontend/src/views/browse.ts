import { ApiError, type ContactExchange, type ListingSummary } from "../api.js";
import { clear, el, priceText } from "../dom.js";
import type { Ctx } from "../ctx.js";

export const SEARCH_DEBOUNCE_MS = 250;

// Search with debounce and a sequence guard: a slow earlier response must
// never repaint over a newer one.

export function browseView(ctx: Ctx): HTMLElement {
  const root = el("div", { class: "browse", id: "browse" });

  const query = el("input", { id: "search-query", placeholder: "search the campus pool" });
  const categoryFilter = el("select", { id: "search-category" });
  categoryFilter.append(el("option", { value: "" }, "All categories"));
  const minPrice = el("input", { id: "search-min", inputmode: "numeric", placeholder: "min" });
  const maxPrice = el("input", { id: "search-max", inputmode: "numeric", placeholder: "max" });
  const notice = el("p", { class: "notice", id: "browse-notice", hidden: "hidden" });
  const results = el("div", { id: "search-results" });
  const contact = el("div", { id: "contact-panel", hidden: "hidden" });

  ctx.api
    .categories()
    .then((rows) => {
      for (const row of rows) categoryFilter.append(el("option", { value: row.name }, row.name));
    })
    .catch(() => {
      // filter stays empty; plain-text search still works
    });

  let timer: ReturnType<typeof setTimeout> | null = null;
  let seq = 0;

  async function runSearch(): Promise<void> {
    const mine = ++seq;
    let rows: ListingSummary[];
    try {
      rows = await ctx.api.search({
        q: query.value,
        category: categoryFilter.value || undefined,
        minPrice: minPrice.value === "" ? undefined : Number(minPrice.value),
        maxPrice: maxPrice.value === "" ? undefined : Number(maxPrice.value),
      });
    } catch {
      if (mine === seq) showNotice("Search failed. Try again in a moment.");
      return;
    }
    if (mine !== seq) return; // a newer search already owns the screen
    render(rows);
  }

  function scheduleSearch(): void {
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      void runSearch();
    }, SEARCH_DEBOUNCE_MS);
  }

  query.addEventListener("input", scheduleSearch);
  categoryFilter.addEventListener("change", () => void runSearch());
  minPrice.addEventListener("input", scheduleSearch);
  maxPrice.addEventListener("input", scheduleSearch);

  function render(rows: ListingSummary[]): void {
    clear(results);
    if (rows.length === 0) {
      results.append(
        el("div", { class: "empty-state", id: "empty-state" }, "Nothing here yet. Try fewer words."),
      );
      return;
    }
    for (const row of rows) {
      results.append(resultCard(row));
    }
  }

  function resultCard(row: ListingSummary): HTMLElement {
    const requestButton = el("button", { class: "request-button" }, "Request");
    requestButton.addEventListener("click", async () => {
      showNotice(null);
      try {
        const receipt = await ctx.api.requestProduct(row.id);
        showContact(receipt.contact);
        void runSearch(); // reserved items leave the pool
      } catch (error) {
        if (error instanceof ApiError && error.code === "already_reserved") {
          showNotice("Just taken by someone else.");
          void runSearch();
        } else {
          showNotice(error instanceof Error ? error.message : String(error));
        }
      }
    });
    return el(
      "div",
      { class: "card result-card", "data-listing-id": row.id },
      el("h3", { class: "listing-name" }, row.name),
      el("p", { class: "listing-price" }, priceText(row.price)),
      el("p", { class: "listing-category" }, row.category),
      el(
        "p",
        { class: "seller-line" },
        el("span", { class: "seller-name" }, row.sellerName),
        " ",
        el("span", { class: "seller-points" }, String(row.sellerPoints)),
      ),
      requestButton,
    );
  }

  function showNotice(text: string | null): void {
    clear(notice);
    if (text === null) {
      notice.hidden = true;
    } else {
      notice.append(text);
      notice.hidden = false;
    }
  }

  function showContact(exchange: ContactExchange): void {
    clear(contact);
    contact.hidden = false;
    contact.append(
      el("h3", {}, "Reserved. Get in touch:"),
      el(
        "p",
        { class: "contact-seller" },
        el("span", { class: "contact-name" }, exchange.seller.name),
        " ",
        el("span", { class: "contact-email" }, exchange.seller.email),
        " ",
        el("span", { class: "contact-phone" }, exchange.seller.phone),
      ),
      el("p", { class: "contact-hint" }, "They have your details too. Meet on campus."),
    );
  }

  root.append(
    el("div", { class: "search-bar" }, query, categoryFilter, minPrice, maxPrice),
    notice,
    contact,
    results,
  );
  void runSearch();
  return root;
}
