import { ApiError, type Category, type ListingDetail } from "../api.js";
import { clear, el, fieldError, priceText } from "../dom.js";
import type { Ctx } from "../ctx.js";

// Client-side limits mirror the server defaults for a faster "no", but the
// server stays authoritative: anything that slips through renders its
// server error verbatim.
export const NAME_MAX = 120;
export const DESCRIPTION_MAX = 2000;
export const PHOTO_CAP_BYTES = 2 * 1024 * 1024;
export const PHOTO_TYPES = ["image/jpeg", "image/png"];

export function sellView(ctx: Ctx): HTMLElement {
  const root = el("div", { class: "sell", id: "sell" });

  const name = el("input", { id: "sell-name" });
  const description = el("textarea", { id: "sell-description" });
  const price = el("input", { id: "sell-price", inputmode: "numeric" });
  const category = el("select", { id: "sell-category" });
  const quantity = el("input", { id: "sell-quantity", inputmode: "numeric", value: "1" });
  const shipping = el("input", { id: "sell-shipping" });
  const photo = el("input", { id: "sell-photo", type: "file", accept: PHOTO_TYPES.join(",") });
  const formError = el("p", { class: "error", id: "sell-error" });
  const banner = el("div", { class: "banner", id: "rejection-banner", hidden: "hidden" });
  const result = el("div", { id: "sell-result" });

  ctx.api
    .categories()
    .then((rows: Category[]) => {
      for (const row of rows) {
        category.append(el("option", { value: row.id }, row.name));
      }
    })
    .catch(() => fieldError(formError, "could not load categories"));

  const form = el(
    "form",
    { id: "sell-form" },
    el("h2", {}, "Add product"),
    el("label", {}, "Name", name),
    el("label", {}, "Description", description),
    el("label", {}, "Price (minor units)", price),
    el("label", {}, "Category", category),
    el("label", {}, "Quantity", quantity),
    el("label", {}, "Shipping note", shipping),
    el("label", {}, "Photo (JPEG/PNG, max 2 MiB)", photo),
    formError,
    el("button", { type: "submit" }, "List it"),
  );

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    fieldError(formError, null);
    banner.hidden = true;
    clear(result);

    const priceValue = Number(price.value);
    const quantityValue = quantity.value === "" ? 1 : Number(quantity.value);
    const complaint = validate(name.value, description.value, priceValue, quantityValue);
    if (complaint) {
      fieldError(formError, complaint);
      return;
    }

    let photoPart;
    const file = photo.files?.[0];
    if (file) {
      if (!PHOTO_TYPES.includes(file.type)) {
        fieldError(formError, "photo must be a JPEG or PNG");
        return;
      }
      if (file.size > PHOTO_CAP_BYTES) {
        fieldError(formError, "photo is larger than 2 MiB");
        return;
      }
      photoPart = {
        bytes: new Uint8Array(await readBytes(file)),
        type: file.type,
        filename: file.name,
      };
    }

    try {
      const listing = await ctx.api.createListing({
        name: name.value,
        description: description.value,
        price: priceValue,
        categoryId: category.value,
        quantity: quantityValue,
        shipping: shipping.value || undefined,
        photo: photoPart,
      });
      form.reset();
      result.append(listingCard(ctx, listing));
    } catch (error) {
      if (error instanceof ApiError && error.code === "non_compliant") {
        // the banner text is the server's verdict reason, untouched
        clear(banner);
        banner.append(error.message);
        banner.hidden = false;
      } else if (error instanceof ApiError) {
        fieldError(formError, error.message);
      } else {
        fieldError(formError, String(error));
      }
    }
  });

  root.append(form, banner, result);
  return root;
}

// Blob.arrayBuffer is missing from some DOM implementations; fall back to
// the old FileReader dance when it is.
function readBytes(file: File): Promise<ArrayBuffer> {
  if (typeof file.arrayBuffer === "function") return file.arrayBuffer();
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => resolve(reader.result as ArrayBuffer);
    reader.onerror = () => reject(reader.error ?? new Error("could not read the photo"));
    reader.readAsArrayBuffer(file);
  });
}

function validate(
  name: string,
  description: string,
  price: number,
  quantity: number,
): string | null {
  if (name.length < 1 || name.length > NAME_MAX) return `name must be 1 to ${NAME_MAX} characters`;
  if (description.length > DESCRIPTION_MAX) return `description is over ${DESCRIPTION_MAX} characters`;
  if (!Number.isInteger(price) || price < 0) return "price must be a whole number of minor units";
  if (!Number.isInteger(quantity) || quantity < 1) return "quantity must be a positive whole number";
  return null;
}

export function listingCard(ctx: Ctx, listing: ListingDetail): HTMLElement {
  const card = el(
    "div",
    { class: "card listing-card", "data-listing-id": listing.id },
    el("h3", { class: "listing-name" }, listing.name),
    el("p", { class: "listing-price" }, priceText(listing.price)),
    el("span", { class: "badge", id: "award-badge" }, listing.priceAward),
    listing.idealPrice === null
      ? null
      : el("p", { class: "ideal-price" }, `ideal ${priceText(listing.idealPrice)}`),
    el("p", { class: "listing-category" }, listing.category),
  );
  if (listing.hasPhoto) {
    card.prepend(el("img", { src: ctx.api.photoUrl(listing.id), alt: listing.name }));
  }
  return card;
}
