// Small DOM helpers; no framework, no virtual anything.

type Child = Node | string | null | undefined;

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | ((event: Event) => void)> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "function") {
      node.addEventListener(key.replace(/^on/, ""), value);
    } else if (key === "class") {
      node.className = value;
    } else {
      node.setAttribute(key, value);
    }
  }
  for (const child of children) {
    if (child === null || child === undefined) continue;
    node.append(child);
  }
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

/** Inline error slot under a form field. */
export function fieldError(node: HTMLElement, message: string | null): void {
  clear(node);
  if (message) {
    node.append(message);
    node.hidden = false;
  } else {
    node.hidden = true;
  }
}

export function priceText(minor: number): string {
  // prices are integers in minor units; render as-is, no locale games
  return String(minor);
}
