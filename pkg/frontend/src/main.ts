import { ApiClient } from "./api.js";
import { mountApp } from "./app.js";

// API base comes from <meta name="api-base">, falling back to same-origin.
const meta = document.querySelector('meta[name="api-base"]');
const base = meta?.getAttribute("content") ?? "";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");
mountApp(root, { api: new ApiClient(base) });
